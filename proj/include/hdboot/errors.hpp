#pragma once

#include <stdexcept>
#include <string>

namespace hdboot {

// Bad arguments: shape mismatches, non-finite data, out-of-range counts.
class input_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A spectrum that makes a statistic undefined (e.g. lambda_2 == lambda_3 in the gap ratio).
class degenerate_spectrum_error : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Fixed-point solver that did not reach its tolerance.
class solver_error : public std::runtime_error {
public:
    solver_error(const std::string& what, int iterations, double residual)
        : std::runtime_error(what + " (iterations=" + std::to_string(iterations) +
                             ", residual=" + std::to_string(residual) + ")"),
          iterations_(iterations),
          residual_(residual) {}

    int iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }

private:
    int iterations_;
    double residual_;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw input_error(msg);
}

}  // namespace detail
}  // namespace hdboot
