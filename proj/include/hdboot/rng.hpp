#pragma once

// Counter-based, splittable random streams.
//
// A stream is identified by (master_seed, path). The path is hashed into a
// 64-bit key and the engine emits mix(key + (i + 1) * golden) for counter i,
// i.e. a SplitMix64 sequence started at a hashed position. Streams with
// different paths never share state, so replicates and bootstrap draws can be
// generated in any order on any thread.

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

namespace hdboot {

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) noexcept {
    return mix64(h ^ mix64(v + kGolden + (h << 6) + (h >> 2)));
}

}  // namespace detail

// Purpose tags used as the first path element so that e.g. data and bootstrap
// draws for the same simulation index never collide.
enum class StreamTag : std::uint64_t {
    Data = 1,
    Basis = 2,
    Bootstrap = 3,
    Concentration = 4,
    Spiked = 5,
    Truth = 6,
    User = 100,
};

class CounterEngine {
public:
    using result_type = std::uint64_t;

    explicit CounterEngine(std::uint64_t key) noexcept : key_(key) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        ++counter_;
        return detail::mix64(key_ + counter_ * detail::kGolden);
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    // Unbiased integer in [0, bound) (Lemire's multiply-and-reject).
    std::uint64_t below(std::uint64_t bound) noexcept {
        auto x = (*this)();
        __uint128_t m = static_cast<__uint128_t>(x) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                x = (*this)();
                m = static_cast<__uint128_t>(x) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t position() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

class RngStream {
public:
    RngStream() = default;
    explicit RngStream(std::uint64_t master_seed, std::vector<std::uint64_t> path = {})
        : seed_(master_seed), path_(std::move(path)) {}

    RngStream child(std::uint64_t index) const {
        auto p = path_;
        p.push_back(index);
        return RngStream(seed_, std::move(p));
    }

    RngStream child(StreamTag tag) const { return child(static_cast<std::uint64_t>(tag)); }

    RngStream child(std::initializer_list<std::uint64_t> indices) const {
        auto p = path_;
        p.insert(p.end(), indices.begin(), indices.end());
        return RngStream(seed_, std::move(p));
    }

    std::uint64_t key() const noexcept {
        std::uint64_t h = detail::mix64(seed_ ^ 0x6A09E667F3BCC908ULL);
        for (auto v : path_) h = detail::hash_combine(h, v);
        // Length is folded in so that {a} and {a, 0} differ.
        return detail::hash_combine(h, path_.size());
    }

    CounterEngine engine() const noexcept { return CounterEngine(key()); }

    std::uint64_t master_seed() const noexcept { return seed_; }
    std::span<const std::uint64_t> path() const noexcept { return path_; }

    friend bool operator==(const RngStream&, const RngStream&) = default;

private:
    std::uint64_t seed_ = 0;
    std::vector<std::uint64_t> path_;
};

// Stable 64-bit label for a real-valued grid coordinate (r, c, ...).
inline std::uint64_t stream_label(double x) noexcept {
    std::uint64_t bits = 0;
    static_assert(sizeof(bits) == sizeof(x));
    __builtin_memcpy(&bits, &x, sizeof(bits));
    return bits;
}

inline std::uint64_t stream_label(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char ch : s) h = (h ^ ch) * 0x100000001B3ULL;
    return h;
}

}  // namespace hdboot
