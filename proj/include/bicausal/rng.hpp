#pragma once
// Counter-based deterministic randomness.
//
// Every random draw in the toolkit is a pure function of a 64-bit key, so
// results never depend on call order, thread scheduling, or how many other
// items were generated before.

#include <array>
#include <cstdint>
#include <string_view>
#include <utility>

namespace bicausal::rng {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001B3ULL;
    }
    return h;
}

// Derive a child key from a parent key and a label. Not symmetric.
constexpr std::uint64_t derive(std::uint64_t parent, std::uint64_t label) noexcept {
    return splitmix64(parent ^ splitmix64(label + 0x632BE59BD9B4E019ULL));
}

inline std::uint64_t derive(std::uint64_t parent, std::string_view label) noexcept {
    return derive(parent, fnv1a64(label));
}

// Stream of values addressed by (key, counter).
class CounterStream {
public:
    explicit constexpr CounterStream(std::uint64_t key) noexcept : key_(key) {}

    constexpr std::uint64_t next() noexcept {
        return splitmix64(key_ + 0x9E3779B97F4A7C15ULL * ++counter_);
    }

    // Uniform on [0, 1) with 53 bits of resolution.
    constexpr double uniform() noexcept {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    // Unbiased integer in [0, bound). bound must be > 0.
    constexpr std::uint64_t below(std::uint64_t bound) noexcept {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// Fisher-Yates permutation of `items` driven by `seed`.
template <typename T, std::size_t N>
std::array<T, N> shuffled(std::array<T, N> items, std::uint64_t seed) {
    CounterStream stream(seed);
    for (std::size_t i = N; i > 1; --i) {
        const auto j = static_cast<std::size_t>(stream.below(i));
        std::swap(items[i - 1], items[j]);
    }
    return items;
}

}  // namespace bicausal::rng
