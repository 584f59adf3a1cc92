#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace lvgrid::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Documented seed-split function: derive(master, part0, part1, ...) folds each
// part into the key with splitmix64. All randomness in the toolkit flows from a
// single master seed through this function, so streams are independent of
// evaluation order.
inline std::uint64_t derive(std::uint64_t master, std::initializer_list<std::uint64_t> parts) {
    std::uint64_t key = splitmix64(master);
    for (std::uint64_t p : parts) key = splitmix64(key ^ (p + 0x9E3779B97F4A7C15ull));
    return key;
}

inline std::uint64_t derive(std::uint64_t master, std::uint64_t a) { return derive(master, {a}); }
inline std::uint64_t derive(std::uint64_t master, std::uint64_t a, std::uint64_t b) { return derive(master, {a, b}); }
inline std::uint64_t derive(std::uint64_t master, std::uint64_t a, std::uint64_t b, std::uint64_t c) { return derive(master, {a, b, c}); }

// Counter-based stream: the n-th draw is a pure function of (key, n), so any
// subset of draws can be evaluated concurrently and in any order.
struct Stream {
    std::uint64_t key = 0;

    std::uint64_t bits(std::uint64_t index) const {
        return splitmix64(key ^ splitmix64(index + 0x632BE59BD9B4E019ull));
    }

    // Uniform on (0, 1].
    double uniform_pos(std::uint64_t index) const {
        return static_cast<double>((bits(index) >> 11) + 1) * 0x1p-53;
    }

    // Uniform on [0, 1).
    double uniform(std::uint64_t index) const {
        return static_cast<double>(bits(index) >> 11) * 0x1p-53;
    }

    double uniform(std::uint64_t index, double lo, double hi) const {
        return lo + (hi - lo) * uniform(index);
    }

    // Standard normal via Box-Muller; one draw consumes two counter slots.
    double normal(std::uint64_t index) const {
        const double u1 = uniform_pos(2 * index);
        const double u2 = uniform(2 * index + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(std::uint64_t index, double mean, double sigma) const {
        return mean + sigma * normal(index);
    }
};

} // namespace lvgrid::rng
