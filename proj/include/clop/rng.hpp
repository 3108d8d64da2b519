#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "clop/matrix.hpp"

namespace clop {

// splitmix64: scrambles (seed, stream id) pairs into independent sub-seeds.
// Keeping streams separate is what lets a lambda=0 CLOP run consume randomness
// identically to a plain InfoNCE run.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return splitmix64(base ^ (stream * 0xD6E8FEB86659FD93ULL));
}

// Seeded generator. Deterministic for a fixed build; the standard library
// distributions are implementation-defined across toolchains, which the
// determinism contract explicitly permits.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double gaussian(double stddev = 1.0) {
        return std::normal_distribution<double>(0.0, 1.0)(gen_) * stddev;
    }

    // Uniform in [0, 1).
    double uniform() {
        return std::uniform_real_distribution<double>(0.0, 1.0)(gen_);
    }

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(gen_);
    }

    std::uint64_t integer(std::uint64_t n) {  // in [0, n)
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(gen_);
    }

    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        std::iota(p.begin(), p.end(), std::size_t{0});
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(integer(i));
            std::swap(p[i - 1], p[j]);
        }
        return p;
    }

    Matrix gaussian_matrix(std::size_t r, std::size_t c, double stddev = 1.0) {
        Matrix m(r, c);
        for (double& v : m.a) v = gaussian(stddev);
        return m;
    }

    Matrix uniform01_matrix(std::size_t r, std::size_t c) {
        Matrix m(r, c);
        for (double& v : m.a) v = uniform();
        return m;
    }

private:
    std::mt19937_64 gen_;
};

} // namespace clop
