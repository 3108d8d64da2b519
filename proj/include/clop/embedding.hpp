#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>

#include "clop/errors.hpp"
#include "clop/matrix.hpp"
#include "clop/rng.hpp"

namespace clop::core {

// Pre-normalization embeddings X; what gradient descent updates.
struct RawEmbeddingSet {
    Matrix data;
    std::size_t n_points() const { return data.rows; }
    std::size_t dim() const { return data.cols; }
};

// Row-normalized embeddings Z; what the losses consume.
struct UnitEmbeddingSet {
    Matrix data;
    std::size_t n_points() const { return data.rows; }
    std::size_t dim() const { return data.cols; }
};

enum class PairMode { paired, merged };

inline std::string to_string(PairMode m) {
    return m == PairMode::paired ? "paired" : "merged";
}

inline PairMode pair_mode_from_string(const std::string& s) {
    if (s == "paired") return PairMode::paired;
    if (s == "merged") return PairMode::merged;
    throw UsageError("unknown pair mode: " + s);
}

// Positive-pair structure. Paired mode stores a fixed-point-free involution
// j(i); merged mode treats every point as its own already-merged pair, with
// every other index acting as a negative.
struct PairMap {
    PairMode mode = PairMode::merged;
    std::vector<std::size_t> partner;  // paired mode only

    static PairMap merged() { return PairMap{}; }

    // Adjacent pairing 0<->1, 2<->3, ...
    static PairMap adjacent(std::size_t n) {
        PairMap pm;
        pm.mode = PairMode::paired;
        pm.partner.resize(n);
        for (std::size_t i = 0; i < n; ++i) pm.partner[i] = i ^ 1u;
        return pm;
    }

    void validate(std::size_t n) const {
        if (mode == PairMode::merged) return;
        if (partner.size() != n || n % 2 != 0)
            throw BadPairMap("pair map size mismatch or odd point count");
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t j = partner[i];
            if (j >= n || j == i || partner[j] != i)
                throw BadPairMap("pair map is not a fixed-point-free involution");
        }
    }
};

inline constexpr double kZeroNormThreshold = 1e-300;

// Euclidean norm that stays exact down to the zero-norm threshold. The naive
// sum of squares flushes to zero for norms under ~1e-162 (and to inf above
// ~1e154), which would misclassify representable rows; those tails rescale by
// the largest magnitude first.
inline double robust_norm(const double* x, std::size_t m) {
    double n = norm2(x, m);
    if (n > 1e-140 && std::isfinite(n)) return n;
    double mx = 0.0;
    for (std::size_t j = 0; j < m; ++j) mx = std::max(mx, std::fabs(x[j]));
    if (mx == 0.0) return 0.0;
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        double t = x[j] / mx;
        s += t * t;
    }
    return mx * std::sqrt(s);
}

inline UnitEmbeddingSet normalize(const RawEmbeddingSet& X) {
    UnitEmbeddingSet Z{Matrix(X.data.rows, X.data.cols)};
    for (std::size_t i = 0; i < X.data.rows; ++i) {
        double n = robust_norm(X.data.row(i), X.data.cols);
        if (n < kZeroNormThreshold) throw ZeroNormRow(i);
        const double* src = X.data.row(i);
        double* dst = Z.data.row(i);
        for (std::size_t j = 0; j < X.data.cols; ++j) dst[j] = src[j] / n;
    }
    return Z;
}

// Maps a gradient g with respect to z = x/|x| back to x-space:
// (1/|x|) (I - x x^T / |x|^2) g. The result is orthogonal to x, so descent
// along it never moves x radially.
inline Vec normalization_pullback(const double* x, const double* g, std::size_t m) {
    double n = robust_norm(x, m);
    if (n < kZeroNormThreshold) throw ZeroNormRow(0);
    double xg = dot(x, g, m);
    double coef = xg / (n * n);
    Vec out(m);
    for (std::size_t j = 0; j < m; ++j) out[j] = (g[j] - coef * x[j]) / n;
    return out;
}

inline Vec normalization_pullback(const Vec& x, const Vec& g) {
    return normalization_pullback(x.data(), g.data(), x.size());
}

// Row-wise pullback of a z-space gradient through normalization.
inline Matrix pullback_rows(const Matrix& X, const Matrix& Gz) {
    Matrix out(X.rows, X.cols);
    for (std::size_t i = 0; i < X.rows; ++i) {
        double n = robust_norm(X.row(i), X.cols);
        if (n < kZeroNormThreshold) throw ZeroNormRow(i);
        const double* x = X.row(i);
        const double* g = Gz.row(i);
        double coef = dot(x, g, X.cols) / (n * n);
        double* o = out.row(i);
        for (std::size_t j = 0; j < X.cols; ++j) o[j] = (g[j] - coef * x[j]) / n;
    }
    return out;
}

inline RawEmbeddingSet random_raw(std::size_t n, std::size_t m, std::uint64_t seed,
                                  double scale) {
    Rng rng(seed);
    return RawEmbeddingSet{rng.gaussian_matrix(n, m, scale)};
}

} // namespace clop::core
