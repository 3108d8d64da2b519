#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "clop/embedding.hpp"
#include "clop/errors.hpp"
#include "clop/matrix.hpp"
#include "clop/prototypes.hpp"

namespace clop::losses {

using core::PairMap;
using core::PairMode;
using core::RawEmbeddingSet;
using core::UnitEmbeddingSet;
using prototypes::PrototypeSet;

enum class SimilarityKind { cosine, neg_sq_euclidean, neg_l1 };

inline std::string to_string(SimilarityKind s) {
    switch (s) {
        case SimilarityKind::cosine: return "cosine";
        case SimilarityKind::neg_sq_euclidean: return "neg_sq_euclidean";
        default: return "neg_l1";
    }
}

inline SimilarityKind similarity_from_string(const std::string& s) {
    if (s == "cosine") return SimilarityKind::cosine;
    if (s == "neg_sq_euclidean") return SimilarityKind::neg_sq_euclidean;
    if (s == "neg_l1") return SimilarityKind::neg_l1;
    throw UsageError("unknown similarity kind: " + s);
}

// Labels and the labeled subset S. Unlabeled points keep label -1.
struct LabeledBatch {
    std::vector<int> labels;
    std::vector<char> mask;

    std::size_t masked_count() const {
        std::size_t c = 0;
        for (char m : mask)
            if (m) ++c;
        return c;
    }

    void validate(std::size_t n, std::size_t k) const {
        if (labels.size() != n || mask.size() != n)
            throw UsageError("labeled batch size mismatch");
        for (std::size_t i = 0; i < n; ++i)
            if (mask[i] && (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k))
                throw LabelOutOfRange("label " + std::to_string(labels[i]) +
                                      " out of range at point " + std::to_string(i));
    }
};

struct LossReport {
    double value = 0.0;
    Matrix grad_raw;
    double infonce = 0.0;
    double clop_penalty = 0.0;
};

namespace detail {

// Row-softmax weights over a != i of exp(s_ia / tau), stabilized per row.
// Diagonal stays zero.
inline Matrix softmax_weights(const Matrix& S, double tau) {
    const std::size_t n = S.rows;
    Matrix W(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = -1e300;
        for (std::size_t a = 0; a < n; ++a)
            if (a != i) mx = std::max(mx, S(i, a));
        double denom = 0.0;
        for (std::size_t a = 0; a < n; ++a)
            if (a != i) denom += std::exp((S(i, a) - mx) / tau);
        for (std::size_t a = 0; a < n; ++a)
            if (a != i) W(i, a) = std::exp((S(i, a) - mx) / tau) / denom;
    }
    return W;
}

} // namespace detail

// -sum_i log[ exp(s_i,j(i)/tau) / sum_{a != i} exp(s_ia/tau) ].
// The denominator contains the positive term exactly once.
inline double infonce_value(const UnitEmbeddingSet& Z, const PairMap& pairs, double tau) {
    const std::size_t n = Z.n_points();
    pairs.validate(n);
    if (pairs.mode != PairMode::paired) throw BadPairMap("infonce needs paired mode");
    Matrix S = mul_abt(Z.data, Z.data);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double mx = -1e300;
        for (std::size_t a = 0; a < n; ++a)
            if (a != i) mx = std::max(mx, S(i, a));
        double lse = 0.0;
        for (std::size_t a = 0; a < n; ++a)
            if (a != i) lse += std::exp((S(i, a) - mx) / tau);
        total += -(S(i, pairs.partner[i]) - mx) / tau + std::log(lse);
    }
    return total;
}

// Value plus the gradient with respect to the unit embeddings z:
// dL/dz_c = (1/tau) [ ((W + W^T) Z)_c - 2 z_j(c) ].
inline std::pair<double, Matrix> infonce_value_grad_z(const UnitEmbeddingSet& Z,
                                                      const PairMap& pairs, double tau) {
    const std::size_t n = Z.n_points(), m = Z.dim();
    pairs.validate(n);
    if (pairs.mode != PairMode::paired) throw BadPairMap("infonce needs paired mode");
    Matrix S = mul_abt(Z.data, Z.data);
    Matrix W = detail::softmax_weights(S, tau);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double mx = -1e300;
        for (std::size_t a = 0; a < n; ++a)
            if (a != i) mx = std::max(mx, S(i, a));
        double lse = 0.0;
        for (std::size_t a = 0; a < n; ++a)
            if (a != i) lse += std::exp((S(i, a) - mx) / tau);
        total += -(S(i, pairs.partner[i]) - mx) / tau + std::log(lse);
    }
    Matrix G(n, m);
    for (std::size_t c = 0; c < n; ++c) {
        double* g = G.row(c);
        for (std::size_t a = 0; a < n; ++a) {
            double w = W(c, a) + W(a, c);
            if (w == 0.0) continue;
            const double* za = Z.data.row(a);
            for (std::size_t j = 0; j < m; ++j) g[j] += w * za[j];
        }
        const double* zp = Z.data.row(pairs.partner[c]);
        for (std::size_t j = 0; j < m; ++j) g[j] = (g[j] - 2.0 * zp[j]) / tau;
    }
    return {total, std::move(G)};
}

// Gradient of infonce_value(normalize(X)) with respect to X.
inline Matrix infonce_grad_raw(const RawEmbeddingSet& X, const PairMap& pairs, double tau) {
    UnitEmbeddingSet Z = core::normalize(X);
    auto [value, Gz] = infonce_value_grad_z(Z, pairs, tau);
    (void)value;
    return core::pullback_rows(X.data, Gz);
}

// Merged-pair probability matrix:
// P_ia = exp(s_ia/tau) / (exp(1/tau) + sum_{b != i} exp(s_ib/tau)), diag 0.
// Evaluated as exp((s-1)/tau) ratios so nothing overflows at small tau.
inline Matrix prob_matrix(const UnitEmbeddingSet& Z, double tau) {
    const std::size_t n = Z.n_points();
    Matrix S = mul_abt(Z.data, Z.data);
    Matrix P(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double denom = 1.0;
        for (std::size_t a = 0; a < n; ++a)
            if (a != i) denom += std::exp((S(i, a) - 1.0) / tau);
        for (std::size_t a = 0; a < n; ++a)
            if (a != i) P(i, a) = std::exp((S(i, a) - 1.0) / tau) / denom;
    }
    return P;
}

// Merged-pair repulsive loss: sum_i log D_i - N/tau, with
// D_i = exp(1/tau) + sum_{a != i} exp(s_ia/tau).
inline double repulsive_value(const UnitEmbeddingSet& Z, double tau) {
    const std::size_t n = Z.n_points();
    Matrix S = mul_abt(Z.data, Z.data);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t a = 0; a < n; ++a)
            if (a != i) sum += std::exp((S(i, a) - 1.0) / tau);
        total += std::log1p(sum);
    }
    return total;
}

// dL/dz_c = (1/tau) ((P + P^T) Z)_c. P is not symmetric in general, so both
// halves are kept explicitly.
inline std::pair<double, Matrix> repulsive_value_grad_z(const UnitEmbeddingSet& Z,
                                                        double tau) {
    const std::size_t n = Z.n_points(), m = Z.dim();
    Matrix P = prob_matrix(Z, tau);
    Matrix G(n, m);
    for (std::size_t c = 0; c < n; ++c) {
        double* g = G.row(c);
        for (std::size_t a = 0; a < n; ++a) {
            double w = P(c, a) + P(a, c);
            if (w == 0.0) continue;
            const double* za = Z.data.row(a);
            for (std::size_t j = 0; j < m; ++j) g[j] += w * za[j];
        }
        for (std::size_t j = 0; j < m; ++j) g[j] /= tau;
    }
    return {repulsive_value(Z, tau), std::move(G)};
}

inline Matrix repulsive_grad_raw(const RawEmbeddingSet& X, double tau) {
    UnitEmbeddingSet Z = core::normalize(X);
    auto [value, Gz] = repulsive_value_grad_z(Z, tau);
    (void)value;
    return core::pullback_rows(X.data, Gz);
}

namespace detail {

inline double similarity(const double* z, const double* c, std::size_t m,
                         SimilarityKind sim) {
    switch (sim) {
        case SimilarityKind::cosine:
            return dot(z, c, m);
        case SimilarityKind::neg_sq_euclidean: {
            double d2 = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                double d = z[j] - c[j];
                d2 += d * d;
            }
            return 1.0 - d2 / 2.0;
        }
        default: {  // neg_l1
            double d1 = 0.0;
            for (std::size_t j = 0; j < m; ++j) d1 += std::fabs(z[j] - c[j]);
            return 1.0 - d1 / 2.0;
        }
    }
}

} // namespace detail

// Prototype-pull penalty: (1/|S|) sum_{i in S} (1 - s(row_i, c_{y_i})); 0 on
// an empty S. Rows are unit embeddings for cosine/neg_l1 and raw embeddings
// for neg_sq_euclidean (the caller picks; clop_total does this automatically).
inline double clop_penalty(const Matrix& rows, const LabeledBatch& batch,
                           const PrototypeSet& C, SimilarityKind sim) {
    batch.validate(rows.rows, C.k);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < rows.rows; ++i) {
        if (!batch.mask[i]) continue;
        sum += 1.0 - detail::similarity(rows.row(i), C.row(batch.labels[i]), rows.cols, sim);
        ++count;
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

inline double clop_penalty(const UnitEmbeddingSet& Z, const LabeledBatch& batch,
                           const PrototypeSet& C, SimilarityKind sim) {
    return clop_penalty(Z.data, batch, C, sim);
}

// Penalty plus its gradient with respect to the given rows (z-space for
// cosine/neg_l1, raw space for neg_sq_euclidean).
inline std::pair<double, Matrix> clop_penalty_grad(const Matrix& rows,
                                                   const LabeledBatch& batch,
                                                   const PrototypeSet& C,
                                                   SimilarityKind sim) {
    batch.validate(rows.rows, C.k);
    const std::size_t m = rows.cols;
    Matrix G(rows.rows, m);
    double count = static_cast<double>(batch.masked_count());
    if (count == 0) return {0.0, std::move(G)};
    double sum = 0.0;
    for (std::size_t i = 0; i < rows.rows; ++i) {
        if (!batch.mask[i]) continue;
        const double* z = rows.row(i);
        const double* c = C.row(batch.labels[i]);
        sum += 1.0 - detail::similarity(z, c, m, sim);
        double* g = G.row(i);
        switch (sim) {
            case SimilarityKind::cosine:
                for (std::size_t j = 0; j < m; ++j) g[j] = -c[j] / count;
                break;
            case SimilarityKind::neg_sq_euclidean:
                for (std::size_t j = 0; j < m; ++j) g[j] = (z[j] - c[j]) / count;
                break;
            default:  // neg_l1; subgradient 0 at kinks
                for (std::size_t j = 0; j < m; ++j) {
                    double d = z[j] - c[j];
                    g[j] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / (2.0 * count);
                }
                break;
        }
    }
    return {sum / count, std::move(G)};
}

// Full objective: infonce + lambda * penalty, with the exact analytic
// raw-space gradient of the whole thing.
inline LossReport clop_total(const RawEmbeddingSet& X, const PairMap& pairs,
                             const LabeledBatch& batch, const PrototypeSet& C,
                             double tau, double lambda, SimilarityKind sim) {
    UnitEmbeddingSet Z = core::normalize(X);
    auto [nce, Gz] = infonce_value_grad_z(Z, pairs, tau);
    double penalty = 0.0;
    if (sim == SimilarityKind::neg_sq_euclidean) {
        // Penalty acts on raw embeddings: add its gradient after the pullback.
        auto [p, Gp] = clop_penalty_grad(X.data, batch, C, sim);
        penalty = p;
        Matrix G = core::pullback_rows(X.data, Gz);
        for (std::size_t t = 0; t < G.a.size(); ++t) G.a[t] += lambda * Gp.a[t];
        return LossReport{nce + lambda * penalty, std::move(G), nce, penalty};
    }
    auto [p, Gp] = clop_penalty_grad(Z.data, batch, C, sim);
    penalty = p;
    for (std::size_t t = 0; t < Gz.a.size(); ++t) Gz.a[t] += lambda * Gp.a[t];
    Matrix G = core::pullback_rows(X.data, Gz);
    return LossReport{nce + lambda * penalty, std::move(G), nce, penalty};
}

} // namespace clop::losses
