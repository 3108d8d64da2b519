#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>

#include "clop/embedding.hpp"
#include "clop/losses.hpp"
#include "clop/matrix.hpp"
#include "clop/svd.hpp"

namespace clop::diagnostics {

using core::PairMap;
using core::PairMode;
using core::RawEmbeddingSet;
using core::UnitEmbeddingSet;

inline constexpr double kEffRankEps = 1e-3;

// Count of singular values above eps_rel * sigma_max; 0 for an all-zero
// spectrum.
inline std::size_t effective_rank(const Vec& spectrum, double eps_rel = kEffRankEps) {
    if (spectrum.empty() || spectrum.front() <= 0.0) return 0;
    double cut = eps_rel * spectrum.front();
    std::size_t r = 0;
    for (double s : spectrum)
        if (s > cut) ++r;
    return r;
}

inline std::size_t effective_rank_of(const Matrix& M, double eps_rel = kEffRankEps) {
    return effective_rank(singular_spectrum(M), eps_rel);
}

// Mean-centered data projected on its top-2 right singular directions.
// Output columns have zero mean; variances come out descending because the
// spectrum is sorted.
inline Matrix pca2(const Matrix& Z) {
    const std::size_t n = Z.rows, m = Z.cols;
    Matrix X(n, m);
    for (std::size_t j = 0; j < m; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += Z(i, j);
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) X(i, j) = Z(i, j) - mean;
    }
    SvdResult s = jacobi_svd(X);
    Matrix out(n, 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < 2; ++c) {
            double v = 0.0;
            if (c < s.V.cols)
                for (std::size_t j = 0; j < m; ++j) v += X(i, j) * s.V(j, c);
            out(i, c) = v;
        }
    return out;
}

// (mu, |mu|) with mu = (1/N) sum z_i.
inline std::pair<Vec, double> embedding_mean(const UnitEmbeddingSet& Z) {
    const std::size_t n = Z.n_points(), m = Z.dim();
    Vec mu(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* z = Z.data.row(i);
        for (std::size_t j = 0; j < m; ++j) mu[j] += z[j];
    }
    for (double& v : mu) v /= static_cast<double>(n);
    double nrm = norm2(mu.data(), m);
    return {std::move(mu), nrm};
}

// Is X a stationary point of the (paired: InfoNCE, merged: repulsive) loss in
// raw space? Returns (inf-norm <= tol, the inf-norm itself).
inline std::pair<bool, double> stationarity_check(const RawEmbeddingSet& X,
                                                  const PairMap& pairs, double tau,
                                                  double tol) {
    Matrix G = pairs.mode == PairMode::paired
                   ? losses::infonce_grad_raw(X, pairs, tau)
                   : losses::repulsive_grad_raw(X, tau);
    double nrm = max_abs(G);
    return {nrm <= tol, nrm};
}

// Admissible learning-rate interval around tau/2.
struct LrWindow {
    double eta_lo = 0.0;
    double eta_hi = 0.0;
    double midpoint = 0.0;  // always tau/2
    double tau = 0.0;
    double sigma = 0.0;
    std::size_t n_neg = 0;
};

// eta_{lo,hi} = (tau/2)(1 -+ sigma^2 (1+|N|) / (2|N|)), lower edge clamped at
// 0 since a negative learning rate is meaningless.
inline LrWindow lr_window(double tau, double sigma, std::size_t n_neg) {
    if (tau <= 0.0 || sigma <= 0.0 || n_neg < 1)
        throw UsageError("lr_window needs tau > 0, sigma > 0, negatives >= 1");
    double f = sigma * sigma * (1.0 + static_cast<double>(n_neg)) /
               (2.0 * static_cast<double>(n_neg));
    LrWindow w;
    w.midpoint = tau / 2.0;
    w.eta_lo = std::max(0.0, w.midpoint * (1.0 - f));
    w.eta_hi = w.midpoint * (1.0 + f);
    w.tau = tau;
    w.sigma = sigma;
    w.n_neg = n_neg;
    return w;
}

// One-step mean-shift bound report. lhs is the measured |mu| after one real
// merged-pair repulsive step; rhs is the closed-form claim. The claim's own
// derivation is shaky, so `satisfied` is reported, never asserted.
struct BoundCheckResult {
    double lhs = 0.0;
    double rhs = 0.0;
    bool satisfied = false;
    double mu0_norm = 0.0;
    double sigma = 0.0;       // min raw row norm of the input
    double max_p_asymmetry = 0.0;
    std::size_t n_points = 0;
    std::size_t dim = 0;
    double tau = 0.0;
    double lr = 0.0;
};

inline BoundCheckResult mean_shift_bound_check(const RawEmbeddingSet& X, double tau,
                                               double lr) {
    const std::size_t n = X.n_points();
    BoundCheckResult r;
    r.n_points = n;
    r.dim = X.dim();
    r.tau = tau;
    r.lr = lr;
    double sigma = row_norm(X.data, 0);
    for (std::size_t i = 1; i < n; ++i) sigma = std::min(sigma, row_norm(X.data, i));
    r.sigma = sigma;

    UnitEmbeddingSet Z = core::normalize(X);
    r.mu0_norm = embedding_mean(Z).second;

    Matrix P = losses::prob_matrix(Z, tau);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < n; ++a)
            r.max_p_asymmetry = std::max(r.max_p_asymmetry, std::fabs(P(i, a) - P(a, i)));

    Matrix G = losses::repulsive_grad_raw(X, tau);
    RawEmbeddingSet X1{X.data};
    for (std::size_t t = 0; t < X1.data.a.size(); ++t) X1.data.a[t] -= lr * G.a[t];
    r.lhs = embedding_mean(core::normalize(X1)).second;

    double n_neg = static_cast<double>(n - 1);
    r.rhs = std::fabs(1.0 - 2.0 * lr / tau) * (2.0 / (sigma * sigma)) *
            (n_neg / (1.0 + n_neg)) * r.mu0_norm;
    r.satisfied = r.lhs <= r.rhs + 1e-12;
    return r;
}

} // namespace clop::diagnostics
