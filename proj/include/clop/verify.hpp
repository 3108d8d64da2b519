#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "clop/diagnostics.hpp"
#include "clop/dynamics.hpp"
#include "clop/embedding.hpp"
#include "clop/errors.hpp"
#include "clop/losses.hpp"
#include "clop/matrix.hpp"
#include "clop/prototypes.hpp"
#include "clop/rng.hpp"

// Self-contained numerical audits, runnable from the CLI. Each suite returns
// a tally of named checks; a suite passes only if every assertable check does.

namespace clop::verify {

using core::PairMap;
using core::RawEmbeddingSet;
using core::UnitEmbeddingSet;
using losses::LabeledBatch;
using losses::SimilarityKind;
using prototypes::PrototypeSet;
using prototypes::ProtoMode;

struct CheckResult {
    std::string name;
    bool passed = false;
    double observed = 0.0;
    double limit = 0.0;
};

struct VerifyReport {
    std::string suite;
    std::vector<CheckResult> checks;
    std::vector<std::pair<std::string, double>> extras;

    void add(const std::string& name, double observed, double limit) {
        checks.push_back({name, observed <= limit, observed, limit});
    }
    void add_exact(const std::string& name, bool passed, double observed, double limit) {
        checks.push_back({name, passed, observed, limit});
    }
    std::size_t n_passed() const {
        std::size_t n = 0;
        for (const auto& c : checks) n += c.passed;
        return n;
    }
    bool ok() const { return n_passed() == checks.size(); }
};

namespace detail {

template <typename F>
Matrix fd_grad(const Matrix& X0, F&& f, double h = 1e-5) {
    Matrix g(X0.rows, X0.cols);
    Matrix X = X0;
    for (std::size_t t = 0; t < X.a.size(); ++t) {
        double orig = X.a[t];
        X.a[t] = orig + h;
        double fp = f(X);
        X.a[t] = orig - h;
        double fm = f(X);
        X.a[t] = orig;
        g.a[t] = (fp - fm) / (2.0 * h);
    }
    return g;
}

inline double max_abs_diff(const Matrix& A, const Matrix& B) {
    double m = 0.0;
    for (std::size_t t = 0; t < A.a.size(); ++t)
        m = std::max(m, std::fabs(A.a[t] - B.a[t]));
    return m;
}

// Relative to the analytic gradient's largest entry magnitude, floored at
// 1e-8 so an all-zero gradient is still comparable.
inline double rel_grad_err(const Matrix& analytic, const Matrix& fd) {
    return max_abs_diff(analytic, fd) / std::max(max_abs(analytic), 1e-8);
}

inline bool near_l1_kink(const Matrix& Z, const LabeledBatch& batch,
                         const PrototypeSet& C, double margin) {
    for (std::size_t i = 0; i < Z.rows; ++i) {
        if (!batch.mask[i]) continue;
        const double* c = C.row(static_cast<std::size_t>(batch.labels[i]));
        for (std::size_t j = 0; j < Z.cols; ++j)
            if (std::fabs(Z.row(i)[j] - c[j]) < margin) return true;
    }
    return false;
}

inline bool tiny_row(const Matrix& X, double floor_norm) {
    for (std::size_t i = 0; i < X.rows; ++i)
        if (row_norm(X, i) < floor_norm) return true;
    return false;
}

} // namespace detail

// 100 random instances; each analytic raw-space gradient must match central
// finite differences at h=1e-5 with relative error at most 1e-5. Cycles
// through InfoNCE, the merged-pair loss, and the full objective under all
// three similarity kinds.
inline VerifyReport run_gradients_suite(std::uint64_t seed = 7) {
    constexpr double kTol = 1e-5;
    const double taus[3] = {0.05, 0.1, 0.5};
    VerifyReport rep;
    rep.suite = "gradients";
    for (std::size_t i = 0; i < 100; ++i) {
        Rng rng(derive_seed(seed, 100 + i));
        std::size_t n = 4 + 2 * rng.integer(7);  // even, 4..16
        std::size_t m = 3 + rng.integer(6);      // 3..8
        double tau = taus[rng.integer(3)];
        std::size_t kind = i % 5;

        std::size_t k = 3;
        PrototypeSet C = prototypes::generate_orthonormal(k, m, derive_seed(seed, 500 + i));
        LabeledBatch batch;
        batch.labels.resize(n);
        batch.mask.resize(n);
        for (std::size_t p = 0; p < n; ++p) {
            batch.labels[p] = static_cast<int>(p % k);
            batch.mask[p] = p % 2 == 0;
        }

        Matrix X;
        for (int attempt = 0; attempt < 64; ++attempt) {
            X = rng.gaussian_matrix(n, m);
            if (detail::tiny_row(X, 0.3)) continue;
            if (kind == 4) {
                UnitEmbeddingSet Z = core::normalize(RawEmbeddingSet{X});
                if (detail::near_l1_kink(Z.data, batch, C, 1e-4)) continue;
            }
            break;
        }

        PairMap pairs = PairMap::adjacent(n);
        double observed = 0.0;
        std::string name;
        if (kind == 0) {
            name = "fd_infonce_";
            Matrix G = losses::infonce_grad_raw(RawEmbeddingSet{X}, pairs, tau);
            Matrix F = detail::fd_grad(X, [&](const Matrix& Y) {
                return losses::infonce_value(core::normalize(RawEmbeddingSet{Y}), pairs, tau);
            });
            observed = detail::rel_grad_err(G, F);
        } else if (kind == 1) {
            name = "fd_repulsive_";
            Matrix G = losses::repulsive_grad_raw(RawEmbeddingSet{X}, tau);
            Matrix F = detail::fd_grad(X, [&](const Matrix& Y) {
                return losses::repulsive_value(core::normalize(RawEmbeddingSet{Y}), tau);
            });
            observed = detail::rel_grad_err(G, F);
        } else {
            SimilarityKind sim = kind == 2   ? SimilarityKind::cosine
                                 : kind == 3 ? SimilarityKind::neg_sq_euclidean
                                             : SimilarityKind::neg_l1;
            name = "fd_full_" + losses::to_string(sim) + "_";
            const double lambda = 0.7;
            auto rpt = losses::clop_total(RawEmbeddingSet{X}, pairs, batch, C, tau, lambda, sim);
            Matrix F = detail::fd_grad(X, [&](const Matrix& Y) {
                return losses::clop_total(RawEmbeddingSet{Y}, pairs, batch, C, tau, lambda, sim)
                    .value;
            });
            observed = detail::rel_grad_err(rpt.grad_raw, F);
        }
        char idx[8];
        std::snprintf(idx, sizeof idx, "%03zu", i);
        rep.add(name + idx, observed, kTol);
    }
    return rep;
}

// Signed-collinear clouds must sit at exact stationary points of the merged
// loss (pullback gradient below 1e-10); generic clouds must not.
inline VerifyReport run_stationarity_suite(std::uint64_t seed = 7) {
    const double taus[3] = {0.05, 0.1, 0.5};
    VerifyReport rep;
    rep.suite = "stationarity";
    for (std::size_t i = 0; i < 100; ++i) {
        Rng rng(derive_seed(seed, 300 + i));
        std::size_t n = 3 + rng.integer(18);
        std::size_t m = 2 + rng.integer(15);
        double tau = taus[rng.integer(3)];
        Vec u(m);
        for (std::size_t j = 0; j < m; ++j) u[j] = rng.gaussian();
        double nu = norm2(u.data(), m);
        for (std::size_t j = 0; j < m; ++j) u[j] /= nu;
        // Rotate through the stationary families: all-equal rows, signed
        // collinear rows, and signed collinear with random norms in [0.5, 2].
        Matrix X(n, m);
        double shared = rng.uniform(0.5, 2.0);
        for (std::size_t p = 0; p < n; ++p) {
            double r = i % 3 == 2 ? rng.uniform(0.5, 2.0) : shared;
            if (i % 3 != 0 && rng.integer(2) == 0) r = -r;
            for (std::size_t j = 0; j < m; ++j) X(p, j) = r * u[j];
        }
        auto [stat, residual] =
            diagnostics::stationarity_check(RawEmbeddingSet{X}, PairMap::merged(), tau, 1e-10);
        char idx[8];
        std::snprintf(idx, sizeof idx, "%03zu", i);
        rep.add(std::string("collinear_") + idx, residual, 1e-10);
        (void)stat;
    }
    for (std::size_t i = 0; i < 50; ++i) {
        Rng rng(derive_seed(seed, 400 + i));
        std::size_t n = 8 + rng.integer(13);
        std::size_t m = 2 + rng.integer(7);
        double tau = 0.2 + 0.2 * static_cast<double>(rng.integer(3));
        Matrix X = rng.uniform01_matrix(n, m);
        auto [stat, residual] =
            diagnostics::stationarity_check(RawEmbeddingSet{X}, PairMap::merged(), tau, 1e-10);
        char idx[8];
        std::snprintf(idx, sizeof idx, "%03zu", i);
        rep.add_exact(std::string("generic_moves_") + idx, residual > 1e-6, residual, 1e-6);
        (void)stat;
    }
    return rep;
}

// Closed-form right-hand sides for three fixed micro-configurations, the
// exact-zero point at lr = tau/2, and a 1000-configuration survey whose
// satisfaction rate and worst P-matrix asymmetry are reported, not asserted.
inline VerifyReport run_bound_suite(std::uint64_t seed = 7) {
    VerifyReport rep;
    rep.suite = "bound";

    {
        Matrix X(2, 2);
        X(0, 0) = 1.0;
        X(1, 1) = 1.0;
        auto r = diagnostics::mean_shift_bound_check(RawEmbeddingSet{X}, 1.0, 0.1);
        rep.add("pinned_rhs_a", std::fabs(r.rhs - 0.5656854249492381), 1e-12);
        auto z = diagnostics::mean_shift_bound_check(RawEmbeddingSet{X}, 1.0, 0.5);
        rep.add_exact("rhs_zero_at_half_tau", z.rhs == 0.0, z.rhs, 0.0);
    }
    {
        Matrix X(3, 3);
        X(0, 0) = 1.0;
        X(1, 1) = 1.0;
        X(2, 2) = 1.0;
        auto r = diagnostics::mean_shift_bound_check(RawEmbeddingSet{X}, 0.5, 0.05);
        rep.add("pinned_rhs_b", std::fabs(r.rhs - 0.6158402871356009), 1e-12);
    }
    {
        Matrix X(2, 3);
        X(0, 0) = 1.0;
        X(0, 1) = 1.0;
        X(1, 0) = 1.0;
        X(1, 2) = 1.0;
        auto r = diagnostics::mean_shift_bound_check(RawEmbeddingSet{X}, 0.2, 0.04);
        rep.add("pinned_rhs_c", std::fabs(r.rhs - 0.25980762113533157), 1e-12);
    }

    std::size_t satisfied = 0;
    double max_asym = 0.0;
    const double taus[5] = {0.05, 0.1, 0.2, 0.5, 1.0};
    const std::size_t kSurvey = 1000;
    for (std::size_t i = 0; i < kSurvey; ++i) {
        Rng rng(derive_seed(seed, 600 + i));
        std::size_t n = 2 + rng.integer(11);
        std::size_t m = 2 + rng.integer(7);
        double tau = taus[rng.integer(5)];
        double lr = rng.uniform(0.0, tau);
        Matrix X = rng.gaussian_matrix(n, m);
        auto r = diagnostics::mean_shift_bound_check(RawEmbeddingSet{X}, tau, lr);
        satisfied += r.satisfied;
        max_asym = std::max(max_asym, r.max_p_asymmetry);
    }
    rep.extras.emplace_back("satisfaction_rate",
                            static_cast<double>(satisfied) / static_cast<double>(kSurvey));
    rep.extras.emplace_back("max_p_asymmetry", max_asym);
    rep.extras.emplace_back("surveyed", static_cast<double>(kSurvey));
    return rep;
}

// Gram-matrix geometry of every prototype mode plus bit-exact regeneration.
inline VerifyReport run_prototypes_suite(std::uint64_t seed = 7) {
    VerifyReport rep;
    rep.suite = "prototypes";
    {
        PrototypeSet P = prototypes::generate_orthonormal(100, 128, derive_seed(seed, 800));
        Matrix G = prototypes::gram(P);
        double dev = 0.0;
        for (std::size_t i = 0; i < G.rows; ++i)
            for (std::size_t j = 0; j < G.cols; ++j)
                dev = std::max(dev, std::fabs(G(i, j) - (i == j ? 1.0 : 0.0)));
        rep.add("orthonormal_k100_m128", dev, 1e-9);
    }
    for (std::size_t k : {std::size_t{2}, std::size_t{3}, std::size_t{10}}) {
        PrototypeSet P = prototypes::generate_etf(k, 16);
        Matrix G = prototypes::gram(P);
        double target = -1.0 / static_cast<double>(k - 1);
        double dev = 0.0;
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j)
                dev = std::max(dev, std::fabs(G(i, j) - (i == j ? 1.0 : target)));
        rep.add("etf_k" + std::to_string(k), dev, 1e-9);
    }
    {
        PrototypeSet first = prototypes::generate_orthonormal(10, 16, derive_seed(seed, 801));
        bool all_same = true;
        for (int t = 0; t < 19; ++t) {
            PrototypeSet again = prototypes::generate_orthonormal(10, 16, derive_seed(seed, 801));
            if (!(again.vectors == first.vectors)) all_same = false;
        }
        rep.add_exact("regeneration_20x_bitwise", all_same, all_same ? 0.0 : 1.0, 0.0);
    }
    return rep;
}

inline VerifyReport run_suite(const std::string& name, std::uint64_t seed = 7) {
    if (name == "gradients") return run_gradients_suite(seed);
    if (name == "stationarity") return run_stationarity_suite(seed);
    if (name == "bound") return run_bound_suite(seed);
    if (name == "prototypes") return run_prototypes_suite(seed);
    throw UsageError("unknown verify suite: " + name +
                     " (expected gradients|stationarity|bound|prototypes)");
}

} // namespace clop::verify
