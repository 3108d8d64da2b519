#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "clop/diagnostics.hpp"
#include "clop/embedding.hpp"
#include "clop/errors.hpp"
#include "clop/losses.hpp"
#include "clop/prototypes.hpp"
#include "clop/rng.hpp"

namespace clop::dynamics {

using core::PairMap;
using core::PairMode;
using core::RawEmbeddingSet;
using core::UnitEmbeddingSet;

enum class LossKind { infonce, repulsive, clop };

inline std::string to_string(LossKind k) {
    switch (k) {
        case LossKind::infonce: return "infonce";
        case LossKind::repulsive: return "repulsive";
        default: return "clop";
    }
}

inline LossKind loss_kind_from_string(const std::string& s) {
    if (s == "infonce") return LossKind::infonce;
    if (s == "repulsive") return LossKind::repulsive;
    if (s == "clop") return LossKind::clop;
    throw UsageError("unknown loss: " + s);
}

// Where the descent step lives. z_renormalize steps on the unit embeddings
// and re-projects; raw_pullback steps on raw x with the normalization
// pullback. Pullback steps are tangential, so raw norms only ever grow and
// the dynamics self-anneal; the z mode is the one that can actually collapse.
enum class UpdateSpace { z_renormalize, raw_pullback };

inline std::string to_string(UpdateSpace u) {
    return u == UpdateSpace::z_renormalize ? "z_renormalize" : "raw_pullback";
}

inline UpdateSpace update_space_from_string(const std::string& s) {
    if (s == "z_renormalize") return UpdateSpace::z_renormalize;
    if (s == "raw_pullback") return UpdateSpace::raw_pullback;
    throw UsageError("unknown update space: " + s);
}

// uniform01 draws entries in [0,1): a positively correlated cloud (pairwise
// cosines ~0.75) whose repulsive forces are alive at tau ~ 0.1. Isotropic
// gaussian entries leave every pairwise similarity near 0 and the merged-pair
// weights at exp(-1/tau); nothing moves.
enum class InitKind { uniform01, gaussian };

inline std::string to_string(InitKind i) {
    return i == InitKind::uniform01 ? "uniform01" : "gaussian";
}

inline InitKind init_kind_from_string(const std::string& s) {
    if (s == "uniform01") return InitKind::uniform01;
    if (s == "gaussian") return InitKind::gaussian;
    throw UsageError("unknown init kind: " + s);
}

struct SimulationConfig {
    std::size_t n_points = 50;
    std::size_t dim = 50;
    double tau = 0.1;
    double lr = 0.01;
    std::size_t steps = 1000;
    std::uint64_t seed = 42;
    PairMode pair_mode = PairMode::merged;
    LossKind loss = LossKind::repulsive;
    std::size_t record_every = 10;
    UpdateSpace update = UpdateSpace::z_renormalize;
    InitKind init = InitKind::uniform01;
    double init_scale = 1.0;
    // CLOP-only knobs.
    double lambda = 1.0;
    prototypes::ProtoMode proto_mode = prototypes::ProtoMode::orthonormal;
    double label_fraction = 0.1;
    std::size_t n_classes = 10;

    void validate() const {
        if (n_points < 1 || dim < 1) throw UsageError("n and dim must be >= 1");
        if (tau <= 0.0) throw UsageError("tau must be > 0");
        if (lr <= 0.0) throw UsageError("lr must be > 0");
        if (record_every < 1) throw UsageError("record_every must be >= 1");
        if (loss == LossKind::repulsive) {
            if (pair_mode != PairMode::merged)
                throw UsageError("repulsive loss uses merged pair mode");
        } else {
            if (pair_mode != PairMode::paired)
                throw UsageError(to_string(loss) + " loss needs paired mode");
            if (n_points % 2 != 0)
                throw UsageError("paired mode needs an even n (got " +
                                 std::to_string(n_points) + ")");
        }
        if (loss == LossKind::clop) {
            if (lambda < 0.0) throw UsageError("lambda must be >= 0");
            if (label_fraction < 0.0 || label_fraction > 1.0)
                throw UsageError("label_fraction must be in [0,1]");
            if (n_classes < 1) throw UsageError("classes must be >= 1");
            if (proto_mode == prototypes::ProtoMode::orthonormal && n_classes > dim)
                throw UsageError("classes must be <= dim for orthonormal prototypes");
            if (proto_mode == prototypes::ProtoMode::etf && n_classes > dim + 1)
                throw UsageError("classes must be <= dim+1 for etf prototypes");
        }
    }
};

struct TrajectoryRow {
    std::size_t step = 0;
    double loss = 0.0;
    double mean_norm = 0.0;
    double min_raw_norm = 0.0;
    double max_raw_norm = 0.0;
    std::size_t effective_rank = 0;
};

struct TrajectoryRecord {
    std::vector<TrajectoryRow> rows;
    std::vector<std::pair<std::size_t, Vec>> spectra;       // per recorded step
    std::vector<std::pair<std::size_t, Matrix>> pca;        // N x 2 snapshots
    Matrix final_raw;                                       // state after the last step

    const TrajectoryRow& final_row() const { return rows.back(); }
};

// Plain descent step; pure.
inline RawEmbeddingSet step(const RawEmbeddingSet& X, const Matrix& grad, double lr) {
    RawEmbeddingSet out{X.data};
    for (std::size_t t = 0; t < out.data.a.size(); ++t) out.data.a[t] -= lr * grad.a[t];
    return out;
}

namespace detail {

struct SimProblem {
    PairMap pairs;
    losses::LabeledBatch batch;
    prototypes::PrototypeSet protos;
    bool has_clop = false;
};

inline SimProblem make_problem(const SimulationConfig& cfg) {
    SimProblem p;
    p.pairs = cfg.pair_mode == PairMode::paired ? PairMap::adjacent(cfg.n_points)
                                                : PairMap::merged();
    if (cfg.loss == LossKind::clop) {
        p.has_clop = true;
        p.protos = prototypes::generate(cfg.proto_mode, cfg.n_classes, cfg.dim,
                                        derive_seed(cfg.seed, 2));
        p.batch.labels.resize(cfg.n_points);
        p.batch.mask.assign(cfg.n_points, 0);
        for (std::size_t i = 0; i < cfg.n_points; ++i)
            p.batch.labels[i] = static_cast<int>(i % cfg.n_classes);
        std::size_t want = static_cast<std::size_t>(cfg.label_fraction *
                                                    static_cast<double>(cfg.n_points));
        Rng rng(derive_seed(cfg.seed, 3));
        auto perm = rng.permutation(cfg.n_points);
        for (std::size_t i = 0; i < want && i < perm.size(); ++i) p.batch.mask[perm[i]] = 1;
    }
    return p;
}

// Loss value and z-space gradient for the configured objective.
inline std::pair<double, Matrix> value_grad_z(const SimulationConfig& cfg,
                                              const SimProblem& p,
                                              const UnitEmbeddingSet& Z) {
    if (cfg.loss == LossKind::repulsive) return losses::repulsive_value_grad_z(Z, cfg.tau);
    auto [v, G] = losses::infonce_value_grad_z(Z, p.pairs, cfg.tau);
    if (p.has_clop && cfg.lambda != 0.0) {
        auto [pen, Gp] = losses::clop_penalty_grad(Z.data, p.batch, p.protos,
                                                   losses::SimilarityKind::cosine);
        v += cfg.lambda * pen;
        for (std::size_t t = 0; t < G.a.size(); ++t) G.a[t] += cfg.lambda * Gp.a[t];
    }
    return {v, std::move(G)};
}

} // namespace detail

// Runs the descent from an explicit initial raw state. cfg.n_points and
// cfg.dim must match the matrix shape.
inline TrajectoryRecord run_simulation_from(const SimulationConfig& cfg, Matrix X) {
    cfg.validate();
    if (X.rows != cfg.n_points || X.cols != cfg.dim)
        throw UsageError("initial state shape does not match the config");
    detail::SimProblem prob = detail::make_problem(cfg);

    // Raw norms as seen by the records; in z mode they reflect the pre-
    // renormalization step output (1.0 at the start by construction).
    double pre_min = 0.0, pre_max = 0.0;
    auto measure_norms = [&](const Matrix& M) {
        pre_min = row_norm(M, 0);
        pre_max = pre_min;
        for (std::size_t i = 1; i < M.rows; ++i) {
            double n = row_norm(M, i);
            pre_min = std::min(pre_min, n);
            pre_max = std::max(pre_max, n);
        }
    };

    if (cfg.update == UpdateSpace::z_renormalize) {
        measure_norms(X);
        X = core::normalize(core::RawEmbeddingSet{std::move(X)}).data;
    } else {
        measure_norms(X);
    }

    TrajectoryRecord rec;
    auto record = [&](std::size_t t) {
        UnitEmbeddingSet Z = core::normalize(RawEmbeddingSet{X});
        auto [value, G] = detail::value_grad_z(cfg, prob, Z);
        (void)G;
        TrajectoryRow row;
        row.step = t;
        row.loss = value;
        row.mean_norm = diagnostics::embedding_mean(Z).second;
        row.min_raw_norm = pre_min;
        row.max_raw_norm = pre_max;
        Vec spec = diagnostics::singular_spectrum(Z.data);
        row.effective_rank = diagnostics::effective_rank(spec);
        rec.rows.push_back(row);
        rec.spectra.emplace_back(t, std::move(spec));
        rec.pca.emplace_back(t, diagnostics::pca2(Z.data));
    };

    for (std::size_t t = 0;; ++t) {
        if (t == 0 || t % cfg.record_every == 0 || t == cfg.steps) record(t);
        if (t == cfg.steps) break;

        if (cfg.update == UpdateSpace::z_renormalize) {
            UnitEmbeddingSet Z{X};
            auto [value, Gz] = detail::value_grad_z(cfg, prob, Z);
            (void)value;
            for (std::size_t i = 0; i < X.a.size(); ++i) X.a[i] -= cfg.lr * Gz.a[i];
            measure_norms(X);
            if (pre_min < 1e-12)
                throw DivergedToZero("row norm below 1e-12 at step " + std::to_string(t));
            X = core::normalize(RawEmbeddingSet{std::move(X)}).data;
        } else {
            UnitEmbeddingSet Z = core::normalize(RawEmbeddingSet{X});
            auto [value, Gz] = detail::value_grad_z(cfg, prob, Z);
            (void)value;
            Matrix G = core::pullback_rows(X, Gz);
            for (std::size_t i = 0; i < X.a.size(); ++i) X.a[i] -= cfg.lr * G.a[i];
            measure_norms(X);
            if (pre_min < 1e-12)
                throw DivergedToZero("row norm below 1e-12 at step " + std::to_string(t));
        }
    }
    rec.final_raw = std::move(X);
    return rec;
}

inline TrajectoryRecord run_simulation(const SimulationConfig& cfg) {
    cfg.validate();
    Rng init_rng(derive_seed(cfg.seed, 1));
    Matrix X = cfg.init == InitKind::uniform01
                   ? init_rng.uniform01_matrix(cfg.n_points, cfg.dim)
                   : init_rng.gaussian_matrix(cfg.n_points, cfg.dim, cfg.init_scale);
    return run_simulation_from(cfg, std::move(X));
}

struct SweepOutcome {
    bool ok = false;
    std::string error;
    TrajectoryRecord record;
};

// Runs are independent; a failing config reports its error without aborting
// the siblings.
inline std::vector<SweepOutcome> sweep(const std::vector<SimulationConfig>& cfgs) {
    std::vector<SweepOutcome> out(cfgs.size());
    for (std::size_t i = 0; i < cfgs.size(); ++i) {
        try {
            out[i].record = run_simulation(cfgs[i]);
            out[i].ok = true;
        } catch (const std::exception& e) {
            out[i].ok = false;
            out[i].error = e.what();
        }
    }
    return out;
}

} // namespace clop::dynamics
