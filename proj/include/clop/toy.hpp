#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "clop/diagnostics.hpp"
#include "clop/embedding.hpp"
#include "clop/errors.hpp"
#include "clop/losses.hpp"
#include "clop/matrix.hpp"
#include "clop/prototypes.hpp"
#include "clop/rng.hpp"

namespace clop::toy {

using core::PairMap;
using core::RawEmbeddingSet;
using core::UnitEmbeddingSet;
using losses::LabeledBatch;
using prototypes::PrototypeSet;
using prototypes::ProtoMode;

// Balanced Gaussian mixture with a 3:1 train/test split per class.
struct SyntheticDataset {
    Matrix train_x, test_x;
    std::vector<int> train_y, test_y;
    std::size_t k = 0;
    std::size_t d_in = 0;
    std::size_t per_class = 0;
    double spread = 0.0;
    double within_std = 0.0;
    std::uint64_t seed = 0;
};

inline SyntheticDataset gen_mixture(std::size_t k, std::size_t d_in,
                                    std::size_t per_class, double spread,
                                    double within_std, std::uint64_t seed) {
    if (k < 2) throw UsageError("gen_mixture needs k >= 2");
    if (per_class < 4) throw UsageError("gen_mixture needs per_class >= 4");
    Rng rng(derive_seed(seed, 10));
    Matrix means = rng.gaussian_matrix(k, d_in, spread);
    std::size_t n_train_per = per_class * 3 / 4;
    std::size_t n_test_per = per_class - n_train_per;
    SyntheticDataset d;
    d.k = k;
    d.d_in = d_in;
    d.per_class = per_class;
    d.spread = spread;
    d.within_std = within_std;
    d.seed = seed;
    d.train_x = Matrix(k * n_train_per, d_in);
    d.test_x = Matrix(k * n_test_per, d_in);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t p = 0; p < per_class; ++p) {
            bool is_train = p < n_train_per;
            std::size_t row = is_train ? c * n_train_per + (p)
                                       : c * n_test_per + (p - n_train_per);
            double* dst = is_train ? d.train_x.row(row) : d.test_x.row(row);
            const double* mu = means.row(c);
            for (std::size_t j = 0; j < d_in; ++j)
                dst[j] = mu[j] + rng.gaussian(within_std);
        }
        for (std::size_t p = 0; p < n_train_per; ++p) d.train_y.push_back(static_cast<int>(c));
        for (std::size_t p = 0; p < n_test_per; ++p) d.test_y.push_back(static_cast<int>(c));
    }
    return d;
}

inline Vec augment(const double* x, std::size_t d, double jitter_std, Rng& stream) {
    Vec out(d);
    for (std::size_t j = 0; j < d; ++j) out[j] = x[j] + stream.gaussian(jitter_std);
    return out;
}

enum class Nonlinearity { none, tanh };

inline std::string to_string(Nonlinearity n) {
    return n == Nonlinearity::none ? "none" : "tanh";
}

inline Nonlinearity nonlinearity_from_string(const std::string& s) {
    if (s == "none") return Nonlinearity::none;
    if (s == "tanh") return Nonlinearity::tanh;
    throw UsageError("unknown nonlinearity: " + s);
}

// Single affine map, optional tanh, output row-normalized. Small enough that
// every gradient stays hand-checkable against finite differences.
struct Encoder {
    Matrix weights;  // m' x d_in
    Vec bias;        // m'
    Nonlinearity nonlinearity = Nonlinearity::none;
};

struct EncodeResult {
    Matrix activations;  // pre-normalization rows (the raw embeddings)
    Matrix z;            // unit rows
};

inline Matrix forward_activations(const Encoder& enc, const Matrix& U) {
    const std::size_t n = U.rows, m = enc.weights.rows, d = U.cols;
    Matrix A(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        const double* u = U.row(i);
        double* a = A.row(i);
        for (std::size_t r = 0; r < m; ++r) {
            double h = enc.bias[r] + dot(enc.weights.row(r), u, d);
            a[r] = enc.nonlinearity == Nonlinearity::tanh ? std::tanh(h) : h;
        }
    }
    return A;
}

inline EncodeResult encode(const Encoder& enc, const Matrix& U) {
    EncodeResult r;
    r.activations = forward_activations(enc, U);
    r.z = core::normalize(RawEmbeddingSet{r.activations}).data;
    return r;
}

struct ParamGrads {
    Matrix d_weights;
    Vec d_bias;
};

// Parameter gradients given dL/dA, the gradient with respect to the raw
// (pre-normalization) encoder output. tanh' is reconstructed from A itself.
inline ParamGrads encode_backward(const Encoder& enc, const Matrix& U,
                                  const Matrix& grad_raw) {
    const std::size_t n = U.rows, m = enc.weights.rows, d = U.cols;
    Matrix GA = grad_raw;
    if (enc.nonlinearity == Nonlinearity::tanh) {
        Matrix A = forward_activations(enc, U);
        for (std::size_t t = 0; t < GA.a.size(); ++t) GA.a[t] *= 1.0 - A.a[t] * A.a[t];
    }
    ParamGrads g;
    g.d_weights = Matrix(m, d);
    g.d_bias = Vec(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* ga = GA.row(i);
        const double* u = U.row(i);
        for (std::size_t r = 0; r < m; ++r) {
            double w = ga[r];
            if (w == 0.0) continue;
            g.d_bias[r] += w;
            double* wr = g.d_weights.row(r);
            for (std::size_t j = 0; j < d; ++j) wr[j] += w * u[j];
        }
    }
    return g;
}

// Nearest prototype by inner product; ties break toward the lowest class.
inline double evaluate_nearest_prototype(const Matrix& Z, const std::vector<int>& labels,
                                         const PrototypeSet& C) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < Z.rows; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= C.k)
            throw LabelOutOfRange("label " + std::to_string(labels[i]) +
                                  " out of range at point " + std::to_string(i));
        std::size_t best = 0;
        double best_dot = dot(Z.row(i), C.row(0), Z.cols);
        for (std::size_t c = 1; c < C.k; ++c) {
            double s = dot(Z.row(i), C.row(c), Z.cols);
            if (s > best_dot) {
                best_dot = s;
                best = c;
            }
        }
        if (best == static_cast<std::size_t>(labels[i])) ++correct;
    }
    return Z.rows == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(Z.rows);
}

// Multinomial logistic regression on frozen embeddings, full-batch gradient
// descent from zero weights; deterministic, no RNG.
inline double linear_probe(const Matrix& Z_train, const std::vector<int>& y_train,
                           const Matrix& Z_test, const std::vector<int>& y_test,
                           std::size_t epochs = 300, double lr = 0.5) {
    std::size_t k = 1;
    for (int y : y_train) k = std::max<std::size_t>(k, static_cast<std::size_t>(y) + 1);
    for (int y : y_test) k = std::max<std::size_t>(k, static_cast<std::size_t>(y) + 1);
    const std::size_t n = Z_train.rows, m = Z_train.cols;
    Matrix V(k, m);
    Vec b(k, 0.0);
    Vec logits(k), probs(k);
    for (std::size_t e = 0; e < epochs; ++e) {
        Matrix GV(k, m);
        Vec gb(k, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* z = Z_train.row(i);
            double mx = -1e300;
            for (std::size_t c = 0; c < k; ++c) {
                logits[c] = b[c] + dot(V.row(c), z, m);
                mx = std::max(mx, logits[c]);
            }
            double den = 0.0;
            for (std::size_t c = 0; c < k; ++c) den += probs[c] = std::exp(logits[c] - mx);
            for (std::size_t c = 0; c < k; ++c) {
                double g = probs[c] / den - (static_cast<std::size_t>(y_train[i]) == c ? 1.0 : 0.0);
                g /= static_cast<double>(n);
                gb[c] += g;
                double* gv = GV.row(c);
                for (std::size_t j = 0; j < m; ++j) gv[j] += g * z[j];
            }
        }
        for (std::size_t t = 0; t < V.a.size(); ++t) V.a[t] -= lr * GV.a[t];
        for (std::size_t c = 0; c < k; ++c) b[c] -= lr * gb[c];
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < Z_test.rows; ++i) {
        const double* z = Z_test.row(i);
        std::size_t best = 0;
        double best_v = b[0] + dot(V.row(0), z, m);
        for (std::size_t c = 1; c < k; ++c) {
            double v = b[c] + dot(V.row(c), z, m);
            if (v > best_v) {
                best_v = v;
                best = c;
            }
        }
        if (best == static_cast<std::size_t>(y_test[i])) ++correct;
    }
    return Z_test.rows == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(Z_test.rows);
}

enum class LossKind { infonce, clop };

inline std::string to_string(LossKind k) {
    return k == LossKind::infonce ? "infonce" : "clop";
}

inline LossKind loss_kind_from_string(const std::string& s) {
    if (s == "infonce") return LossKind::infonce;
    if (s == "clop") return LossKind::clop;
    throw UsageError("unknown loss: " + s);
}

struct TrainConfig {
    LossKind loss = LossKind::clop;
    double label_fraction = 0.1;
    double lambda = 1.0;
    double tau = 0.1;
    double lr = 0.05;
    std::size_t batch = 64;
    std::size_t epochs = 200;
    double jitter_std = 0.1;
    std::uint64_t seed = 42;
    ProtoMode proto_mode = ProtoMode::orthonormal;
    Nonlinearity nonlinearity = Nonlinearity::none;
    std::size_t m_prime = 16;
    std::size_t metrics_every = 1;  // heavy metrics cadence; loss is always per-epoch

    void validate() const {
        if (label_fraction < 0.0 || label_fraction > 1.0)
            throw UsageError("label_fraction must be in [0,1]");
        if (lambda < 0.0) throw UsageError("lambda must be >= 0");
        if (tau <= 0.0) throw UsageError("tau must be > 0");
        if (lr <= 0.0) throw UsageError("lr must be > 0");
        if (batch < 2) throw UsageError("batch must be >= 2");
        if (epochs < 1) throw UsageError("epochs must be >= 1");
        if (jitter_std < 0.0) throw UsageError("jitter_std must be >= 0");
        if (m_prime < 2) throw UsageError("m_prime must be >= 2");
        if (metrics_every < 1) throw UsageError("metrics_every must be >= 1");
    }
};

struct MetricsRow {
    std::size_t epoch = 0;  // 0 is the pre-training evaluation
    double loss = 0.0;
    std::size_t eff_rank = 0;
    double np_acc = 0.0;
    double probe_acc = 0.0;
    double mean_proto_cos = 0.0;
};

struct TrainReport {
    std::vector<MetricsRow> rows;
    std::size_t labeled_count = 0;
    PrototypeSet protos;

    const MetricsRow& final_row() const { return rows.back(); }
};

namespace detail {

// Stratified labeled subset: floor(frac * n) points spread as evenly as the
// class counts allow, chosen per class from a seeded permutation. Coverage of
// every class is mandatory only when the prototype pull is active.
inline std::vector<char> pick_labeled(const std::vector<int>& y, std::size_t k,
                                      double fraction, Rng& stream, bool require_coverage) {
    const std::size_t n = y.size();
    std::size_t want = static_cast<std::size_t>(fraction * static_cast<double>(n));
    if (require_coverage && want < k)
        throw InsufficientLabels("label_fraction covers " + std::to_string(want) +
                                 " points; need at least one per class (k=" +
                                 std::to_string(k) + ")");
    std::vector<std::vector<std::size_t>> per_class(k);
    for (std::size_t i = 0; i < n; ++i) per_class[static_cast<std::size_t>(y[i])].push_back(i);
    std::vector<char> mask(n, 0);
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t quota = want / k + (c < want % k ? 1 : 0);
        if (quota > per_class[c].size())
            throw InsufficientLabels("class " + std::to_string(c) + " has only " +
                                     std::to_string(per_class[c].size()) +
                                     " training points for a quota of " +
                                     std::to_string(quota));
        auto perm = stream.permutation(per_class[c].size());
        for (std::size_t t = 0; t < quota; ++t) mask[per_class[c][perm[t]]] = 1;
    }
    return mask;
}

struct EvalContext {
    const SyntheticDataset& data;
    const Encoder& enc;
    const PrototypeSet& protos;
    const std::vector<char>& train_mask;
};

inline MetricsRow eval_metrics(const EvalContext& ctx, std::size_t epoch, double loss) {
    MetricsRow row;
    row.epoch = epoch;
    row.loss = loss;
    EncodeResult test = encode(ctx.enc, ctx.data.test_x);
    EncodeResult train = encode(ctx.enc, ctx.data.train_x);
    row.eff_rank = diagnostics::effective_rank_of(test.z);
    row.np_acc = evaluate_nearest_prototype(test.z, ctx.data.test_y, ctx.protos);
    row.probe_acc = linear_probe(train.z, ctx.data.train_y, test.z, ctx.data.test_y);
    double cos_sum = 0.0;
    std::size_t cos_n = 0;
    for (std::size_t i = 0; i < train.z.rows; ++i) {
        if (!ctx.train_mask[i]) continue;
        cos_sum += dot(train.z.row(i), ctx.protos.row(ctx.data.train_y[i]), train.z.cols);
        ++cos_n;
    }
    row.mean_proto_cos = cos_n == 0 ? 0.0 : cos_sum / static_cast<double>(cos_n);
    return row;
}

// Pre-training loss for the epoch-0 row: the objective over the whole train
// set with each point duplicated as its own positive pair (no augmentation).
inline double initial_loss(const SyntheticDataset& data, const Encoder& enc,
                           const PrototypeSet& protos, const std::vector<char>& mask,
                           const TrainConfig& cfg) {
    const std::size_t n = data.train_x.rows;
    Matrix U(2 * n, data.d_in);
    LabeledBatch batch;
    batch.labels.resize(2 * n);
    batch.mask.resize(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int v = 0; v < 2; ++v) {
            std::copy(data.train_x.row(i), data.train_x.row(i) + data.d_in,
                      U.row(2 * i + v));
            batch.labels[2 * i + v] = data.train_y[i];
            batch.mask[2 * i + v] = mask[i];
        }
    }
    EncodeResult er = encode(enc, U);
    UnitEmbeddingSet Z{er.z};
    double value = losses::infonce_value(Z, PairMap::adjacent(2 * n), cfg.tau);
    if (cfg.loss == LossKind::clop && cfg.lambda != 0.0)
        value += cfg.lambda * losses::clop_penalty(Z.data, batch, protos,
                                                   losses::SimilarityKind::cosine);
    return value;
}

} // namespace detail

// Mini-batch gradient descent on the encoder. Each batch takes two jittered
// views per sampled point; the parameter step uses the mean over views of the
// per-view gradient, which keeps the pinned learning rates stable for raw
// inputs of any magnitude. With lambda=0 the CLOP path consumes randomness
// identically to InfoNCE, so the two trajectories match bit for bit.
inline std::pair<Encoder, TrainReport> train(const SyntheticDataset& data,
                                             const TrainConfig& cfg) {
    cfg.validate();
    const std::size_t n = data.train_x.rows, d = data.d_in, m = cfg.m_prime;
    if (cfg.batch > n) throw UsageError("batch larger than the training set");

    Rng label_stream(derive_seed(cfg.seed, 21));
    Rng batch_stream(derive_seed(cfg.seed, 22));
    Rng augment_stream(derive_seed(cfg.seed, 23));
    Rng weight_stream(derive_seed(cfg.seed, 25));

    std::vector<char> labeled =
        detail::pick_labeled(data.train_y, data.k, cfg.label_fraction, label_stream,
                             cfg.loss == LossKind::clop);
    PrototypeSet protos = prototypes::generate(cfg.proto_mode, data.k, m,
                                               derive_seed(cfg.seed, 24));

    Encoder enc;
    enc.nonlinearity = cfg.nonlinearity;
    enc.weights = weight_stream.gaussian_matrix(m, d, 1.0 / std::sqrt(static_cast<double>(d)));
    enc.bias = Vec(m, 0.0);

    TrainReport report;
    report.labeled_count = 0;
    for (char c : labeled) report.labeled_count += c;

    detail::EvalContext ctx{data, enc, protos, labeled};
    report.rows.push_back(detail::eval_metrics(
        ctx, 0, detail::initial_loss(data, enc, protos, labeled, cfg)));

    const std::size_t nb = n / cfg.batch;
    const std::size_t n_views = 2 * cfg.batch;
    const PairMap pairs = PairMap::adjacent(n_views);
    const bool use_penalty = cfg.loss == LossKind::clop && cfg.lambda != 0.0;

    Matrix U(n_views, d);
    LabeledBatch vb;
    vb.labels.resize(n_views);
    vb.mask.resize(n_views);

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        auto perm = batch_stream.permutation(n);
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
            for (std::size_t t = 0; t < cfg.batch; ++t) {
                std::size_t idx = perm[b * cfg.batch + t];
                const double* x = data.train_x.row(idx);
                for (int v = 0; v < 2; ++v) {
                    std::size_t r = 2 * t + static_cast<std::size_t>(v);
                    Vec view = augment(x, d, cfg.jitter_std, augment_stream);
                    std::copy(view.begin(), view.end(), U.row(r));
                    vb.labels[r] = data.train_y[idx];
                    vb.mask[r] = labeled[idx];
                }
            }
            EncodeResult er = encode(enc, U);
            UnitEmbeddingSet Z{std::move(er.z)};
            auto [value, Gz] = losses::infonce_value_grad_z(Z, pairs, cfg.tau);
            if (use_penalty) {
                auto [pen, Gp] = losses::clop_penalty_grad(Z.data, vb, protos,
                                                           losses::SimilarityKind::cosine);
                value += cfg.lambda * pen;
                for (std::size_t t = 0; t < Gz.a.size(); ++t)
                    Gz.a[t] += cfg.lambda * Gp.a[t];
            }
            loss_sum += value;
            Matrix Ga = core::pullback_rows(er.activations, Gz);
            if (enc.nonlinearity == Nonlinearity::tanh)
                for (std::size_t t = 0; t < Ga.a.size(); ++t)
                    Ga.a[t] *= 1.0 - er.activations.a[t] * er.activations.a[t];
            double scale = cfg.lr / static_cast<double>(n_views);
            for (std::size_t i = 0; i < n_views; ++i) {
                const double* ga = Ga.row(i);
                const double* u = U.row(i);
                for (std::size_t r = 0; r < m; ++r) {
                    double w = scale * ga[r];
                    if (w == 0.0) continue;
                    enc.bias[r] -= w;
                    double* wr = enc.weights.row(r);
                    for (std::size_t j = 0; j < d; ++j) wr[j] -= w * u[j];
                }
            }
        }
        if (epoch % cfg.metrics_every == 0 || epoch == cfg.epochs) {
            report.rows.push_back(detail::eval_metrics(
                ctx, epoch, loss_sum / static_cast<double>(nb)));
        }
    }
    report.protos = std::move(protos);
    return {std::move(enc), std::move(report)};
}

} // namespace clop::toy
