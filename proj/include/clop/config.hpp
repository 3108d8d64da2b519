#pragma once

#include <cstdint>
#include <cstdlib>
#include <string>

#include "json.hpp"

#include "clop/dynamics.hpp"
#include "clop/errors.hpp"
#include "clop/prototypes.hpp"
#include "clop/toy.hpp"

// JSON round-trip for job configurations. Parsing is strict: unknown keys and
// wrongly typed values are usage errors that name the offending field, and a
// full echo of the effective configuration serializes back to the same JSON.

namespace clop::config {

using nlohmann::json;

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> known,
                           const std::string& where) {
    if (!j.is_object()) throw UsageError(where + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) throw UsageError(where + ": unknown config key '" + it.key() + "'");
    }
}

template <typename T>
T field(const json& j, const char* name, T fallback) {
    if (!j.contains(name)) return fallback;
    try {
        return j.at(name).get<T>();
    } catch (const json::exception&) {
        throw UsageError(std::string("config field '") + name + "' has the wrong type");
    }
}

inline std::string field_str(const json& j, const char* name, const std::string& fallback) {
    return field<std::string>(j, name, fallback);
}

} // namespace detail

inline json simulation_to_json(const dynamics::SimulationConfig& c) {
    json j;
    j["n_points"] = c.n_points;
    j["dim"] = c.dim;
    j["tau"] = c.tau;
    j["lr"] = c.lr;
    j["steps"] = c.steps;
    j["seed"] = c.seed;
    j["pair_mode"] = core::to_string(c.pair_mode);
    j["loss"] = dynamics::to_string(c.loss);
    j["record_every"] = c.record_every;
    j["update"] = dynamics::to_string(c.update);
    j["init"] = dynamics::to_string(c.init);
    j["init_scale"] = c.init_scale;
    j["lambda"] = c.lambda;
    j["proto_mode"] = prototypes::to_string(c.proto_mode);
    j["label_fraction"] = c.label_fraction;
    j["n_classes"] = c.n_classes;
    return j;
}

inline dynamics::SimulationConfig simulation_from_json(const json& j) {
    detail::reject_unknown(j,
                           {"n_points", "dim", "tau", "lr", "steps", "seed", "pair_mode", "loss",
                            "record_every", "update", "init", "init_scale", "lambda", "proto_mode",
                            "label_fraction", "n_classes"},
                           "simulate config");
    dynamics::SimulationConfig c;
    c.n_points = detail::field<std::size_t>(j, "n_points", c.n_points);
    c.dim = detail::field<std::size_t>(j, "dim", c.dim);
    c.tau = detail::field<double>(j, "tau", c.tau);
    c.lr = detail::field<double>(j, "lr", c.lr);
    c.steps = detail::field<std::size_t>(j, "steps", c.steps);
    c.seed = detail::field<std::uint64_t>(j, "seed", c.seed);
    c.pair_mode = core::pair_mode_from_string(
        detail::field_str(j, "pair_mode", core::to_string(c.pair_mode)));
    c.loss =
        dynamics::loss_kind_from_string(detail::field_str(j, "loss", dynamics::to_string(c.loss)));
    c.record_every = detail::field<std::size_t>(j, "record_every", c.record_every);
    c.update = dynamics::update_space_from_string(
        detail::field_str(j, "update", dynamics::to_string(c.update)));
    c.init =
        dynamics::init_kind_from_string(detail::field_str(j, "init", dynamics::to_string(c.init)));
    c.init_scale = detail::field<double>(j, "init_scale", c.init_scale);
    c.lambda = detail::field<double>(j, "lambda", c.lambda);
    c.proto_mode = prototypes::proto_mode_from_string(
        detail::field_str(j, "proto_mode", prototypes::to_string(c.proto_mode)));
    c.label_fraction = detail::field<double>(j, "label_fraction", c.label_fraction);
    c.n_classes = detail::field<std::size_t>(j, "n_classes", c.n_classes);
    return c;
}

// Dataset parameters plus the trainer configuration, one seed for both.
struct ToyJob {
    std::size_t k = 8;
    std::size_t d_in = 32;
    std::size_t per_class = 64;
    double spread = 5.0;
    double within_std = 1.0;
    toy::TrainConfig train;
    bool jitter_given = false;  // when false, jitter_std follows within_std

    void resolve() {
        if (!jitter_given) train.jitter_std = 0.1 * within_std;
    }
};

inline json toy_to_json(const ToyJob& job) {
    json j;
    j["k"] = job.k;
    j["d_in"] = job.d_in;
    j["per_class"] = job.per_class;
    j["spread"] = job.spread;
    j["within_std"] = job.within_std;
    j["loss"] = toy::to_string(job.train.loss);
    j["label_fraction"] = job.train.label_fraction;
    j["lambda"] = job.train.lambda;
    j["tau"] = job.train.tau;
    j["lr"] = job.train.lr;
    j["batch"] = job.train.batch;
    j["epochs"] = job.train.epochs;
    j["jitter_std"] = job.train.jitter_std;
    j["seed"] = job.train.seed;
    j["proto_mode"] = prototypes::to_string(job.train.proto_mode);
    j["nonlinearity"] = toy::to_string(job.train.nonlinearity);
    j["m_prime"] = job.train.m_prime;
    j["metrics_every"] = job.train.metrics_every;
    return j;
}

inline ToyJob toy_from_json(const json& j) {
    detail::reject_unknown(j,
                           {"k", "d_in", "per_class", "spread", "within_std", "loss",
                            "label_fraction", "lambda", "tau", "lr", "batch", "epochs",
                            "jitter_std", "seed", "proto_mode", "nonlinearity", "m_prime",
                            "metrics_every"},
                           "train-toy config");
    ToyJob job;
    job.k = detail::field<std::size_t>(j, "k", job.k);
    job.d_in = detail::field<std::size_t>(j, "d_in", job.d_in);
    job.per_class = detail::field<std::size_t>(j, "per_class", job.per_class);
    job.spread = detail::field<double>(j, "spread", job.spread);
    job.within_std = detail::field<double>(j, "within_std", job.within_std);
    job.train.loss =
        toy::loss_kind_from_string(detail::field_str(j, "loss", toy::to_string(job.train.loss)));
    job.train.label_fraction =
        detail::field<double>(j, "label_fraction", job.train.label_fraction);
    job.train.lambda = detail::field<double>(j, "lambda", job.train.lambda);
    job.train.tau = detail::field<double>(j, "tau", job.train.tau);
    job.train.lr = detail::field<double>(j, "lr", job.train.lr);
    job.train.batch = detail::field<std::size_t>(j, "batch", job.train.batch);
    job.train.epochs = detail::field<std::size_t>(j, "epochs", job.train.epochs);
    job.jitter_given = j.contains("jitter_std");
    job.train.jitter_std = detail::field<double>(j, "jitter_std", job.train.jitter_std);
    job.train.seed = detail::field<std::uint64_t>(j, "seed", job.train.seed);
    job.train.proto_mode = prototypes::proto_mode_from_string(
        detail::field_str(j, "proto_mode", prototypes::to_string(job.train.proto_mode)));
    job.train.nonlinearity = toy::nonlinearity_from_string(
        detail::field_str(j, "nonlinearity", toy::to_string(job.train.nonlinearity)));
    job.train.m_prime = detail::field<std::size_t>(j, "m_prime", job.train.m_prime);
    job.train.metrics_every =
        detail::field<std::size_t>(j, "metrics_every", job.train.metrics_every);
    job.resolve();
    job.jitter_given = true;  // echo always carries the resolved value
    return job;
}

// --seed flag > config file > CLOP_SEED env > built-in default.
inline std::uint64_t resolve_seed(bool flag_given, std::uint64_t flag_value, bool cfg_given,
                                  std::uint64_t cfg_value, std::uint64_t fallback) {
    if (flag_given) return flag_value;
    if (cfg_given) return cfg_value;
    if (const char* env = std::getenv("CLOP_SEED")) {
        std::string s(env);
        if (s.empty()) throw UsageError("CLOP_SEED is set but empty");
        char* end = nullptr;
        unsigned long long v = std::strtoull(s.c_str(), &end, 10);
        if (end != s.c_str() + s.size())
            throw UsageError("CLOP_SEED must be an unsigned integer, got '" + s + "'");
        return static_cast<std::uint64_t>(v);
    }
    return fallback;
}

} // namespace clop::config
