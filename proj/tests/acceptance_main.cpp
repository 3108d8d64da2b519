// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Every tolerance is pinned here, not read from configuration.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "json.hpp"

#include "clop/config.hpp"
#include "clop/diagnostics.hpp"
#include "clop/dynamics.hpp"
#include "clop/io.hpp"
#include "clop/toy.hpp"
#include "clop/verify.hpp"

namespace fs = std::filesystem;
using namespace clop;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt1(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

bool g_all_passed = true;

void report(int id, bool ok, const std::string& detail) {
    std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    if (!ok) g_all_passed = false;
}

template <typename Fn>
void criterion(int id, Fn&& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        report(id, false, std::string("exception: ") + e.what());
    }
}

double worst_margin(const verify::VerifyReport& rep) {
    // Largest observed/limit ratio across checks with a positive limit.
    double worst = 0.0;
    for (const auto& c : rep.checks)
        if (c.limit > 0.0) worst = std::max(worst, c.observed / c.limit);
    return worst;
}

int run_cli(const std::string& args, const fs::path& log) {
    std::string cmd = "\"" CLOP_CLI_PATH "\" " + args + " > \"" + log.string() + "\" 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

dynamics::SimulationConfig random_sim_config(Rng& rng) {
    dynamics::SimulationConfig c;
    c.n_points = 2 * (1 + rng.integer(25));
    c.dim = 2 + rng.integer(30);
    c.tau = rng.uniform(0.01, 1.0);
    c.lr = rng.uniform(0.001, 0.5);
    c.steps = rng.integer(2000);
    c.seed = rng.integer(1u << 30);
    c.record_every = 1 + rng.integer(50);
    c.init_scale = rng.uniform(0.1, 3.0);
    c.lambda = rng.uniform(0.0, 2.0);
    c.label_fraction = rng.uniform(0.0, 1.0);
    c.init = rng.integer(2) ? dynamics::InitKind::gaussian : dynamics::InitKind::uniform01;
    switch (rng.integer(3)) {
        case 0:
            c.loss = dynamics::LossKind::repulsive;
            c.pair_mode = core::PairMode::merged;
            break;
        case 1:
            c.loss = dynamics::LossKind::infonce;
            c.pair_mode = core::PairMode::paired;
            break;
        default:
            c.loss = dynamics::LossKind::clop;
            c.pair_mode = core::PairMode::paired;
            c.n_classes = 1 + rng.integer(c.dim);
            c.proto_mode = rng.integer(2) ? prototypes::ProtoMode::orthonormal
                                          : prototypes::ProtoMode::random;
            break;
    }
    c.update = rng.integer(2) ? dynamics::UpdateSpace::z_renormalize
                              : dynamics::UpdateSpace::raw_pullback;
    return c;
}

} // namespace

int main() {
    // 1. Analytic gradients vs central finite differences.
    criterion(1, [] {
        auto t0 = std::chrono::steady_clock::now();
        verify::VerifyReport rep = verify::run_gradients_suite(7);
        double secs = seconds_since(t0);
        bool ok = rep.ok() && rep.checks.size() == 100 && secs < 30.0;
        std::ostringstream d;
        d << rep.n_passed() << "/" << rep.checks.size()
          << " finite-difference gradient checks within rel err 1e-5, worst margin "
          << fmt1(100.0 * worst_margin(rep)) << "% (" << fmt1(secs) << "s, limit 30s)";
        report(1, ok, d.str());
    });

    // 2. Collinear configurations are stationary; generic ones are not.
    criterion(2, [] {
        auto t0 = std::chrono::steady_clock::now();
        verify::VerifyReport rep = verify::run_stationarity_suite(7);
        double secs = seconds_since(t0);
        bool ok = rep.ok() && rep.checks.size() == 150 && secs < 10.0;
        std::ostringstream d;
        d << rep.n_passed() << "/" << rep.checks.size()
          << " stationarity checks (collinear grad inf-norm <= 1e-10, generic residual > 1e-6) ("
          << fmt1(secs) << "s, limit 10s)";
        report(2, ok, d.str());
    });

    // 3. Collapse at lr = tau, survival at lr in the stable window.
    criterion(3, [] {
        auto t0 = std::chrono::steady_clock::now();
        dynamics::SimulationConfig cfg;
        cfg.n_points = 50;
        cfg.dim = 50;
        cfg.tau = 0.1;
        cfg.steps = 1000;
        cfg.seed = 42;
        cfg.record_every = 100;

        cfg.lr = 1.0;
        auto hot = dynamics::run_simulation(cfg);
        cfg.lr = 0.1;
        auto warm = dynamics::run_simulation(cfg);
        cfg.lr = 0.01;
        auto cold = dynamics::run_simulation(cfg);
        double secs = seconds_since(t0);

        bool collapse = hot.final_row().effective_rank <= 2 &&
                        hot.final_row().mean_norm > cold.final_row().mean_norm;
        bool survive =
            warm.final_row().effective_rank >= 20 && cold.final_row().effective_rank >= 20;
        bool ok = collapse && survive && secs < 60.0;
        std::ostringstream d;
        d << "repulsive descent N=50 m=50 tau=0.1: lr=1 rank "
          << hot.final_row().effective_rank << " mean-norm " << hot.final_row().mean_norm
          << " vs lr=0.01 mean-norm " << cold.final_row().mean_norm << "; lr=0.1 rank "
          << warm.final_row().effective_rank << ", lr=0.01 rank "
          << cold.final_row().effective_rank << " (" << fmt1(secs) << "s, limit 60s)";
        report(3, ok, d.str());
    });

    // 4. Learning-rate window: pinned values, centered midpoint, clamped edge.
    criterion(4, [] {
        auto w = diagnostics::lr_window(0.1, 1.0, 49);
        bool pinned = std::fabs(w.eta_lo - 0.0244898) <= 1e-6 &&
                      std::fabs(w.eta_hi - 0.0755102) <= 1e-6;
        bool centered = true;
        Rng rng(4);
        for (int t = 0; t < 1000; ++t) {
            double tau = rng.uniform(0.01, 2.0);
            double sigma = rng.uniform(0.05, 2.0);
            std::size_t n_neg = 1 + rng.integer(99);
            auto wt = diagnostics::lr_window(tau, sigma, n_neg);
            if (std::fabs(wt.midpoint - tau / 2.0) > 1e-12) centered = false;
        }
        bool clamped = diagnostics::lr_window(0.1, 1.0, 1).eta_lo == 0.0;
        bool ok = pinned && centered && clamped;
        std::ostringstream d;
        d << "lr window (tau=0.1, sigma=1, 49 negatives) = [" << w.eta_lo << ", " << w.eta_hi
          << "], midpoint tau/2 over 1000 draws, lower edge clamps to 0";
        report(4, ok, d.str());
    });

    // 5. Prototype geometry.
    criterion(5, [] {
        verify::VerifyReport rep = verify::run_prototypes_suite(7);
        std::ostringstream d;
        d << rep.n_passed() << "/" << rep.checks.size()
          << " prototype checks (orthonormal gram <= 1e-9, ETF angles -1/(k-1) +- 1e-9, "
             "20x seeded regeneration bitwise)";
        report(5, rep.ok(), d.str());
    });

    // 6. Mean-shift bound checker.
    criterion(6, [] {
        auto t0 = std::chrono::steady_clock::now();
        verify::VerifyReport rep = verify::run_bound_suite(7);
        double secs = seconds_since(t0);
        double rate = -1.0, asym = -1.0, surveyed = -1.0;
        for (const auto& [k, v] : rep.extras) {
            if (k == "satisfaction_rate") rate = v;
            if (k == "max_p_asymmetry") asym = v;
            if (k == "surveyed") surveyed = v;
        }
        bool ok = rep.ok() && rate >= 0.0 && asym >= 0.0 && surveyed >= 1000.0 && secs < 30.0;
        std::ostringstream d;
        d << rep.n_passed() << "/" << rep.checks.size()
          << " pinned bound checks; survey of " << surveyed
          << " configs: satisfaction_rate " << rate << ", max P-asymmetry " << asym << " ("
          << fmt1(secs) << "s, limit 30s)";
        report(6, ok, d.str());
    });

    // 7. Toy training: accuracy at the midpoint lr, rank dominance at 10x.
    criterion(7, [] {
        auto t0 = std::chrono::steady_clock::now();
        auto data = toy::gen_mixture(8, 32, 64, 5.0, 1.0, 42);
        double oracle = toy::linear_probe(data.train_x, data.train_y, data.test_x, data.test_y);

        toy::TrainConfig base;
        base.loss = toy::LossKind::clop;
        base.label_fraction = 0.1;
        base.lambda = 1.0;
        base.tau = 0.1;
        base.lr = 0.05;
        base.batch = 16;
        base.epochs = 1000;
        base.jitter_std = 2.0;
        base.seed = 42;
        base.m_prime = 16;
        base.metrics_every = 100;

        auto [enc_mid, mid] = toy::train(data, base);
        (void)enc_mid;

        toy::TrainConfig hot = base;
        hot.lr = 0.5;
        auto [enc_hot, clop_hot] = toy::train(data, hot);
        (void)enc_hot;

        toy::TrainConfig nce = hot;
        nce.loss = toy::LossKind::infonce;
        auto [enc_nce, nce_hot] = toy::train(data, nce);
        (void)enc_nce;

        toy::TrainConfig zero = hot;
        zero.lambda = 0.0;
        auto [enc_zero, zero_hot] = toy::train(data, zero);
        (void)enc_zero;

        bool bitwise = zero_hot.rows.size() == nce_hot.rows.size();
        if (bitwise)
            for (std::size_t i = 0; i < zero_hot.rows.size(); ++i) {
                const auto &a = zero_hot.rows[i], &b = nce_hot.rows[i];
                if (a.loss != b.loss || a.eff_rank != b.eff_rank || a.np_acc != b.np_acc ||
                    a.probe_acc != b.probe_acc || a.mean_proto_cos != b.mean_proto_cos)
                    bitwise = false;
            }

        double secs = seconds_since(t0);
        bool mid_ok = mid.final_row().np_acc >= 0.9 && mid.final_row().eff_rank >= 7;
        bool dominance =
            clop_hot.final_row().eff_rank >= nce_hot.final_row().eff_rank &&
            clop_hot.final_row().probe_acc >= nce_hot.final_row().probe_acc;
        bool ok = oracle >= 0.95 && mid_ok && dominance && bitwise && secs < 180.0;
        std::ostringstream d;
        d << "separability oracle " << oracle << "; clop lr=0.05 np " << mid.final_row().np_acc
          << " rank " << mid.final_row().eff_rank << "; lr=0.5 rank/probe "
          << clop_hot.final_row().eff_rank << "/" << clop_hot.final_row().probe_acc
          << " vs infonce " << nce_hot.final_row().eff_rank << "/"
          << nce_hot.final_row().probe_acc << "; lambda=0 bitwise "
          << (bitwise ? "yes" : "no") << " (" << fmt1(secs) << "s, limit 180s)";
        report(7, ok, d.str());
    });

    // 8. Determinism of every artifact, config round-trips, exit codes.
    criterion(8, [] {
        fs::path dir = "acceptance_scratch";
        fs::remove_all(dir);
        fs::create_directories(dir);
        fs::path log = dir / "cli.log";

        std::string sim_flags =
            " --n 10 --dim 6 --steps 40 --record-every 10 --tau 0.1 --lr 0.01 --seed 9";
        fs::path s1 = dir / "sim1", s2 = dir / "sim2";
        bool sim_ok = run_cli("simulate --out \"" + s1.string() + "\"" + sim_flags, log) == 0 &&
                      run_cli("simulate --out \"" + s2.string() + "\"" + sim_flags, log) == 0;
        bool bytes_ok =
            sim_ok &&
            io::read_text_file(s1 / "trajectory.csv") == io::read_text_file(s2 / "trajectory.csv") &&
            io::read_text_file(s1 / "spectra.csv") == io::read_text_file(s2 / "spectra.csv");

        fs::path v1 = dir / "a.svg", v2 = dir / "b.svg";
        bool svg_ok =
            sim_ok &&
            run_cli("plot --in \"" + (s1 / "spectra.csv").string() + "\" --kind spectrum --out \"" +
                        v1.string() + "\"",
                    log) == 0 &&
            run_cli("plot --in \"" + (s1 / "spectra.csv").string() + "\" --kind spectrum --out \"" +
                        v2.string() + "\"",
                    log) == 0 &&
            io::read_text_file(v1) == io::read_text_file(v2);

        std::string toy_flags =
            " --k 3 --d-in 6 --per-class 8 --batch 4 --epochs 3 --m-prime 6 --label-frac 0.5 "
            "--seed 4";
        fs::path t1 = dir / "toy1", t2 = dir / "toy2";
        bool toy_ok =
            run_cli("train-toy --out \"" + t1.string() + "\"" + toy_flags, log) == 0 &&
            run_cli("train-toy --out \"" + t2.string() + "\"" + toy_flags, log) == 0 &&
            io::read_text_file(t1 / "report.json") == io::read_text_file(t2 / "report.json");

        bool roundtrip = true;
        Rng rng(8);
        for (int t = 0; t < 200; ++t) {
            dynamics::SimulationConfig c = random_sim_config(rng);
            nlohmann::json j = config::simulation_to_json(c);
            if (config::simulation_to_json(config::simulation_from_json(j)) != j) {
                roundtrip = false;
                break;
            }
        }

        int code_success = run_cli("lr-range --tau 0.1 --sigma 1 --negatives 49", log);
        int code_runtime = run_cli("simulate --out \"" + s1.string() + "\"" + sim_flags, log);
        int code_usage = run_cli("simulate --n 6 --steps 2", log);
        bool codes_ok = code_success == 0 && code_runtime == 1 && code_usage == 2;

        bool ok = bytes_ok && svg_ok && toy_ok && roundtrip && codes_ok;
        std::ostringstream d;
        d << "byte-identical reruns (csv " << (bytes_ok ? "yes" : "no") << ", svg "
          << (svg_ok ? "yes" : "no") << ", report " << (toy_ok ? "yes" : "no")
          << "); 200 config round-trips " << (roundtrip ? "ok" : "FAILED")
          << "; exit codes success/runtime/usage = " << code_success << "/" << code_runtime
          << "/" << code_usage;
        report(8, ok, d.str());
    });

    return g_all_passed ? 0 : 1;
}
