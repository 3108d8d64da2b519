#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "clop/config.hpp"
#include "clop/diagnostics.hpp"
#include "clop/dynamics.hpp"
#include "clop/io.hpp"
#include "clop/prototypes.hpp"
#include "clop/svg.hpp"
#include "clop/toy.hpp"
#include "clop/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

json load_config_file(const std::string& path) {
    std::string text = clop::io::read_text_file(path);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw clop::UsageError("config file " + path + ": " + e.what());
    }
}

void guard_output_dir(const fs::path& dir, bool force, const char* artifact) {
    if (!force && fs::exists(dir / artifact))
        throw clop::Error("output directory " + dir.string() + " already contains " + artifact +
                          "; pass --force to overwrite");
    fs::create_directories(dir);
}

json final_row_json(const clop::dynamics::TrajectoryRow& r) {
    json j;
    j["step"] = r.step;
    j["loss"] = r.loss;
    j["mean_norm"] = r.mean_norm;
    j["min_raw_norm"] = r.min_raw_norm;
    j["max_raw_norm"] = r.max_raw_norm;
    j["effective_rank"] = r.effective_rank;
    return j;
}

void write_simulation_artifacts(const fs::path& out, const clop::dynamics::SimulationConfig& cfg,
                                const clop::dynamics::TrajectoryRecord& rec) {
    clop::io::CsvBuilder traj(
        {"step", "loss", "mean_norm", "min_raw_norm", "max_raw_norm", "effective_rank"});
    for (const auto& r : rec.rows) {
        traj.cell(r.step).cell(r.loss).cell(r.mean_norm).cell(r.min_raw_norm).cell(r.max_raw_norm);
        traj.cell(r.effective_rank);
        traj.end_row();
    }
    clop::io::write_text_file(out / "trajectory.csv", traj.str());

    clop::io::CsvBuilder spectra({"step", "index", "singular_value"});
    for (const auto& [step, sv] : rec.spectra)
        for (std::size_t i = 0; i < sv.size(); ++i) {
            spectra.cell(step).cell(i).cell(sv[i]);
            spectra.end_row();
        }
    clop::io::write_text_file(out / "spectra.csv", spectra.str());

    clop::io::CsvBuilder pca({"step", "point_id", "pc1", "pc2"});
    for (const auto& [step, proj] : rec.pca)
        for (std::size_t i = 0; i < proj.rows; ++i) {
            pca.cell(step).cell(i).cell(proj(i, 0)).cell(proj(i, 1));
            pca.end_row();
        }
    clop::io::write_text_file(out / "pca.csv", pca.str());

    json summary;
    summary["config"] = clop::config::simulation_to_json(cfg);
    summary["final"] = final_row_json(rec.final_row());
    summary["collapsed"] = rec.final_row().effective_rank <= 2;
    clop::io::write_text_file(out / "summary.json", summary.dump(2) + "\n");
    std::cout << summary.dump(2) << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"unit-sphere contrastive embedding toolbox"};
    app.require_subcommand(1);

    // ---- simulate ----------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "run the descent simulator and dump trajectories");
    std::string sim_config, sim_out;
    bool sim_force = false;
    std::uint64_t sim_seed = 0;
    std::size_t sim_n = 0, sim_dim = 0, sim_steps = 0, sim_record = 0, sim_classes = 0;
    double sim_tau = 0.0, sim_lr = 0.0, sim_scale = 0.0, sim_lambda = 0.0, sim_frac = 0.0;
    std::string sim_loss, sim_pairing, sim_update, sim_init, sim_proto;
    sim->add_option("--config", sim_config, "JSON config file");
    sim->add_option("--out", sim_out, "output directory");
    sim->add_flag("--force", sim_force, "overwrite an existing output directory");
    sim->add_option("--seed", sim_seed, "rng seed");
    sim->add_option("--n,--n-points", sim_n, "number of points");
    sim->add_option("--dim", sim_dim, "embedding dimension");
    sim->add_option("--steps", sim_steps, "descent steps");
    sim->add_option("--record-every", sim_record, "recording cadence");
    sim->add_option("--n-classes", sim_classes, "classes for the prototype pull");
    sim->add_option("--tau", sim_tau, "temperature");
    sim->add_option("--lr", sim_lr, "learning rate");
    sim->add_option("--init-scale", sim_scale, "initial cloud scale");
    sim->add_option("--lambda", sim_lambda, "prototype pull weight");
    sim->add_option("--label-frac", sim_frac, "labeled fraction for the prototype pull");
    sim->add_option("--loss", sim_loss, "loss: infonce|repulsive|clop");
    sim->add_option("--pairing", sim_pairing, "pair mode: paired|merged");
    sim->add_option("--update", sim_update, "update space: z_renormalize|raw_pullback");
    sim->add_option("--init", sim_init, "init: uniform01|gaussian");
    sim->add_option("--proto-mode", sim_proto, "prototypes: orthonormal|etf|random");
    sim->callback([&] {
        json j = json::object();
        if (sim->count("--config")) j = load_config_file(sim_config);
        std::string out_dir = sim_out;
        if (j.contains("out")) {
            if (out_dir.empty()) out_dir = j.at("out").get<std::string>();
            j.erase("out");
        }
        if (out_dir.empty()) throw clop::UsageError("no output directory: pass --out");
        clop::dynamics::SimulationConfig cfg = clop::config::simulation_from_json(j);
        if (sim->count("--n")) cfg.n_points = sim_n;
        if (sim->count("--dim")) cfg.dim = sim_dim;
        if (sim->count("--steps")) cfg.steps = sim_steps;
        if (sim->count("--record-every")) cfg.record_every = sim_record;
        if (sim->count("--n-classes")) cfg.n_classes = sim_classes;
        if (sim->count("--tau")) cfg.tau = sim_tau;
        if (sim->count("--lr")) cfg.lr = sim_lr;
        if (sim->count("--init-scale")) cfg.init_scale = sim_scale;
        if (sim->count("--lambda")) cfg.lambda = sim_lambda;
        if (sim->count("--label-frac")) cfg.label_fraction = sim_frac;
        if (sim->count("--loss")) cfg.loss = clop::dynamics::loss_kind_from_string(sim_loss);
        if (sim->count("--pairing")) cfg.pair_mode = clop::core::pair_mode_from_string(sim_pairing);
        if (sim->count("--update"))
            cfg.update = clop::dynamics::update_space_from_string(sim_update);
        if (sim->count("--init")) cfg.init = clop::dynamics::init_kind_from_string(sim_init);
        if (sim->count("--proto-mode"))
            cfg.proto_mode = clop::prototypes::proto_mode_from_string(sim_proto);
        cfg.seed = clop::config::resolve_seed(sim->count("--seed") > 0, sim_seed,
                                              j.contains("seed"), cfg.seed, 42);
        cfg.validate();
        fs::path out(out_dir);
        guard_output_dir(out, sim_force, "summary.json");
        clop::dynamics::TrajectoryRecord rec = clop::dynamics::run_simulation(cfg);
        write_simulation_artifacts(out, cfg, rec);
    });

    // ---- lr-range ----------------------------------------------------------
    auto* lrr = app.add_subcommand("lr-range", "stability window for the merged-pair loss");
    double lrr_tau = 0.0, lrr_sigma = 0.0;
    std::size_t lrr_nneg = 0;
    lrr->add_option("--tau", lrr_tau, "temperature")->required();
    lrr->add_option("--sigma", lrr_sigma, "raw embedding scale")->required();
    lrr->add_option("--negatives,--n-neg", lrr_nneg, "negatives per anchor")->required();
    lrr->callback([&] {
        clop::diagnostics::LrWindow w = clop::diagnostics::lr_window(lrr_tau, lrr_sigma, lrr_nneg);
        json j;
        j["eta_lo"] = w.eta_lo;
        j["eta_hi"] = w.eta_hi;
        j["midpoint"] = w.midpoint;
        std::cout << j.dump() << "\n";
    });

    // ---- prototypes --------------------------------------------------------
    auto* pro = app.add_subcommand("prototypes", "generate class prototype vectors");
    std::string pro_mode = "orthonormal", pro_out = "prototypes.json";
    std::size_t pro_k = 0, pro_dim = 0;
    std::uint64_t pro_seed = 0;
    pro->add_option("--mode", pro_mode, "orthonormal|etf|random");
    pro->add_option("--k", pro_k, "number of classes")->required();
    pro->add_option("--dim", pro_dim, "prototype dimension")->required();
    pro->add_option("--seed", pro_seed, "rng seed");
    pro->add_option("--out", pro_out, "output JSON file");
    pro->callback([&] {
        std::uint64_t seed =
            clop::config::resolve_seed(pro->count("--seed") > 0, pro_seed, false, 0, 42);
        clop::prototypes::PrototypeSet P = clop::prototypes::generate(
            clop::prototypes::proto_mode_from_string(pro_mode), pro_k, pro_dim, seed);
        json j;
        j["mode"] = clop::prototypes::to_string(P.mode);
        j["k"] = P.k;
        j["dim"] = P.dim;
        j["seed"] = P.seed;
        json rows = json::array();
        for (std::size_t i = 0; i < P.k; ++i) {
            json row = json::array();
            for (std::size_t c = 0; c < P.dim; ++c) row.push_back(P.vectors(i, c));
            rows.push_back(std::move(row));
        }
        j["vectors"] = std::move(rows);
        clop::io::write_text_file(pro_out, j.dump(2) + "\n");
        clop::Matrix G = clop::prototypes::gram(P);
        double off = 0.0;
        for (std::size_t i = 0; i < G.rows; ++i)
            for (std::size_t c = 0; c < G.cols; ++c)
                if (i != c) off = std::max(off, std::fabs(G(i, c)));
        json report;
        report["max_abs_offdiag"] = off;
        std::cout << report.dump() << "\n";
    });

    // ---- train-toy ---------------------------------------------------------
    auto* toy = app.add_subcommand("train-toy", "train the toy encoder on a gaussian mixture");
    std::string toy_config, toy_out;
    bool toy_force = false;
    std::uint64_t toy_seed = 0;
    std::size_t toy_k = 0, toy_din = 0, toy_per = 0, toy_batch = 0, toy_epochs = 0, toy_mp = 0,
                toy_every = 0;
    double toy_spread = 0.0, toy_within = 0.0, toy_frac = 0.0, toy_lambda = 0.0, toy_tau = 0.0,
           toy_lr = 0.0, toy_jitter = 0.0;
    std::string toy_loss, toy_proto, toy_nonlin;
    toy->add_option("--config", toy_config, "JSON config file");
    toy->add_option("--out", toy_out, "output directory");
    toy->add_flag("--force", toy_force, "overwrite an existing output directory");
    toy->add_option("--seed", toy_seed, "rng seed");
    toy->add_option("--k", toy_k, "number of classes");
    toy->add_option("--d-in", toy_din, "input dimension");
    toy->add_option("--per-class", toy_per, "points per class");
    toy->add_option("--batch", toy_batch, "mini-batch size");
    toy->add_option("--epochs", toy_epochs, "training epochs");
    toy->add_option("--m-prime", toy_mp, "embedding dimension");
    toy->add_option("--metrics-every", toy_every, "metrics cadence in epochs");
    toy->add_option("--spread", toy_spread, "class mean scale");
    toy->add_option("--within-std", toy_within, "within-class noise");
    toy->add_option("--label-frac", toy_frac, "labeled fraction");
    toy->add_option("--lambda", toy_lambda, "prototype pull weight");
    toy->add_option("--tau", toy_tau, "temperature");
    toy->add_option("--lr", toy_lr, "learning rate");
    toy->add_option("--jitter", toy_jitter, "augmentation noise (default 0.1 * within-std)");
    toy->add_option("--loss", toy_loss, "infonce|clop");
    toy->add_option("--proto-mode", toy_proto, "orthonormal|etf|random");
    toy->add_option("--nonlin", toy_nonlin, "none|tanh");
    toy->callback([&] {
        json j = json::object();
        if (toy->count("--config")) j = load_config_file(toy_config);
        std::string out_dir = toy_out;
        if (j.contains("out")) {
            if (out_dir.empty()) out_dir = j.at("out").get<std::string>();
            j.erase("out");
        }
        if (out_dir.empty()) throw clop::UsageError("no output directory: pass --out");
        clop::config::ToyJob job = clop::config::toy_from_json(j);
        if (toy->count("--k")) job.k = toy_k;
        if (toy->count("--d-in")) job.d_in = toy_din;
        if (toy->count("--per-class")) job.per_class = toy_per;
        if (toy->count("--batch")) job.train.batch = toy_batch;
        if (toy->count("--epochs")) job.train.epochs = toy_epochs;
        if (toy->count("--m-prime")) job.train.m_prime = toy_mp;
        if (toy->count("--metrics-every")) job.train.metrics_every = toy_every;
        if (toy->count("--spread")) job.spread = toy_spread;
        if (toy->count("--within-std")) {
            job.within_std = toy_within;
            if (!toy->count("--jitter") && !j.contains("jitter_std"))
                job.train.jitter_std = 0.1 * toy_within;
        }
        if (toy->count("--label-frac")) job.train.label_fraction = toy_frac;
        if (toy->count("--lambda")) job.train.lambda = toy_lambda;
        if (toy->count("--tau")) job.train.tau = toy_tau;
        if (toy->count("--lr")) job.train.lr = toy_lr;
        if (toy->count("--jitter")) job.train.jitter_std = toy_jitter;
        if (toy->count("--loss")) job.train.loss = clop::toy::loss_kind_from_string(toy_loss);
        if (toy->count("--proto-mode"))
            job.train.proto_mode = clop::prototypes::proto_mode_from_string(toy_proto);
        if (toy->count("--nonlin"))
            job.train.nonlinearity = clop::toy::nonlinearity_from_string(toy_nonlin);
        job.train.seed = clop::config::resolve_seed(toy->count("--seed") > 0, toy_seed,
                                                    j.contains("seed"), job.train.seed, 42);
        job.train.validate();
        fs::path out(out_dir);
        guard_output_dir(out, toy_force, "report.json");

        clop::toy::SyntheticDataset data = clop::toy::gen_mixture(
            job.k, job.d_in, job.per_class, job.spread, job.within_std, job.train.seed);
        auto [enc, rep] = clop::toy::train(data, job.train);
        (void)enc;

        clop::io::CsvBuilder metrics(
            {"epoch", "loss", "eff_rank", "np_acc", "probe_acc", "mean_proto_cos"});
        for (const auto& r : rep.rows) {
            metrics.cell(r.epoch).cell(r.loss).cell(r.eff_rank).cell(r.np_acc).cell(r.probe_acc);
            metrics.cell(r.mean_proto_cos);
            metrics.end_row();
        }
        clop::io::write_text_file(out / "metrics.csv", metrics.str());

        const auto& fin = rep.final_row();
        json report;
        report["config"] = clop::config::toy_to_json(job);
        report["labeled_count"] = rep.labeled_count;
        report["n_train"] = data.train_x.rows;
        report["n_test"] = data.test_x.rows;
        report["final"] = {{"epoch", fin.epoch},         {"loss", fin.loss},
                           {"eff_rank", fin.eff_rank},   {"np_acc", fin.np_acc},
                           {"probe_acc", fin.probe_acc}, {"mean_proto_cos", fin.mean_proto_cos}};
        clop::io::write_text_file(out / "report.json", report.dump(2) + "\n");
        std::cout << report.dump(2) << "\n";
    });

    // ---- verify ------------------------------------------------------------
    auto* ver = app.add_subcommand("verify", "run a numerical audit suite");
    std::string ver_suite;
    std::uint64_t ver_seed = 0;
    ver->add_option("--suite", ver_suite, "gradients|stationarity|bound|prototypes")->required();
    ver->add_option("--seed", ver_seed, "rng seed");
    bool ver_failed = false;
    ver->callback([&] {
        std::uint64_t seed =
            clop::config::resolve_seed(ver->count("--seed") > 0, ver_seed, false, 0, 7);
        clop::verify::VerifyReport rep = clop::verify::run_suite(ver_suite, seed);
        json j;
        j["suite"] = rep.suite;
        j["total"] = rep.checks.size();
        j["passed"] = rep.n_passed();
        j["failed"] = rep.checks.size() - rep.n_passed();
        json checks = json::array();
        for (const auto& c : rep.checks) {
            json e;
            e["name"] = c.name;
            e["passed"] = c.passed;
            e["observed"] = c.observed;
            e["limit"] = c.limit;
            checks.push_back(std::move(e));
        }
        j["checks"] = std::move(checks);
        for (const auto& [k, v] : rep.extras) j[k] = v;
        std::cout << j.dump(2) << "\n";
        ver_failed = !rep.ok();
    });

    // ---- plot --------------------------------------------------------------
    auto* plot = app.add_subcommand("plot", "render a CSV artifact as SVG");
    std::string plot_in, plot_kind, plot_out;
    plot->add_option("--in", plot_in, "input CSV")->required()->check(CLI::ExistingFile);
    plot->add_option("--kind", plot_kind, "spectrum|trajectory|pca")
        ->required()
        ->check(CLI::IsMember({"spectrum", "trajectory", "pca"}));
    plot->add_option("--out", plot_out, "output SVG file")->required();
    plot->callback([&] {
        clop::io::CsvTable t = clop::io::parse_csv(clop::io::read_text_file(plot_in), plot_in);
        clop::io::write_text_file(plot_out, clop::svg::render_chart(t, plot_kind));
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const clop::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const clop::TooManyClasses& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const clop::InsufficientLabels& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return ver_failed ? 1 : 0;
}
