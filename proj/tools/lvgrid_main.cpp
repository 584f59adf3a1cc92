#include <cstdio>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "lvgrid/dbci.hpp"
#include "lvgrid/errors.hpp"
#include "lvgrid/experiment.hpp"
#include "lvgrid/identify.hpp"
#include "lvgrid/network.hpp"
#include "lvgrid/rng.hpp"
#include "lvgrid/simulator.hpp"

namespace {

using namespace lvgrid;

FeederNetwork load_network(const std::string& topology_path, std::optional<int> snapshots,
                           std::uint64_t synth_seed) {
    TopologySpec spec = load_topology_json(topology_path);
    if (snapshots) spec.snapshots = *snapshots;

    // Resolve per-node CSV references (nodes may share one file) and fill any
    // remaining nodes with synthesized profiles.
    std::set<std::string> csvs;
    for (const auto& ns : spec.nodes)
        if (ns.id != 0 && !ns.load_csv.empty()) csvs.insert(ns.load_csv);
    for (const std::string& path : csvs) read_load_csv(path, spec);
    FeederNetwork net = build_network(spec);
    bool any_missing = false;
    for (int id = 1; id < net.node_count(); ++id)
        if (!net.loads[id]) any_missing = true;
    if (any_missing) {
        const auto profiles =
            synth_load_profiles(LoadGenConfig{}, net.line_count(), net.snapshots, synth_seed);
        for (int id = 1; id < net.node_count(); ++id)
            if (!net.loads[id]) net.loads[id] = profiles[id - 1];
    }
    return net;
}

AlgoConfig algo_from_flags(const std::string& algo, std::optional<double> xr, double mu,
                           double alpha, double eps, int max_iters) {
    AlgoConfig cfg;
    if (algo == "lbci")
        cfg.variant = Variant::LBCI;
    else if (algo == "lbci-old" || algo == "lbci_old")
        cfg.variant = Variant::LBCI_OLD;
    else if (algo == "bci")
        cfg.variant = Variant::BCI;
    else
        throw ValidationError("unknown --algo value: " + algo);
    cfg.xr_ratio = xr;
    cfg.mu = mu;
    cfg.reg = xr ? RegKind::XrRow : RegKind::Q2Image;
    cfg.alpha = alpha;
    cfg.eps = eps;
    cfg.max_iters = max_iters;
    return cfg;
}

int run(int argc, char** argv) {
    CLI::App app{"low-voltage feeder simulation and line-impedance identification"};
    app.require_subcommand(1);

    // --- simulate ---
    auto* sim = app.add_subcommand("simulate", "solve a feeder and emit smart-meter data");
    std::string sim_topology, sim_out, sim_truth_out;
    int sim_snapshots = 0;
    double sim_noise = 0.0;
    std::uint64_t sim_seed = 1;
    double sim_fs_v = 250.0, sim_fs_i = 0.0, sim_fs_a = M_PI / 3.0;
    sim->add_option("--topology", sim_topology, "topology JSON")->required();
    sim->add_option("--snapshots", sim_snapshots, "snapshot count M (overrides topology)");
    sim->add_option("--noise-pct", sim_noise,
                    "full-scale noise fraction (0.01 = 1 % FS class)");
    sim->add_option("--seed", sim_seed, "noise / synthesis seed");
    sim->add_option("--out", sim_out, "measurement CSV path")->required();
    sim->add_option("--truth-out", sim_truth_out, "optional ground-truth CSV path");
    sim->add_option("--fs-voltage", sim_fs_v, "voltage full scale, V");
    sim->add_option("--fs-current", sim_fs_i, "current full scale, A (default 1.2 x peak)");
    sim->add_option("--fs-angle", sim_fs_a, "angle full scale, rad");

    // --- identify ---
    auto* ident = app.add_subcommand("identify", "estimate line impedances from measurements");
    std::string id_meas, id_topology, id_algo = "bci", id_out;
    double id_mu = 0.0, id_alpha = 0.1, id_eps = 1e-8;
    int id_iters = 200;
    std::optional<double> id_xr;
    double id_xr_raw = 0.0;
    ident->add_option("--measurements", id_meas, "measurement CSV")->required();
    ident->add_option("--topology", id_topology, "topology JSON")->required();
    ident->add_option("--algo", id_algo, "lbci | lbci-old | bci");
    auto* xr_opt = ident->add_option("--xr", id_xr_raw, "known X/R ratio");
    ident->add_option("--mu", id_mu, "regularization weight in [0, 1]");
    ident->add_option("--alpha", id_alpha, "fixed-point step size");
    ident->add_option("--eps", id_eps, "fixed-point gap tolerance");
    ident->add_option("--max-iters", id_iters, "fixed-point iteration cap");
    ident->add_option("--out", id_out, "results CSV path")->required();

    // --- dbci ---
    auto* dec = app.add_subcommand("dbci", "decentralized per-meter identification");
    std::string db_meas, db_topology, db_trace, db_out, db_algo = "bci";
    double db_mu = 0.0, db_alpha = 0.1, db_eps = 1e-8;
    int db_iters = 200;
    double db_xr_raw = 0.0;
    dec->add_option("--topology", db_topology, "topology JSON")->required();
    dec->add_option("--measurements", db_meas, "measurement CSV")->required();
    dec->add_option("--trace", db_trace, "message trace JSONL path")->required();
    dec->add_option("--out", db_out, "results CSV path")->required();
    dec->add_option("--algo", db_algo, "lbci | lbci-old | bci");
    auto* db_xr_opt = dec->add_option("--xr", db_xr_raw, "known X/R ratio");
    dec->add_option("--mu", db_mu, "regularization weight in [0, 1]");
    dec->add_option("--alpha", db_alpha, "fixed-point step size");
    dec->add_option("--eps", db_eps, "fixed-point gap tolerance");
    dec->add_option("--max-iters", db_iters, "fixed-point iteration cap");

    // --- experiment ---
    auto* exp = app.add_subcommand("experiment", "run a Monte Carlo scenario");
    std::string ex_scenario, ex_out_dir;
    int ex_threads = 0;
    exp->add_option("--scenario", ex_scenario, "scenario JSON")->required();
    exp->add_option("--out-dir", ex_out_dir, "output directory")->required();
    exp->add_option("--threads", ex_threads, "worker threads (default: hardware)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << e.what() << "\n";
        return 2;
    }

    if (sim->parsed()) {
        FeederNetwork net = load_network(
            sim_topology, sim_snapshots > 0 ? std::optional<int>(sim_snapshots) : std::nullopt,
            rng::derive(sim_seed, 0));
        const GroundTruthState state = solve_network(net);
        MeasurementSet ms = measure(state);
        if (sim_noise > 0.0) {
            NoiseSpec spec;
            spec.pct_fs = sim_noise;
            spec.fs_voltage = sim_fs_v;
            spec.fs_current = sim_fs_i > 0.0 ? sim_fs_i : default_fs_current(ms);
            spec.fs_angle = sim_fs_a;
            spec.seed = rng::derive(sim_seed, 1);
            ms = add_noise(ms, spec);
        }
        write_measurements_csv(sim_out, ms);
        if (!sim_truth_out.empty()) write_ground_truth_csv(sim_truth_out, state);
        std::printf("simulated %d snapshots over %d nodes -> %s\n", net.snapshots,
                    net.node_count(), sim_out.c_str());
        return 0;
    }

    if (ident->parsed()) {
        if (xr_opt->count() > 0) id_xr = id_xr_raw;
        const AlgoConfig cfg =
            algo_from_flags(id_algo, id_xr, id_mu, id_alpha, id_eps, id_iters);
        FeederNetwork net = load_network(id_topology, std::nullopt, 0);
        const MeasurementSet ms = read_measurements_csv(id_meas);
        const IdentifyResult res =
            net.is_chain() ? identify_chain(ms, cfg) : identify_tree(ms, net, cfg);
        const auto rows = rows_from_result(res, net, cfg, 0.0, 0, ms.snapshots());
        write_results_csv(id_out, rows);
        std::printf("identified %d lines (%s) -> %s\n", net.line_count(),
                    cfg.display_name().c_str(), id_out.c_str());
        return 0;
    }

    if (dec->parsed()) {
        std::optional<double> xr;
        if (db_xr_opt->count() > 0) xr = db_xr_raw;
        const AlgoConfig cfg = algo_from_flags(db_algo, xr, db_mu, db_alpha, db_eps, db_iters);
        FeederNetwork net = load_network(db_topology, std::nullopt, 0);
        const MeasurementSet ms = read_measurements_csv(db_meas);
        const DecentralizedResult res = run_decentralized(net, ms, cfg);
        IdentifyResult as_central;
        as_central.lines = res.lines;
        const auto rows = rows_from_result(as_central, net, cfg, 0.0, 0, ms.snapshots());
        write_results_csv(db_out, rows);
        write_trace_jsonl(db_trace, res.trace);
        std::printf("decentralized run: %zu payloads -> %s, trace -> %s\n", res.trace.size(),
                    db_out.c_str(), db_trace.c_str());
        return 0;
    }

    if (exp->parsed()) {
        const Scenario sc = load_scenario_json(ex_scenario);
        const ScenarioOutput out = run_scenario(sc, ex_threads);
        write_scenario_outputs(ex_out_dir, out);
        std::printf("scenario %s: %zu records -> %s\n", sc.name.c_str(), out.rows.size(),
                    ex_out_dir.c_str());
        return 0;
    }
    return 2;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const lvgrid::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const lvgrid::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
