#include "lvgrid/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "lvgrid/errors.hpp"
#include "lvgrid/rng.hpp"

namespace lvgrid {

namespace {

// Seed-split channels (see rng::derive): loads use channel 0, measurement
// noise channel 1 keyed further by (class index, realization, sweep index).
constexpr std::uint64_t kLoadChannel = 0;
constexpr std::uint64_t kNoiseChannel = 1;

Variant parse_variant(const std::string& s) {
    if (s == "lbci") return Variant::LBCI;
    if (s == "lbci_old" || s == "lbci-old") return Variant::LBCI_OLD;
    if (s == "bci") return Variant::BCI;
    throw ValidationError("unknown algorithm variant: " + s);
}

AlgoConfig parse_algo(const nlohmann::json& j) {
    AlgoConfig cfg;
    cfg.variant = parse_variant(j.at("variant").get<std::string>());
    if (j.contains("xr") && !j.at("xr").is_null()) cfg.xr_ratio = j.at("xr").get<double>();
    cfg.mu = j.value("mu", 0.0);
    if (j.contains("reg")) {
        const std::string r = j.at("reg").get<std::string>();
        if (r == "q2")
            cfg.reg = RegKind::Q2Image;
        else if (r == "xr_row")
            cfg.reg = RegKind::XrRow;
        else
            throw ValidationError("unknown regularizer kind: " + r);
    } else {
        cfg.reg = cfg.xr_ratio ? RegKind::XrRow : RegKind::Q2Image;
    }
    cfg.alpha = j.value("alpha", 0.1);
    cfg.eps = j.value("eps", 1e-8);
    cfg.max_iters = j.value("max_iters", 200);
    cfg.label = j.value("label", std::string{});
    return cfg;
}

} // namespace

Complex NetworkCfg::line_impedance() const {
    const double r = ohms_per_km * length_m / 1000.0;
    return Complex(r, xr_ratio * r);
}

Scenario load_scenario_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed scenario JSON in " + path + ": " + e.what());
    }

    Scenario sc;
    try {
        sc.name = j.at("name").get<std::string>();
        const auto& nj = j.at("network");
        sc.network.kind = nj.value("kind", "chain");
        sc.network.n_lines = nj.value("n_lines", 10);
        sc.network.length_m = nj.value("length_m", 50.0);
        sc.network.ohms_per_km = nj.value("ohms_per_km", 0.4);
        sc.network.xr_ratio = nj.value("xr_ratio", 0.7);
        sc.network.nominal_voltage = nj.value("nominal_voltage", 230.0);
        sc.load_preset = j.value("load_preset", "normal");
        sc.noise_classes = j.at("noise_classes_pct_fs").get<std::vector<double>>();
        const auto& sj = j.at("snapshot_counts");
        if (sj.is_array()) {
            sc.snapshot_counts = sj.get<std::vector<int>>();
        } else {
            const int from = sj.at("from").get<int>();
            const int to = sj.at("to").get<int>();
            const int step = sj.at("step").get<int>();
            if (step <= 0) throw ValidationError("snapshot sweep step must be positive");
            for (int m = from; m <= to; m += step) sc.snapshot_counts.push_back(m);
        }
        sc.realizations = j.value("realizations", 1);
        for (const auto& aj : j.at("algorithms")) sc.algorithms.push_back(parse_algo(aj));
        sc.master_seed = j.at("master_seed").get<std::uint64_t>();
        sc.fresh_noise = j.value("noise_redraw", std::string("prefix")) == "fresh";
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("scenario schema error in " + path + ": " + e.what());
    }
    validate_scenario(sc);
    return sc;
}

void validate_scenario(const Scenario& sc) {
    if (sc.realizations < 1) throw InvalidConfig("realizations must be >= 1");
    if (sc.snapshot_counts.empty()) throw InvalidConfig("empty snapshot sweep");
    for (std::size_t i = 1; i < sc.snapshot_counts.size(); ++i)
        if (sc.snapshot_counts[i] < sc.snapshot_counts[i - 1])
            throw InvalidConfig("snapshot counts must be non-decreasing");
    if (sc.snapshot_counts.front() < 2) throw InvalidConfig("snapshot counts must be >= 2");
    if (sc.algorithms.empty()) throw InvalidConfig("scenario lists no algorithms");
    if (sc.noise_classes.empty()) throw InvalidConfig("scenario lists no noise classes");
    for (double c : sc.noise_classes)
        if (c < 0.0 || c > 1.0) throw InvalidConfig("noise class out of [0, 1]");
    if (sc.network.kind != "chain" && sc.network.kind != "tree_fig2")
        throw InvalidConfig("unknown network kind: " + sc.network.kind);
    if (sc.load_preset != "normal" && sc.load_preset != "high_variation")
        throw InvalidConfig("unknown load preset: " + sc.load_preset);
}

FeederNetwork scenario_network(const Scenario& sc, int snapshots) {
    const Complex z = sc.network.line_impedance();
    TopologySpec spec;
    if (sc.network.kind == "chain") {
        spec = make_chain_spec(sc.network.n_lines, z, sc.network.nominal_voltage, snapshots);
    } else {  // tree_fig2: 0 -> 1, 1 -> 2, 1 -> 3
        spec.nominal_voltage = sc.network.nominal_voltage;
        spec.snapshots = snapshots;
        spec.nodes.push_back(NodeSpec{0, std::nullopt, Complex{}, std::nullopt, {}});
        spec.nodes.push_back(NodeSpec{1, 0, z, std::nullopt, {}});
        spec.nodes.push_back(NodeSpec{2, 1, z, std::nullopt, {}});
        spec.nodes.push_back(NodeSpec{3, 1, z, std::nullopt, {}});
    }
    return build_network(spec);
}

LoadGenConfig scenario_load_config(const Scenario& sc) {
    return sc.load_preset == "high_variation" ? LoadGenConfig::high_variation()
                                              : LoadGenConfig{};
}

ScenarioOutput run_scenario(const Scenario& sc, int threads) {
    validate_scenario(sc);
    const int m_max = sc.snapshot_counts.back();

    FeederNetwork net = scenario_network(sc, m_max);
    const auto profiles = synth_load_profiles(scenario_load_config(sc), net.line_count(),
                                              m_max, rng::derive(sc.master_seed, kLoadChannel));
    attach_profiles(net, profiles);

    const GroundTruthState state = solve_network(net);
    const MeasurementSet ideal = measure(state);
    const double fs_current = default_fs_current(ideal);

    double z_norm_sq = 0.0;
    for (int c = 1; c < net.node_count(); ++c) z_norm_sq += std::norm(net.line_z[c]);

    struct Job {
        std::size_t class_idx;
        int realization;
    };
    std::vector<Job> jobs;
    for (std::size_t ci = 0; ci < sc.noise_classes.size(); ++ci)
        for (int r = 0; r < sc.realizations; ++r) jobs.push_back({ci, r});

    std::vector<ScenarioOutput> partial(jobs.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= jobs.size()) return;
            const Job job = jobs[k];
            const double pct = sc.noise_classes[job.class_idx];
            ScenarioOutput& out = partial[k];

            NoiseSpec base_spec;
            base_spec.pct_fs = pct;
            base_spec.fs_current = fs_current;
            MeasurementSet noisy_full;
            if (pct > 0.0 && !sc.fresh_noise) {
                base_spec.seed = rng::derive(sc.master_seed, kNoiseChannel,
                                             rng::derive(job.class_idx, job.realization));
                noisy_full = add_noise(ideal, base_spec);
            }

            for (std::size_t si = 0; si < sc.snapshot_counts.size(); ++si) {
                const int M = sc.snapshot_counts[si];
                MeasurementSet ms;
                if (pct == 0.0) {
                    ms = ideal.prefix(M);
                } else if (sc.fresh_noise) {
                    NoiseSpec spec = base_spec;
                    spec.seed = rng::derive(sc.master_seed, kNoiseChannel,
                                            rng::derive(job.class_idx, job.realization, si));
                    ms = add_noise(ideal.prefix(M), spec);
                } else {
                    ms = noisy_full.prefix(M);
                }

                for (const AlgoConfig& cfg : sc.algorithms) {
                    const IdentifyResult res = net.is_chain()
                                                   ? identify_chain(ms, cfg)
                                                   : identify_tree(ms, net, cfg);
                    auto rows = rows_from_result(res, net, cfg, pct, job.realization, M);

                    AggregateRecord agg;
                    agg.algo = cfg.display_name();
                    agg.noise_pct = pct;
                    agg.realization = job.realization;
                    agg.snapshots = M;
                    double err_sq = 0.0;
                    for (const auto& row : rows) {
                        err_sq += std::norm(row.z_true - row.z_est);
                        agg.per_line_rel.push_back(row.rel_err);
                        agg.per_line_cond.push_back(row.cond_J);
                    }
                    agg.agg_rel_err = std::sqrt(err_sq / z_norm_sq);
                    out.aggregates.push_back(std::move(agg));
                    out.rows.insert(out.rows.end(), rows.begin(), rows.end());
                }
            }
        }
    };

    int n_threads = threads > 0 ? threads
                                : static_cast<int>(std::thread::hardware_concurrency());
    if (n_threads < 1) n_threads = 1;
    n_threads = std::min<int>(n_threads, static_cast<int>(jobs.size()));
    std::vector<std::thread> pool;
    for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    ScenarioOutput out;
    for (auto& p : partial) {
        out.rows.insert(out.rows.end(), std::make_move_iterator(p.rows.begin()),
                        std::make_move_iterator(p.rows.end()));
        out.aggregates.insert(out.aggregates.end(),
                              std::make_move_iterator(p.aggregates.begin()),
                              std::make_move_iterator(p.aggregates.end()));
    }
    auto row_key = [](const ResultRow& r) {
        return std::make_tuple(r.algo, r.noise_pct, r.realization, r.snapshots, r.line_to);
    };
    std::sort(out.rows.begin(), out.rows.end(),
              [&](const ResultRow& a, const ResultRow& b) { return row_key(a) < row_key(b); });
    auto agg_key = [](const AggregateRecord& r) {
        return std::make_tuple(r.algo, r.noise_pct, r.realization, r.snapshots);
    };
    std::sort(out.aggregates.begin(), out.aggregates.end(),
              [&](const AggregateRecord& a, const AggregateRecord& b) {
                  return agg_key(a) < agg_key(b);
              });
    return out;
}

std::vector<ErrorVsM> summarize_error_vs_m(const std::vector<AggregateRecord>& aggs) {
    if (aggs.empty()) throw IncompleteSweep("no aggregate records to summarize");
    std::map<std::tuple<std::string, double, int>, std::vector<double>> groups;
    for (const auto& a : aggs)
        groups[{a.algo, a.noise_pct, a.snapshots}].push_back(a.agg_rel_err);

    std::size_t expect = 0;
    std::vector<ErrorVsM> table;
    for (auto& [key, errs] : groups) {
        if (expect == 0) expect = errs.size();
        if (errs.size() != expect)
            throw IncompleteSweep("grid cell " + std::get<0>(key) + " at M=" +
                                  std::to_string(std::get<2>(key)) +
                                  " has a different realization count");
        ErrorVsM row;
        row.algo = std::get<0>(key);
        row.noise_pct = std::get<1>(key);
        row.snapshots = std::get<2>(key);
        double mean = 0.0;
        for (double e : errs) mean += e;
        mean /= static_cast<double>(errs.size());
        std::sort(errs.begin(), errs.end());
        const std::size_t n = errs.size();
        const double median = n % 2 ? errs[n / 2] : 0.5 * (errs[n / 2 - 1] + errs[n / 2]);
        row.mean_err_pct = 100.0 * mean;
        row.median_err_pct = 100.0 * median;
        row.realizations = static_cast<int>(n);
        table.push_back(std::move(row));
    }
    return table;
}

std::vector<ErrorVsLine> summarize_error_vs_line(const std::vector<ResultRow>& rows) {
    if (rows.empty()) throw IncompleteSweep("no rows to summarize");
    int m_max = 0;
    for (const auto& r : rows) m_max = std::max(m_max, r.snapshots);
    std::map<std::tuple<std::string, double, int, int>, std::pair<double, int>> groups;
    for (const auto& r : rows) {
        if (r.snapshots != m_max) continue;
        auto& g = groups[{r.algo, r.noise_pct, r.line_from, r.line_to}];
        g.first += r.rel_err;
        g.second += 1;
    }
    std::vector<ErrorVsLine> table;
    for (const auto& [key, sum] : groups) {
        ErrorVsLine row;
        row.algo = std::get<0>(key);
        row.noise_pct = std::get<1>(key);
        row.line_from = std::get<2>(key);
        row.line_to = std::get<3>(key);
        row.mean_rel_err = sum.first / sum.second;
        row.log10_rel_err = std::log10(std::max(row.mean_rel_err, 1e-300));
        table.push_back(std::move(row));
    }
    return table;
}

std::vector<CondVsLine> summarize_cond_vs_line(const std::vector<ResultRow>& rows) {
    if (rows.empty()) throw IncompleteSweep("no rows to summarize");
    int m_max = 0;
    for (const auto& r : rows) m_max = std::max(m_max, r.snapshots);
    // The two-column measurement matrix only: X/R-reduced runs pin cond to 1.
    std::map<std::pair<int, int>, std::pair<double, int>> groups;
    for (const auto& r : rows) {
        if (r.snapshots != m_max || r.algo.find("_xr") != std::string::npos) continue;
        auto& g = groups[{r.line_from, r.line_to}];
        g.first += r.cond_J;
        g.second += 1;
    }
    std::vector<CondVsLine> table;
    for (const auto& [key, sum] : groups)
        table.push_back(CondVsLine{key.first, key.second, sum.first / sum.second});
    return table;
}

void write_error_vs_m_csv(const std::string& path, const std::vector<ErrorVsM>& t) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << "algo,noise_pct_fs,snapshots,mean_rel_err_pct,median_rel_err_pct,realizations\n";
    char buf[256];
    for (const auto& r : t) {
        std::snprintf(buf, sizeof buf, "%s,%.17g,%d,%.17g,%.17g,%d\n", r.algo.c_str(),
                      r.noise_pct, r.snapshots, r.mean_err_pct, r.median_err_pct,
                      r.realizations);
        out << buf;
    }
}

void write_error_vs_line_csv(const std::string& path, const std::vector<ErrorVsLine>& t) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << "algo,noise_pct_fs,line_from,line_to,mean_rel_err,log10_rel_err\n";
    char buf[256];
    for (const auto& r : t) {
        std::snprintf(buf, sizeof buf, "%s,%.17g,%d,%d,%.17g,%.17g\n", r.algo.c_str(),
                      r.noise_pct, r.line_from, r.line_to, r.mean_rel_err, r.log10_rel_err);
        out << buf;
    }
}

void write_cond_vs_line_csv(const std::string& path, const std::vector<CondVsLine>& t) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << "line_from,line_to,mean_cond_J\n";
    char buf[128];
    for (const auto& r : t) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.17g\n", r.line_from, r.line_to, r.mean_cond);
        out << buf;
    }
}

void write_scenario_outputs(const std::string& out_dir, const ScenarioOutput& out) {
    std::filesystem::create_directories(out_dir);
    write_results_csv(out_dir + "/records.csv", out.rows);
    write_error_vs_m_csv(out_dir + "/error_vs_m.csv", summarize_error_vs_m(out.aggregates));
    write_error_vs_line_csv(out_dir + "/error_vs_line.csv",
                            summarize_error_vs_line(out.rows));
    write_cond_vs_line_csv(out_dir + "/cond_vs_line.csv", summarize_cond_vs_line(out.rows));
}

} // namespace lvgrid
