#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lvgrid/identify.hpp"
#include "lvgrid/network.hpp"
#include "lvgrid/simulator.hpp"

namespace lvgrid {

struct NetworkCfg {
    std::string kind = "chain";  // "chain" | "tree_fig2"
    int n_lines = 10;
    double length_m = 50.0;
    double ohms_per_km = 0.4;
    double xr_ratio = 0.7;
    double nominal_voltage = 230.0;

    Complex line_impedance() const;
};

struct Scenario {
    std::string name;
    NetworkCfg network;
    std::string load_preset = "normal";  // "normal" | "high_variation"
    std::vector<double> noise_classes;   // pct_fs fractions; 0 means noiseless
    std::vector<int> snapshot_counts;    // non-decreasing sweep
    int realizations = 1;
    std::vector<AlgoConfig> algorithms;
    std::uint64_t master_seed = 0;
    bool fresh_noise = false;  // redraw noise per sweep point instead of
                               // growing one noisy dataset by prefixes
};

Scenario load_scenario_json(const std::string& path);
void validate_scenario(const Scenario& sc);

FeederNetwork scenario_network(const Scenario& sc, int snapshots);
LoadGenConfig scenario_load_config(const Scenario& sc);

// One (algorithm, noise class, realization, M) cell.
struct AggregateRecord {
    std::string algo;
    double noise_pct = 0.0;
    int realization = 0;
    int snapshots = 0;
    double agg_rel_err = 0.0;           // ||z - z_hat||_2 / ||z||_2, stacked lines
    std::vector<double> per_line_rel;   // index: child node id - 1
    std::vector<double> per_line_cond;
};

struct ScenarioOutput {
    std::vector<ResultRow> rows;              // one row per line per cell
    std::vector<AggregateRecord> aggregates;  // one per cell
};

// Deterministic under the master seed; (class, realization) cells run on a
// small worker pool and outputs are canonicalized before returning.
ScenarioOutput run_scenario(const Scenario& sc, int threads = 0);

struct ErrorVsM {
    std::string algo;
    double noise_pct = 0.0;
    int snapshots = 0;
    double mean_err_pct = 0.0;    // percent, as plotted
    double median_err_pct = 0.0;  // robustness companion to the mean
    int realizations = 0;
};

struct ErrorVsLine {
    std::string algo;
    double noise_pct = 0.0;
    int line_from = 0, line_to = 0;
    double mean_rel_err = 0.0;
    double log10_rel_err = 0.0;
};

struct CondVsLine {
    int line_from = 0, line_to = 0;
    double mean_cond = 0.0;
};

// Figure-data tables. All throw IncompleteSweep on an empty or ragged record
// set (a grid cell missing some realizations).
std::vector<ErrorVsM> summarize_error_vs_m(const std::vector<AggregateRecord>& aggs);
std::vector<ErrorVsLine> summarize_error_vs_line(const std::vector<ResultRow>& rows);
std::vector<CondVsLine> summarize_cond_vs_line(const std::vector<ResultRow>& rows);

void write_error_vs_m_csv(const std::string& path, const std::vector<ErrorVsM>& t);
void write_error_vs_line_csv(const std::string& path, const std::vector<ErrorVsLine>& t);
void write_cond_vs_line_csv(const std::string& path, const std::vector<CondVsLine>& t);

// Full emission: records.csv, error_vs_m.csv, error_vs_line.csv,
// cond_vs_line.csv under out_dir.
void write_scenario_outputs(const std::string& out_dir, const ScenarioOutput& out);

} // namespace lvgrid
