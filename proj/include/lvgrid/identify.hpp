#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lvgrid/network.hpp"
#include "lvgrid/simulator.hpp"
#include "lvgrid/types.hpp"

namespace lvgrid {

enum class Variant { LBCI, LBCI_OLD, BCI };

enum class RegKind {
    Q2Image,  // D = J Q2, the cost's own second-term matrix
    XrRow     // D = [1, -k], encoding prior X/R knowledge
};

struct AlgoConfig {
    Variant variant = Variant::BCI;
    std::optional<double> xr_ratio;        // reactance-to-resistance ratio k
    std::map<int, double> xr_overrides;    // per-line (child node id) k
    double mu = 0.0;                       // regularization weight in [0, 1]
    RegKind reg = RegKind::Q2Image;
    double alpha = 0.1;                    // fixed-point step size
    double eps = 1e-8;                     // fixed-point gap tolerance
    int max_iters = 200;
    bool clamp_gamma = true;               // floor the gamma radicand at zero
    std::string label;                     // optional display-name override

    std::optional<double> xr_for_line(int child) const;
    std::string display_name() const;      // e.g. "bci", "lbci_xr", or label
    std::string variant_name() const;      // "lbci" | "lbci_old" | "bci"
};

// One power line's data: sending/receiving RMS voltages and the local line
// current (receiving-end frame), all of length M >= 2.
struct LineProblem {
    RVec v_up, v_down;
    CVec j;
    std::size_t size() const { return j.size(); }
};

struct LineEstimate {
    Complex z_hat{};
    RVec gamma;              // cos(delta) per snapshot; all ones for LBCI family
    int iterations = 0;
    double cost_full = 0.0;  // N(z, gamma), the full nonlinear per-line cost
    double cond_J = 0.0;     // condition number of the measurement matrix
    double final_gap = 0.0;
    bool converged = true;
};

// X/R-reduced measurement columns: z = r (1 + i k), one real unknown.
struct XrReduced {
    RVec col_q1;  // Re(j) - k Im(j)
    RVec col_q2;  // k Re(j) + Im(j)
    double k = 0.0;
};

// Throws ZeroColumn when the combined column vanishes.
XrReduced apply_xr(const LineProblem& p, double k);

LineEstimate lbci_line(const LineProblem& p, const AlgoConfig& cfg);
LineEstimate lbci_old_line(const LineProblem& p, const AlgoConfig& cfg);
LineEstimate bci_line(const LineProblem& p, const AlgoConfig& cfg);
LineEstimate solve_line(const LineProblem& p, const AlgoConfig& cfg);

// The full nonlinear cost N(z, gamma) evaluated on the problem's data rows.
double line_cost(const LineProblem& p, Complex z, const RVec& gamma);

// Per-snapshot phase increments of the line. LBCI variants use the small-angle
// form J Q2 z / v_up; BCI uses asin of the same ratio.
RVec phase_increments(const LineEstimate& est, const LineProblem& p, const AlgoConfig& cfg);

// Current contribution a solved line passes to its parent node. Parents with a
// single child receive the backward-model propagation with the phase term
// excluded (chain rule); parents with several children receive the current
// rotated by e^{-i delta} reconstructed from (gamma, sign). LBCI variants
// never rotate here; branch alignment happens in merge_children.
CVec line_contribution(const LineProblem& p, const LineEstimate& est, const AlgoConfig& cfg,
                       std::size_t parent_child_count);

struct ChildContribution {
    int child = 0;
    CVec j;
    RVec delta;  // accumulated phase increments from the subtree below
};

// Kirchhoff merge at a node: local consumed current plus child contributions
// (ascending child id). For LBCI variants with several children the reference
// branch (largest mean current magnitude) fixes the frame and the other
// branches are rotated onto it. Returns the merged current and the accumulated
// delta the merged subtree carries upstream.
std::pair<CVec, RVec> merge_children(const CVec& i_local,
                                     const std::vector<ChildContribution>& contribs,
                                     const AlgoConfig& cfg);

struct IdentifyResult {
    // Indexed by child node id (slot 0 unused).
    std::vector<LineEstimate> lines;
    std::vector<CVec> propagated_j;  // line current used for each edge
    std::vector<RVec> delta;         // per-edge phase increments
};

// Chain feeder: lines processed N -> 1 with variant-specific propagation.
IdentifyResult identify_chain(const MeasurementSet& ms, const AlgoConfig& cfg);

// Tree feeder: per-branch identification leaf-to-root with phase matching at
// branching nodes. The network supplies topology only, never impedances.
IdentifyResult identify_tree(const MeasurementSet& ms, const FeederNetwork& net,
                             const AlgoConfig& cfg);

// results CSV row (one per line per run)
struct ResultRow {
    std::string algo;     // display name, e.g. "bci_xr"
    std::string variant;  // "lbci" | "lbci_old" | "bci"
    double noise_pct = 0.0;
    int realization = 0;
    int snapshots = 0;
    int line_from = 0, line_to = 0;
    Complex z_true{}, z_est{};
    double rel_err = 0.0;
    double gamma_min = 1.0;
    int iters = 0;
    double cond_J = 0.0;
    double cost_full = 0.0;
};

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows);

std::vector<ResultRow> rows_from_result(const IdentifyResult& res, const FeederNetwork& net,
                                        const AlgoConfig& cfg, double noise_pct,
                                        int realization, int snapshots);

} // namespace lvgrid
