#include "lvgrid/identify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "lvgrid/errors.hpp"
#include "lvgrid/fixedpoint.hpp"
#include "lvgrid/lstsq.hpp"

namespace lvgrid {

std::optional<double> AlgoConfig::xr_for_line(int child) const {
    auto it = xr_overrides.find(child);
    if (it != xr_overrides.end()) return it->second;
    return xr_ratio;
}

std::string AlgoConfig::variant_name() const {
    switch (variant) {
        case Variant::LBCI: return "lbci";
        case Variant::LBCI_OLD: return "lbci_old";
        case Variant::BCI: return "bci";
    }
    return "?";
}

std::string AlgoConfig::display_name() const {
    if (!label.empty()) return label;
    std::string s = variant_name();
    if (xr_ratio || !xr_overrides.empty()) s += "_xr";
    return s;
}

XrReduced apply_xr(const LineProblem& p, double k) {
    if (!(k > 0.0)) throw InvalidConfig("X/R ratio must be positive");
    XrReduced r;
    r.k = k;
    r.col_q1.resize(p.size());
    r.col_q2.resize(p.size());
    double ss = 0.0;
    for (std::size_t m = 0; m < p.size(); ++m) {
        r.col_q1[m] = p.j[m].real() - k * p.j[m].imag();
        r.col_q2[m] = k * p.j[m].real() + p.j[m].imag();
        ss += r.col_q1[m] * r.col_q1[m];
    }
    if (ss == 0.0) throw ZeroColumn("X/R-combined measurement column vanishes");
    return r;
}

namespace {

struct LineSystem {
    std::vector<RVec> a1;  // data rows first, regularization rows appended
    std::vector<RVec> a2;  // data rows only
    std::size_t data_rows = 0;
    std::optional<double> k;  // set when the X/R reduction is active
};

void validate_problem(const LineProblem& p) {
    const std::size_t M = p.size();
    if (M < 2) throw InvalidConfig("line problem needs at least two snapshots");
    if (p.v_up.size() != M || p.v_down.size() != M)
        throw InconsistentSnapshotLengths("line problem vectors disagree in length");
    for (std::size_t m = 0; m < M; ++m)
        if (!(p.v_up[m] > 0.0) || !(p.v_down[m] > 0.0))
            throw InvalidConfig("RMS voltages must be positive");
}

LineSystem build_system(const LineProblem& p, const AlgoConfig& cfg) {
    validate_problem(p);
    LineSystem sys;
    sys.data_rows = p.size();
    if (cfg.xr_ratio) {
        const XrReduced xr = apply_xr(p, *cfg.xr_ratio);
        sys.a1 = {xr.col_q1};
        sys.a2 = {xr.col_q2};
        sys.k = xr.k;
    } else {
        const Mat2Cols a1 = q1_matrix(p.j);
        const Mat2Cols a2 = q2_matrix(p.j);
        sys.a1 = {a1.c0, a1.c1};
        sys.a2 = {a2.c0, a2.c1};
    }
    if (cfg.mu > 0.0) {
        if (cfg.mu > 1.0) throw InvalidConfig("mu must lie in [0, 1]");
        const double w = std::sqrt(cfg.mu);
        if (cfg.reg == RegKind::Q2Image) {
            for (std::size_t c = 0; c < sys.a1.size(); ++c)
                for (std::size_t m = 0; m < sys.data_rows; ++m)
                    sys.a1[c].push_back(w * sys.a2[c][m]);
        } else {
            if (!cfg.xr_ratio)
                throw InvalidConfig("RegKind::XrRow requires a configured X/R ratio");
            const double k = *cfg.xr_ratio;
            if (sys.k) {
                // One unknown r with z = r (1 + i k): the row [1, -k] becomes
                // the scalar coefficient 1 - k^2.
                sys.a1[0].push_back(w * (1.0 - k * k));
            } else {
                sys.a1[0].push_back(w * 1.0);
                sys.a1[1].push_back(w * -k);
            }
        }
    }
    return sys;
}

Complex unknowns_to_z(const RVec& x, const LineSystem& sys) {
    if (sys.k) return Complex(x[0], x[0] * *sys.k);
    return Complex(x[0], x[1]);
}

double cond_of(const LineProblem& p, const LineSystem& sys) {
    if (sys.k) return 1.0;  // single column
    return condition_number(j_matrix(p.j));
}

} // namespace

double line_cost(const LineProblem& p, Complex z, const RVec& gamma) {
    double cost = 0.0;
    for (std::size_t m = 0; m < p.size(); ++m) {
        const Complex jz = p.j[m] * z;
        const double g = std::min(std::max(gamma[m], 0.0), 1.0);
        const double t1 = p.v_up[m] * g - p.v_down[m] - jz.real();
        const double t2 = p.v_up[m] * std::sqrt(1.0 - g * g) - jz.imag();
        cost += t1 * t1 + t2 * t2;
    }
    return cost;
}

LineEstimate lbci_line(const LineProblem& p, const AlgoConfig& cfg) {
    LineSystem sys = build_system(p, cfg);
    // Full linearized cost: the natural second term enters as extra rows.
    std::vector<RVec> cols = sys.a1;
    for (std::size_t c = 0; c < cols.size(); ++c)
        for (std::size_t m = 0; m < sys.data_rows; ++m) cols[c].push_back(sys.a2[c][m]);
    RVec b(sys.data_rows);
    for (std::size_t m = 0; m < sys.data_rows; ++m) b[m] = p.v_up[m] - p.v_down[m];

    const RVec x = lstsq_cols(cols, b, sys.data_rows);
    LineEstimate est;
    est.z_hat = unknowns_to_z(x, sys);
    est.gamma.assign(sys.data_rows, 1.0);
    est.iterations = 1;
    est.cond_J = cond_of(p, sys);
    est.cost_full = line_cost(p, est.z_hat, est.gamma);
    return est;
}

LineEstimate lbci_old_line(const LineProblem& p, const AlgoConfig& cfg) {
    LineSystem sys = build_system(p, cfg);
    RVec b(sys.data_rows);
    for (std::size_t m = 0; m < sys.data_rows; ++m) b[m] = p.v_up[m] - p.v_down[m];

    const RVec x = lstsq_cols(sys.a1, b, sys.data_rows);
    LineEstimate est;
    est.z_hat = unknowns_to_z(x, sys);
    est.gamma.assign(sys.data_rows, 1.0);
    est.iterations = 1;
    est.cond_J = cond_of(p, sys);
    est.cost_full = line_cost(p, est.z_hat, est.gamma);
    return est;
}

LineEstimate bci_line(const LineProblem& p, const AlgoConfig& cfg) {
    LineSystem sys = build_system(p, cfg);
    const std::size_t M = sys.data_rows;

    ConstrainedLS prob;
    prob.a_cols = sys.a1;
    prob.b_diag = p.v_up;
    prob.c.resize(sys.a1[0].size(), 0.0);
    for (std::size_t m = 0; m < M; ++m) prob.c[m] = -p.v_down[m];

    RVec inv_v_sq(M);
    for (std::size_t m = 0; m < M; ++m) inv_v_sq[m] = 1.0 / (p.v_up[m] * p.v_up[m]);
    const std::vector<RVec>& a2 = sys.a2;
    const bool clamp = cfg.clamp_gamma;
    prob.g = [&a2, &inv_v_sq, clamp, M](const RVec& x) {
        RVec gamma(M);
        for (std::size_t m = 0; m < M; ++m) {
            double w = 0.0;
            for (std::size_t c = 0; c < a2.size(); ++c) w += a2[c][m] * x[c];
            double rad = 1.0 - w * w * inv_v_sq[m];
            if (clamp && rad < 0.0) rad = 0.0;
            gamma[m] = std::sqrt(rad);
        }
        return gamma;
    };

    const RVec y0(M, 1.0);
    const FixedPointResult fp =
        fixed_point_iterate(prob, cfg.alpha, cfg.eps, cfg.max_iters, y0);

    LineEstimate est;
    est.z_hat = unknowns_to_z(fp.x_star, sys);
    est.gamma = fp.y_star;
    est.iterations = fp.iterations;
    est.final_gap = fp.final_gap;
    est.converged = fp.converged;
    est.cond_J = cond_of(p, sys);
    est.cost_full = line_cost(p, est.z_hat, est.gamma);
    return est;
}

LineEstimate solve_line(const LineProblem& p, const AlgoConfig& cfg) {
    switch (cfg.variant) {
        case Variant::LBCI: return lbci_line(p, cfg);
        case Variant::LBCI_OLD: return lbci_old_line(p, cfg);
        case Variant::BCI: return bci_line(p, cfg);
    }
    throw InvalidConfig("unknown variant");
}

RVec phase_increments(const LineEstimate& est, const LineProblem& p, const AlgoConfig& cfg) {
    RVec inc(p.size());
    for (std::size_t m = 0; m < p.size(); ++m) {
        const double s = (p.j[m] * est.z_hat).imag() / p.v_up[m];
        if (cfg.variant == Variant::BCI)
            inc[m] = std::asin(std::min(std::max(s, -1.0), 1.0));
        else
            inc[m] = s;
    }
    return inc;
}

CVec line_contribution(const LineProblem& p, const LineEstimate& est, const AlgoConfig& cfg,
                       std::size_t parent_child_count) {
    if (cfg.variant != Variant::BCI) return p.j;

    CVec out(p.size());
    if (parent_child_count <= 1) {
        // Backward model with the phase term excluded:
        // j / e^{i delta} = j v_down / v_up + conj(z) |j|^2 / v_up.
        const Complex zc = std::conj(est.z_hat);
        for (std::size_t m = 0; m < p.size(); ++m)
            out[m] = p.j[m] * (p.v_down[m] / p.v_up[m]) +
                     zc * (std::norm(p.j[m]) / p.v_up[m]);
        return out;
    }
    // Branch merge: rotate by e^{-i delta} rebuilt from (gamma, sign of sin).
    for (std::size_t m = 0; m < p.size(); ++m) {
        const double s = (p.j[m] * est.z_hat).imag() / p.v_up[m];
        const double g = std::min(std::max(est.gamma[m], 0.0), 1.0);
        const double sin_d = std::copysign(std::sqrt(1.0 - g * g), s);
        out[m] = p.j[m] * Complex(g, -sin_d);
    }
    return out;
}

std::pair<CVec, RVec> merge_children(const CVec& i_local,
                                     const std::vector<ChildContribution>& contribs,
                                     const AlgoConfig& cfg) {
    const std::size_t M = i_local.size();
    CVec agg = i_local;
    RVec delta(M, 0.0);
    if (contribs.empty()) return {std::move(agg), std::move(delta)};

    std::vector<const ChildContribution*> order;
    order.reserve(contribs.size());
    for (const auto& c : contribs) order.push_back(&c);
    std::sort(order.begin(), order.end(),
              [](const ChildContribution* a, const ChildContribution* b) {
                  return a->child < b->child;
              });

    // Reference branch: largest mean current magnitude, ties to the lowest id.
    const ChildContribution* ref = order.front();
    double best = -1.0;
    for (const auto* c : order) {
        double mean = 0.0;
        for (const Complex& v : c->j) mean += std::abs(v);
        mean /= static_cast<double>(M);
        if (mean > best + 1e-15 * std::max(best, 1.0)) {
            best = mean;
            ref = c;
        }
    }

    const bool match = cfg.variant != Variant::BCI && order.size() > 1;
    for (const auto* c : order) {
        if (match && c != ref) {
            for (std::size_t m = 0; m < M; ++m) {
                const double phi = -(ref->delta[m] - c->delta[m]);
                agg[m] += c->j[m] * Complex(std::cos(phi), std::sin(phi));
            }
        } else {
            for (std::size_t m = 0; m < M; ++m) agg[m] += c->j[m];
        }
    }
    delta = ref->delta;
    return {std::move(agg), std::move(delta)};
}

namespace {

void validate_measurements(const MeasurementSet& ms, int nodes) {
    if (ms.nodes() != nodes)
        throw InconsistentSnapshotLengths("measurement set does not cover all nodes");
    const int M = ms.snapshots();
    if (M < 2) throw InvalidConfig("need at least two snapshots");
    for (int id = 1; id < nodes; ++id)
        if (static_cast<int>(ms.v[id].size()) != M ||
            static_cast<int>(ms.i_mag[id].size()) != M ||
            static_cast<int>(ms.theta[id].size()) != M)
            throw InconsistentSnapshotLengths("snapshot count differs at node " +
                                              std::to_string(id));
}

IdentifyResult identify_impl(const MeasurementSet& ms, const TraversalPlan& plan,
                             const AlgoConfig& cfg) {
    const int nodes = static_cast<int>(plan.parent.size());
    validate_measurements(ms, nodes);

    IdentifyResult res;
    res.lines.resize(nodes);
    res.propagated_j.resize(nodes);
    res.delta.resize(nodes);
    std::vector<std::vector<ChildContribution>> contribs(nodes);

    for (int c : plan.edges_leaf_to_root) {
        const int p = plan.parent[c];
        AlgoConfig cfg_line = cfg;
        cfg_line.xr_ratio = cfg.xr_for_line(c);
        cfg_line.xr_overrides.clear();

        auto [agg, delta_base] = merge_children(ms.local_current(c), contribs[c], cfg_line);
        LineProblem prob;
        prob.v_up = (p == 0) ? ms.v0 : ms.v[p];
        prob.v_down = ms.v[c];
        prob.j = std::move(agg);

        LineEstimate est;
        try {
            est = solve_line(prob, cfg_line);
        } catch (const NumericalError& e) {
            throw NumericalError("line (" + std::to_string(p) + "," + std::to_string(c) +
                                 "): " + e.what());
        }
        const RVec inc = phase_increments(est, prob, cfg_line);

        if (p != 0) {
            ChildContribution up;
            up.child = c;
            up.j = line_contribution(prob, est, cfg_line, plan.children[p].size());
            up.delta.resize(inc.size());
            for (std::size_t m = 0; m < inc.size(); ++m)
                up.delta[m] = delta_base[m] + inc[m];
            contribs[p].push_back(std::move(up));
        }

        res.lines[c] = std::move(est);
        res.delta[c] = inc;
        res.propagated_j[c] = std::move(prob.j);
    }
    return res;
}

} // namespace

IdentifyResult identify_chain(const MeasurementSet& ms, const AlgoConfig& cfg) {
    const int nodes = ms.nodes();
    if (nodes < 2) throw InvalidConfig("chain needs at least one line");
    TraversalPlan plan;
    plan.parent.resize(nodes);
    plan.children.resize(nodes);
    plan.parent[0] = -1;
    for (int id = 1; id < nodes; ++id) {
        plan.parent[id] = id - 1;
        plan.children[id - 1] = {id};
    }
    for (int id = nodes - 1; id >= 1; --id) plan.edges_leaf_to_root.push_back(id);
    return identify_impl(ms, plan, cfg);
}

IdentifyResult identify_tree(const MeasurementSet& ms, const FeederNetwork& net,
                             const AlgoConfig& cfg) {
    return identify_impl(ms, traversal_plan(net), cfg);
}

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << "algo,variant,noise_pct,realization,snapshots,line_from,line_to,"
           "z_re_true,z_im_true,z_re_est,z_im_est,rel_err,gamma_min,iters,cond_J,cost_full\n";
    char buf[512];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf,
                      "%s,%s,%.17g,%d,%d,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g,%.17g\n",
                      r.algo.c_str(), r.variant.c_str(), r.noise_pct, r.realization,
                      r.snapshots, r.line_from, r.line_to, r.z_true.real(), r.z_true.imag(),
                      r.z_est.real(), r.z_est.imag(), r.rel_err, r.gamma_min, r.iters,
                      r.cond_J, r.cost_full);
        out << buf;
    }
}

std::vector<ResultRow> rows_from_result(const IdentifyResult& res, const FeederNetwork& net,
                                        const AlgoConfig& cfg, double noise_pct,
                                        int realization, int snapshots) {
    std::vector<ResultRow> rows;
    for (int c = 1; c < net.node_count(); ++c) {
        const LineEstimate& est = res.lines[c];
        ResultRow r;
        r.algo = cfg.display_name();
        r.variant = cfg.variant_name();
        r.noise_pct = noise_pct;
        r.realization = realization;
        r.snapshots = snapshots;
        r.line_from = net.parent[c];
        r.line_to = c;
        r.z_true = net.line_z[c];
        r.z_est = est.z_hat;
        r.rel_err = std::abs(r.z_true - r.z_est) / std::abs(r.z_true);
        r.gamma_min = est.gamma.empty()
                          ? 1.0
                          : *std::min_element(est.gamma.begin(), est.gamma.end());
        r.iters = est.iterations;
        r.cond_J = est.cond_J;
        r.cost_full = est.cost_full;
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace lvgrid
