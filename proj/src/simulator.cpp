#include "lvgrid/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lvgrid/errors.hpp"
#include "lvgrid/rng.hpp"

namespace lvgrid {

Complex load_impedance(const LoadModel& lm, int m, double v_nom) {
    const double p = std::max(lm.active_power_w[m], 1.0);
    const double pf = lm.power_factor[m];
    const double sign = lm.lagging ? 1.0 : -1.0;
    const Complex s = p * Complex(1.0, sign * std::tan(std::acos(pf)));
    return v_nom * v_nom / std::conj(s);
}

GroundTruthState solve_network(const FeederNetwork& net) {
    const int n = net.node_count();
    const int M = net.snapshots;
    GroundTruthState st;
    st.v.assign(n, CVec(M));
    st.i.assign(n, CVec(M));
    st.j.assign(n, CVec(M));

    const TraversalPlan plan = traversal_plan(net);

    std::vector<Complex> y_load(n), y_sub(n), y_branch(n);
    for (int m = 0; m < M; ++m) {
        for (int id = 0; id < n; ++id) {
            y_load[id] = net.loads[id]
                             ? 1.0 / load_impedance(*net.loads[id], m, net.nominal_voltage)
                             : Complex{};
            y_sub[id] = y_load[id];
        }
        // Leaf-to-root elimination: fold each subtree into a driving-point
        // admittance seen from its parent through the connecting line.
        for (int c : plan.edges_leaf_to_root) {
            const Complex denom = 1.0 + net.line_z[c] * y_sub[c];
            if (std::abs(denom) == 0.0)
                throw SingularSystem("resonant line/load combination at node " +
                                     std::to_string(c));
            y_branch[c] = y_sub[c] / denom;
            y_sub[net.parent[c]] += y_branch[c];
        }
        // Root-to-leaf substitution.
        st.v[0][m] = Complex(net.nominal_voltage, 0.0);
        for (auto it = plan.edges_leaf_to_root.rbegin();
             it != plan.edges_leaf_to_root.rend(); ++it) {
            const int c = *it;
            const Complex jg = st.v[net.parent[c]][m] * y_branch[c];
            st.j[c][m] = jg;
            st.v[c][m] = st.v[net.parent[c]][m] - jg * net.line_z[c];
            st.i[c][m] = st.v[c][m] * y_load[c];
        }
        Complex inj{};
        for (int c : net.children[0]) inj -= st.j[c][m];
        st.i[0][m] = inj;
    }
    return st;
}

MeasurementSet MeasurementSet::prefix(int m) const {
    MeasurementSet out;
    out.v0.assign(v0.begin(), v0.begin() + m);
    out.v.resize(v.size());
    out.i_mag.resize(i_mag.size());
    out.theta.resize(theta.size());
    for (std::size_t k = 1; k < v.size(); ++k) {
        out.v[k].assign(v[k].begin(), v[k].begin() + m);
        out.i_mag[k].assign(i_mag[k].begin(), i_mag[k].begin() + m);
        out.theta[k].assign(theta[k].begin(), theta[k].begin() + m);
    }
    return out;
}

CVec MeasurementSet::local_current(int node) const {
    return from_polar(i_mag[node], theta[node]);
}

MeasurementSet measure(const GroundTruthState& state) {
    const int n = state.nodes();
    const int M = state.snapshots();
    MeasurementSet ms;
    ms.v0.resize(M);
    ms.v.resize(n);
    ms.i_mag.resize(n);
    ms.theta.resize(n);
    for (int m = 0; m < M; ++m) ms.v0[m] = std::abs(state.v[0][m]);
    for (int id = 1; id < n; ++id) {
        ms.v[id].resize(M);
        ms.i_mag[id].resize(M);
        ms.theta[id].resize(M);
        for (int m = 0; m < M; ++m) {
            ms.v[id][m] = std::abs(state.v[id][m]);
            ms.i_mag[id][m] = std::abs(state.i[id][m]);
            ms.theta[id][m] =
                wrap_angle(std::arg(state.i[id][m]) - std::arg(state.v[id][m]));
        }
    }
    return ms;
}

double default_fs_current(const MeasurementSet& ideal) {
    double peak = 0.0;
    for (int id = 1; id < ideal.nodes(); ++id)
        for (double a : ideal.i_mag[id]) peak = std::max(peak, a);
    return 1.2 * peak;
}

namespace {
enum Channel : std::uint64_t { kVoltage = 0, kCurrent = 1, kAngle = 2 };
}

MeasurementSet add_noise(const MeasurementSet& ms, const NoiseSpec& spec) {
    MeasurementSet out = ms;
    if (spec.pct_fs == 0.0) return out;
    const double sv = spec.sigma_voltage();
    const double si = spec.sigma_current();
    const double sa = spec.sigma_angle();

    rng::Stream v0s{rng::derive(spec.seed, 0, kVoltage)};
    for (int m = 0; m < ms.snapshots(); ++m) out.v0[m] += sv * v0s.normal(m);
    for (int id = 1; id < ms.nodes(); ++id) {
        rng::Stream vs{rng::derive(spec.seed, id, kVoltage)};
        rng::Stream is{rng::derive(spec.seed, id, kCurrent)};
        rng::Stream as{rng::derive(spec.seed, id, kAngle)};
        for (int m = 0; m < ms.snapshots(); ++m) {
            out.v[id][m] += sv * vs.normal(m);
            // RMS readings stay non-negative; meters clip at zero.
            out.i_mag[id][m] = std::max(0.0, out.i_mag[id][m] + si * is.normal(m));
            out.theta[id][m] += sa * as.normal(m);
        }
    }
    return out;
}

PropagationResult backward_propagate(const std::vector<RVec>& v_rms,
                                     const std::vector<CVec>& i_local,
                                     const FeederNetwork& net) {
    const int n = net.node_count();
    const int M = static_cast<int>(v_rms[0].size());
    PropagationResult res;
    res.delta.assign(n, RVec(M, 0.0));
    res.j_local.assign(n, CVec(M));

    const TraversalPlan plan = traversal_plan(net);
    std::vector<CVec> agg(n);
    for (int id = 1; id < n; ++id) agg[id] = i_local[id];

    for (int c : plan.edges_leaf_to_root) {
        const int p = net.parent[c];
        for (int m = 0; m < M; ++m) {
            // v_up e^{i delta} = v_down + j z  (all local to the receiving node)
            const Complex lifted = Complex(v_rms[c][m], 0.0) + agg[c][m] * net.line_z[c];
            res.delta[c][m] = std::arg(lifted);
            res.j_local[c][m] = agg[c][m];
            const double mag = std::abs(lifted);
            const Complex rot = mag == 0.0 ? Complex(1.0, 0.0) : std::conj(lifted) / mag;
            if (p >= 1) agg[p][m] += agg[c][m] * rot;
        }
    }
    return res;
}

PropagationResult forward_propagate(const RVec& v0_rms, const CVec& j1_local,
                                    const std::vector<RVec>& v_rms,
                                    const std::vector<CVec>& i_local,
                                    const FeederNetwork& net) {
    if (!net.is_chain())
        throw BranchingUnsupported("forward propagation is defined for chain feeders only");
    const int n = net.node_count();
    const int M = static_cast<int>(v0_rms.size());
    PropagationResult res;
    res.delta.assign(n, RVec(M, 0.0));
    res.j_local.assign(n, CVec(M));

    CVec j = j1_local;  // line current in the sending-end frame
    for (int node = 1; node < n; ++node) {
        res.j_local[node] = j;
        const RVec& v_up = (node == 1) ? v0_rms : v_rms[node - 1];
        CVec j_next(M);
        for (int m = 0; m < M; ++m) {
            // v_{n-1} - j z = v_n e^{-i delta}
            const Complex rhs = Complex(v_up[m], 0.0) - j[m] * net.line_z[node];
            res.delta[node][m] = -std::arg(rhs);
            const double mag = std::abs(rhs);
            const Complex unit = mag == 0.0 ? Complex(1.0, 0.0) : rhs / mag;
            // e^{i delta} = conj(unit); j_{n+1} = j e^{i delta} - i_n
            j_next[m] = j[m] * std::conj(unit) - i_local[node][m];
        }
        j = std::move(j_next);
    }
    return res;
}

double power_flow_check(const GroundTruthState& state, const FeederNetwork& net) {
    const int n = net.node_count();
    const int M = state.snapshots();
    double worst = 0.0;
    for (int m = 0; m < M; ++m) {
        for (int c = 1; c < n; ++c) {
            const int p = net.parent[c];
            const Complex z = net.line_z[c];
            const Complex jg = state.j[c][m];
            const Complex s = std::conj(jg) * state.v[c][m];  // receiving-end power
            const double lhs = std::norm(state.v[p][m]);
            const double rhs = std::norm(state.v[c][m]) + 2.0 * (s * std::conj(z)).real() +
                               std::norm(jg * z);
            worst = std::max(worst, std::abs(lhs - rhs) / std::max(lhs, 1e-30));
        }
        for (int id = 0; id < n; ++id) {
            Complex in_flow{};
            if (id >= 1) in_flow = std::conj(state.j[id][m]) * state.v[id][m];
            Complex out_flow{};
            double scale = std::abs(in_flow);
            for (int c : net.children[id]) {
                const Complex s = std::conj(state.j[c][m]) * state.v[c][m];
                out_flow += s + std::norm(state.j[c][m]) * net.line_z[c];
                scale = std::max(scale, std::abs(s));
            }
            const Complex s_n = std::conj(state.i[id][m]) * state.v[id][m];
            scale = std::max(scale, std::abs(s_n));
            const double resid = std::abs(in_flow - out_flow - s_n);
            if (scale > 0.0) worst = std::max(worst, resid / scale);
        }
    }
    return worst;
}

double kirchhoff_check(const GroundTruthState& state, const FeederNetwork& net) {
    const int n = net.node_count();
    const int M = state.snapshots();
    double worst = 0.0;
    for (int m = 0; m < M; ++m) {
        double imax = 0.0;
        for (int id = 0; id < n; ++id) imax = std::max(imax, std::abs(state.i[id][m]));
        for (int id = 1; id < n; ++id) imax = std::max(imax, std::abs(state.j[id][m]));
        for (int id = 0; id < n; ++id) {
            Complex balance = (id >= 1 ? state.j[id][m] : Complex{}) - state.i[id][m];
            for (int c : net.children[id]) balance -= state.j[c][m];
            if (imax > 0.0) worst = std::max(worst, std::abs(balance) / imax);
        }
        for (int c = 1; c < n; ++c) {
            const Complex drop =
                state.v[net.parent[c]][m] - state.v[c][m] - state.j[c][m] * net.line_z[c];
            worst = std::max(worst, std::abs(drop) / std::abs(state.v[net.parent[c]][m]));
        }
    }
    return worst;
}

void write_measurements_csv(const std::string& path, const MeasurementSet& ms) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << "snapshot,node,v_rms,i_rms,theta_rad\n";
    char buf[160];
    for (int m = 0; m < ms.snapshots(); ++m) {
        std::snprintf(buf, sizeof buf, "%d,0,%.17g,,\n", m, ms.v0[m]);
        out << buf;
        for (int id = 1; id < ms.nodes(); ++id) {
            std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g\n", m, id, ms.v[id][m],
                          ms.i_mag[id][m], ms.theta[id][m]);
            out << buf;
        }
    }
}

MeasurementSet read_measurements_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty measurement CSV " + path);
    if (line != "snapshot,node,v_rms,i_rms,theta_rad")
        throw ValidationError("unexpected measurement CSV header in " + path);

    struct Row {
        int m, node;
        double v, i, th;
        bool substation;
    };
    std::vector<Row> rows;
    int max_node = 0, max_m = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tok;
        Row r{};
        try {
            std::getline(ss, tok, ',');
            r.m = std::stoi(tok);
            std::getline(ss, tok, ',');
            r.node = std::stoi(tok);
            std::getline(ss, tok, ',');
            r.v = std::stod(tok);
            std::getline(ss, tok, ',');
            r.substation = tok.empty();
            if (!r.substation) r.i = std::stod(tok);
            if (std::getline(ss, tok, ',') && !tok.empty())
                r.th = std::stod(tok);
            else if (!r.substation)
                throw ValidationError("missing theta in measurement CSV row: " + line);
        } catch (const ValidationError&) {
            throw;
        } catch (const std::exception&) {
            throw ValidationError("malformed measurement CSV row: " + line);
        }
        if ((r.node == 0) != r.substation)
            throw ValidationError("node 0 rows must leave i_rms/theta_rad empty: " + line);
        max_node = std::max(max_node, r.node);
        max_m = std::max(max_m, r.m);
        rows.push_back(r);
    }
    if (max_m < 0) throw ValidationError("no data rows in " + path);

    const int M = max_m + 1;
    MeasurementSet ms;
    ms.v0.assign(M, 0.0);
    ms.v.assign(max_node + 1, {});
    ms.i_mag.assign(max_node + 1, {});
    ms.theta.assign(max_node + 1, {});
    std::vector<std::vector<char>> seen(max_node + 1, std::vector<char>(M, 0));
    for (int id = 1; id <= max_node; ++id) {
        ms.v[id].assign(M, 0.0);
        ms.i_mag[id].assign(M, 0.0);
        ms.theta[id].assign(M, 0.0);
    }
    for (const Row& r : rows) {
        if (r.node == 0) {
            ms.v0[r.m] = r.v;
        } else {
            ms.v[r.node][r.m] = r.v;
            ms.i_mag[r.node][r.m] = r.i;
            ms.theta[r.node][r.m] = r.th;
        }
        seen[r.node][r.m] = 1;
    }
    for (int id = 0; id <= max_node; ++id)
        for (int m = 0; m < M; ++m)
            if (!seen[id][m])
                throw InconsistentSnapshotLengths("node " + std::to_string(id) +
                                                  " missing snapshot " + std::to_string(m));
    return ms;
}

void write_ground_truth_csv(const std::string& path, const GroundTruthState& state) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << "snapshot,node,v_re,v_im,i_re,i_im\n";
    char buf[200];
    for (int m = 0; m < state.snapshots(); ++m)
        for (int id = 0; id < state.nodes(); ++id) {
            std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g,%.17g\n", m, id,
                          state.v[id][m].real(), state.v[id][m].imag(),
                          state.i[id][m].real(), state.i[id][m].imag());
            out << buf;
        }
}

} // namespace lvgrid
