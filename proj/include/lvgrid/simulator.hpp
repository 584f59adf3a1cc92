#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lvgrid/network.hpp"
#include "lvgrid/types.hpp"

namespace lvgrid {

// Exact steady-state phasor solution. Global phase reference: substation angle
// is zero. i[0] is the substation injection (negative of the total downstream
// line current); j[n] (n >= 1) is the global current of the line into node n,
// phase convention of the receiving end.
struct GroundTruthState {
    std::vector<CVec> v;  // v[node][snapshot], volts
    std::vector<CVec> i;  // i[node][snapshot], amps (consumed; node 0: injected)
    std::vector<CVec> j;  // j[node][snapshot], line current into node, amps

    int nodes() const { return static_cast<int>(v.size()); }
    int snapshots() const { return v.empty() ? 0 : static_cast<int>(v[0].size()); }
};

// Per-snapshot complex load impedance at nominal voltage:
// Z = |V_nom|^2 / conj(S), S = P (1 + i tan(acos pf) * sign). Power is floored
// at 1 W to avoid open-circuit loads.
Complex load_impedance(const LoadModel& lm, int m, double v_nom);

// Solve all M snapshots by tree elimination of the nodal admittance system
// (node 0 eliminated by Dirichlet substitution). Throws SingularSystem for
// pathological load/line combinations.
GroundTruthState solve_network(const FeederNetwork& net);

// Smart-meter view: RMS magnitudes plus the local voltage-to-current angle
// theta = angle(i_g) - angle(v_g), wrapped to (-pi, pi].
struct MeasurementSet {
    RVec v0;                      // substation RMS volts, length M
    std::vector<RVec> v;          // v[node], node >= 1; index 0 unused
    std::vector<RVec> i_mag;      // RMS amps
    std::vector<RVec> theta;      // radians

    int nodes() const { return static_cast<int>(v.size()); }  // N + 1 slots
    int snapshots() const { return static_cast<int>(v0.size()); }
    MeasurementSet prefix(int m) const;
    // Local consumed current i = i_mag * e^{i theta} at one node.
    CVec local_current(int node) const;
};

MeasurementSet measure(const GroundTruthState& state);

struct NoiseSpec {
    double pct_fs = 0.0;       // fraction of full scale; 0.01 means the 1 % class
    double fs_voltage = 250.0; // volts
    double fs_current = 0.0;   // amps; callers scale this to the scenario
    double fs_angle = M_PI / 3.0;
    std::uint64_t seed = 0;

    // Accuracy classes quote a 95 % interval, i.e. two standard deviations.
    double sigma_voltage() const { return fs_voltage * pct_fs / 2.0; }
    double sigma_current() const { return fs_current * pct_fs / 2.0; }
    double sigma_angle() const { return fs_angle * pct_fs / 2.0; }
};

// 1.2 x the largest ideal consumption current in the set.
double default_fs_current(const MeasurementSet& ideal);

MeasurementSet add_noise(const MeasurementSet& ms, const NoiseSpec& spec);

// Phase increments and local line currents recovered from local node data and
// known impedances (leaf-to-root recursion; branch nodes merge children).
struct PropagationResult {
    std::vector<RVec> delta;    // delta[node] = per-snapshot increment of the edge into node
    std::vector<CVec> j_local;  // line current of the edge into node, receiving-end frame
};

PropagationResult backward_propagate(const std::vector<RVec>& v_rms,
                                     const std::vector<CVec>& i_local,
                                     const FeederNetwork& net);

// Chain-only forward recursion from the substation; needs the substation line
// current. Throws BranchingUnsupported on trees. j_local is expressed in the
// sending-end frame.
PropagationResult forward_propagate(const RVec& v0_rms, const CVec& j1_local,
                                    const std::vector<RVec>& v_rms,
                                    const std::vector<CVec>& i_local,
                                    const FeederNetwork& net);

// Worst relative residual of the power-flow identity (both the squared-voltage
// line equation and the nodal power balance) over all edges, nodes, snapshots.
double power_flow_check(const GroundTruthState& state, const FeederNetwork& net);

// Largest KCL / KVL relative residual of a solved state.
double kirchhoff_check(const GroundTruthState& state, const FeederNetwork& net);

// measurement CSV: snapshot,node,v_rms,i_rms,theta_rad
// (node 0 rows leave i_rms and theta_rad empty)
void write_measurements_csv(const std::string& path, const MeasurementSet& ms);
MeasurementSet read_measurements_csv(const std::string& path);

// ground-truth CSV: snapshot,node,v_re,v_im,i_re,i_im
void write_ground_truth_csv(const std::string& path, const GroundTruthState& state);

} // namespace lvgrid
