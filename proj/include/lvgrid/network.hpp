#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lvgrid/types.hpp"

namespace lvgrid {

// Per-node load over M snapshots: active power demand at nominal voltage and
// power factor, with a lagging/leading flag.
struct LoadModel {
    RVec active_power_w;   // P^(m) >= 0, floored at 1 W before use
    RVec power_factor;     // pf^(m) in (0, 1]
    bool lagging = true;
};

struct NodeSpec {
    int id = 0;
    std::optional<int> parent;      // empty only for the substation (id 0)
    Complex z{0.0, 0.0};            // impedance of the line from parent, ohms
    std::optional<LoadModel> load;  // substation carries no load
    std::string load_csv;           // optional CSV path, resolved by the loader
};

struct TopologySpec {
    std::vector<NodeSpec> nodes;
    double nominal_voltage = 230.0;  // substation RMS volts
    int snapshots = 0;
};

// Rooted tree of nodes 0..N (node 0 = substation). Edge n (n >= 1) connects
// parent[n] -> n and carries impedance line_z[n].
struct FeederNetwork {
    std::vector<int> parent;                       // parent[0] = -1
    std::vector<Complex> line_z;                   // line_z[0] unused
    std::vector<std::optional<LoadModel>> loads;   // loads[0] empty
    std::vector<std::vector<int>> children;
    double nominal_voltage = 230.0;
    int snapshots = 0;

    int node_count() const { return static_cast<int>(parent.size()); }
    int line_count() const { return node_count() - 1; }
    bool is_chain() const;
};

// Reverse topological edge order: every edge appears after all edges in the
// subtree below it. Edges are named by their child node id.
struct TraversalPlan {
    std::vector<int> edges_leaf_to_root;
    std::vector<std::vector<int>> children;
    std::vector<int> parent;
};

// Validates and assembles the network. Throws CycleDetected, DisconnectedNode,
// NonPositiveResistance or ProfileLengthMismatch.
FeederNetwork build_network(const TopologySpec& spec);

TraversalPlan traversal_plan(const FeederNetwork& net);

struct LoadGenConfig {
    double base_power_min_w = 200.0;
    double base_power_max_w = 2500.0;
    double pf_mean = 0.95;
    double pf_sigma = 0.05;
    double pf_clip_lo = 0.90;
    double pf_clip_hi = 1.00;
    bool lagging = true;

    // Wider power-factor spread used by the high-variation experiments.
    static LoadGenConfig high_variation() {
        LoadGenConfig c;
        c.pf_mean = 0.85;
        c.pf_sigma = 0.15;
        c.pf_clip_lo = 0.70;
        return c;
    }
};

// Deterministic synthetic household-style profiles for nodes 1..N.
// Node 0 receives no load. Throws InvalidConfig on bad parameters.
std::vector<LoadModel> synth_load_profiles(const LoadGenConfig& cfg, int n_loads,
                                           int snapshots, std::uint64_t seed);

// Attach the given profiles (index 0 -> node 1, ...) to the network.
void attach_profiles(FeederNetwork& net, const std::vector<LoadModel>& profiles);

// Topology JSON:
// {"nodes":[{"id":int,"parent":int|null,"z_re":float,"z_im":float,
//            "load_csv":path|null}],
//  "nominal_voltage":float, "snapshots":int}
// Nodes may alternatively carry inline "load": {"active_power_w":[...],
// "power_factor":[...]}.
TopologySpec load_topology_json(const std::string& path);
void save_topology_json(const std::string& path, const TopologySpec& spec);

// Load-profile CSV with header: snapshot,node,active_power_w,power_factor
void read_load_csv(const std::string& path, TopologySpec& spec);
void write_load_csv(const std::string& path, const FeederNetwork& net);

// Convenience: build a uniform chain of n_lines identical lines.
TopologySpec make_chain_spec(int n_lines, Complex line_z, double nominal_voltage,
                             int snapshots);

} // namespace lvgrid
