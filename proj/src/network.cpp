#include "lvgrid/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "lvgrid/errors.hpp"
#include "lvgrid/rng.hpp"

namespace lvgrid {

bool FeederNetwork::is_chain() const {
    for (const auto& c : children)
        if (c.size() > 1) return false;
    return true;
}

FeederNetwork build_network(const TopologySpec& spec) {
    const int n = static_cast<int>(spec.nodes.size());
    if (n < 2) throw InvalidConfig("network needs at least one line");
    if (spec.snapshots < 1) throw InvalidConfig("snapshot count must be >= 1");

    std::map<int, const NodeSpec*> by_id;
    for (const auto& ns : spec.nodes) {
        if (ns.id < 0 || ns.id >= n)
            throw InvalidConfig("node ids must form a contiguous range 0..N");
        if (!by_id.emplace(ns.id, &ns).second)
            throw InvalidConfig("duplicate node id " + std::to_string(ns.id));
    }

    FeederNetwork net;
    net.parent.assign(n, -1);
    net.line_z.assign(n, Complex{});
    net.loads.assign(n, std::nullopt);
    net.children.assign(n, {});
    net.nominal_voltage = spec.nominal_voltage;
    net.snapshots = spec.snapshots;

    for (const auto& [id, ns] : by_id) {
        if (id == 0) {
            if (ns->parent.has_value())
                throw InvalidConfig("node 0 is the substation and has no parent");
            continue;
        }
        if (!ns->parent.has_value())
            throw DisconnectedNode("node " + std::to_string(id) + " has no parent link");
        const int p = *ns->parent;
        if (p == id) throw CycleDetected("node " + std::to_string(id) + " is its own parent");
        if (by_id.find(p) == by_id.end())
            throw DisconnectedNode("node " + std::to_string(id) + " links to unknown parent " +
                                   std::to_string(p));
        if (!(ns->z.real() > 0.0))
            throw NonPositiveResistance("line into node " + std::to_string(id) +
                                        " has non-positive resistance");
        net.parent[id] = p;
        net.line_z[id] = ns->z;
        if (ns->load) {
            const auto& lm = *ns->load;
            if (static_cast<int>(lm.active_power_w.size()) != spec.snapshots ||
                static_cast<int>(lm.power_factor.size()) != spec.snapshots)
                throw ProfileLengthMismatch("load profile for node " + std::to_string(id) +
                                            " does not match snapshot count");
            for (std::size_t m = 0; m < lm.power_factor.size(); ++m) {
                if (!(lm.power_factor[m] > 0.0) || lm.power_factor[m] > 1.0)
                    throw InvalidConfig("power factor out of (0, 1] at node " +
                                        std::to_string(id));
                if (lm.active_power_w[m] < 0.0)
                    throw InvalidConfig("negative active power at node " + std::to_string(id));
            }
            net.loads[id] = lm;
        }
    }
    if (by_id.find(0) == by_id.end()) throw DisconnectedNode("substation node 0 is missing");

    // Walk parent chains; a walk that revisits a node without reaching the
    // root is a cycle among non-root nodes.
    std::vector<int> mark(n, 0);
    mark[0] = 2;
    for (int start = 1; start < n; ++start) {
        if (mark[start] == 2) continue;
        std::vector<int> path;
        int cur = start;
        while (mark[cur] == 0) {
            mark[cur] = 1;
            path.push_back(cur);
            cur = net.parent[cur];
        }
        if (mark[cur] == 1) throw CycleDetected("cycle through node " + std::to_string(cur));
        for (int v : path) mark[v] = 2;
    }

    for (int id = 1; id < n; ++id) net.children[net.parent[id]].push_back(id);
    for (auto& c : net.children) std::sort(c.begin(), c.end());
    return net;
}

TraversalPlan traversal_plan(const FeederNetwork& net) {
    TraversalPlan plan;
    plan.children = net.children;
    plan.parent = net.parent;
    plan.edges_leaf_to_root.reserve(net.line_count());
    // Depth-first from the root; children emitted before their parent edge.
    std::vector<int> stack{0};
    std::vector<int> order;
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        order.push_back(v);
        for (int c : net.children[v]) stack.push_back(c);
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if (*it != 0) plan.edges_leaf_to_root.push_back(*it);
    return plan;
}

std::vector<LoadModel> synth_load_profiles(const LoadGenConfig& cfg, int n_loads,
                                           int snapshots, std::uint64_t seed) {
    if (cfg.pf_clip_lo > cfg.pf_clip_hi || cfg.pf_clip_lo <= 0.0 || cfg.pf_clip_hi > 1.0)
        throw InvalidConfig("power-factor clip interval is empty or out of (0, 1]");
    if (cfg.pf_sigma < 0.0) throw InvalidConfig("pf_sigma must be non-negative");
    if (cfg.base_power_min_w < 0.0 || cfg.base_power_max_w < cfg.base_power_min_w)
        throw InvalidConfig("invalid base power range");
    if (n_loads < 1 || snapshots < 1) throw InvalidConfig("need at least one load and snapshot");

    std::vector<LoadModel> out(n_loads);
    // Power-factor draws mix a feeder-wide per-snapshot component with a
    // per-node one (grid-wide reactive conditions move together); the marginal
    // per node stays Normal(pf_mean, pf_sigma) before clipping.
    const double rho = 0.7;
    rng::Stream shared_pf{rng::derive(seed, 0, 3)};
    for (int k = 0; k < n_loads; ++k) {
        const int node = k + 1;
        rng::Stream base_s{rng::derive(seed, node, 0)};
        rng::Stream power_s{rng::derive(seed, node, 1)};
        rng::Stream pf_s{rng::derive(seed, node, 2)};
        const double base = base_s.uniform(0, cfg.base_power_min_w, cfg.base_power_max_w);
        const double phase = base_s.uniform(1, 0.0, 2.0 * M_PI);

        LoadModel lm;
        lm.lagging = cfg.lagging;
        lm.active_power_w.resize(snapshots);
        lm.power_factor.resize(snapshots);
        for (int m = 0; m < snapshots; ++m) {
            // Daily shape (1440 one-minute snapshots per day) with bursty
            // appliance-style per-snapshot variation.
            const double day = std::sin(2.0 * M_PI * (m % 1440) / 1440.0 + phase);
            const double shape = 0.75 + 0.25 * day;
            const double u = power_s.uniform(m);
            const double burst = 0.1 + 2.4 * u * u * u * u;
            lm.active_power_w[m] = base * shape * burst;

            const double mix =
                rho * shared_pf.normal(m) + std::sqrt(1.0 - rho * rho) * pf_s.normal(m);
            double pf = cfg.pf_mean + cfg.pf_sigma * mix;
            pf = std::min(std::max(pf, cfg.pf_clip_lo), cfg.pf_clip_hi);
            lm.power_factor[m] = pf;
        }
        out[k] = std::move(lm);
    }
    return out;
}

void attach_profiles(FeederNetwork& net, const std::vector<LoadModel>& profiles) {
    if (static_cast<int>(profiles.size()) != net.line_count())
        throw ProfileLengthMismatch("profile count does not match load node count");
    for (int id = 1; id < net.node_count(); ++id) {
        const auto& lm = profiles[id - 1];
        if (static_cast<int>(lm.active_power_w.size()) != net.snapshots)
            throw ProfileLengthMismatch("profile length mismatch at node " + std::to_string(id));
        net.loads[id] = lm;
    }
}

namespace {

nlohmann::json parse_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed JSON in " + path + ": " + e.what());
    }
}

} // namespace

TopologySpec load_topology_json(const std::string& path) {
    const auto j = parse_json_file(path);
    TopologySpec spec;
    try {
        spec.nominal_voltage = j.at("nominal_voltage").get<double>();
        spec.snapshots = j.at("snapshots").get<int>();
        for (const auto& nj : j.at("nodes")) {
            NodeSpec ns;
            ns.id = nj.at("id").get<int>();
            if (!nj.at("parent").is_null()) ns.parent = nj.at("parent").get<int>();
            ns.z = Complex(nj.value("z_re", 0.0), nj.value("z_im", 0.0));
            if (nj.contains("load_csv") && !nj.at("load_csv").is_null())
                ns.load_csv = nj.at("load_csv").get<std::string>();
            if (nj.contains("load") && !nj.at("load").is_null()) {
                LoadModel lm;
                lm.active_power_w = nj.at("load").at("active_power_w").get<RVec>();
                lm.power_factor = nj.at("load").at("power_factor").get<RVec>();
                lm.lagging = nj.at("load").value("lagging", true);
                ns.load = std::move(lm);
            }
            spec.nodes.push_back(std::move(ns));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("topology schema error in " + path + ": " + e.what());
    }
    return spec;
}

void save_topology_json(const std::string& path, const TopologySpec& spec) {
    nlohmann::json j;
    j["nominal_voltage"] = spec.nominal_voltage;
    j["snapshots"] = spec.snapshots;
    j["nodes"] = nlohmann::json::array();
    for (const auto& ns : spec.nodes) {
        nlohmann::json nj;
        nj["id"] = ns.id;
        if (ns.parent)
            nj["parent"] = *ns.parent;
        else
            nj["parent"] = nullptr;
        nj["z_re"] = ns.z.real();
        nj["z_im"] = ns.z.imag();
        if (!ns.load_csv.empty())
            nj["load_csv"] = ns.load_csv;
        else
            nj["load_csv"] = nullptr;
        if (ns.load) {
            nj["load"] = {{"active_power_w", ns.load->active_power_w},
                          {"power_factor", ns.load->power_factor},
                          {"lagging", ns.load->lagging}};
        }
        j["nodes"].push_back(std::move(nj));
    }
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << j.dump(2) << "\n";
}

void read_load_csv(const std::string& path, TopologySpec& spec) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty load CSV " + path);
    if (line != "snapshot,node,active_power_w,power_factor")
        throw ValidationError("unexpected load CSV header in " + path);

    std::map<int, LoadModel> models;
    std::map<int, int> counts;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tok;
        int m, node;
        double p, pf;
        try {
            std::getline(ss, tok, ',');
            m = std::stoi(tok);
            std::getline(ss, tok, ',');
            node = std::stoi(tok);
            std::getline(ss, tok, ',');
            p = std::stod(tok);
            std::getline(ss, tok, ',');
            pf = std::stod(tok);
        } catch (const std::exception&) {
            throw ValidationError("malformed load CSV row: " + line);
        }
        auto& lm = models[node];
        if (static_cast<int>(lm.active_power_w.size()) <= m) {
            lm.active_power_w.resize(m + 1, 0.0);
            lm.power_factor.resize(m + 1, 1.0);
        }
        lm.active_power_w[m] = p;
        lm.power_factor[m] = pf;
        counts[node]++;
    }
    for (auto& ns : spec.nodes) {
        if (ns.id == 0) continue;
        auto it = models.find(ns.id);
        if (it == models.end()) continue;
        if (counts[ns.id] != spec.snapshots ||
            static_cast<int>(it->second.active_power_w.size()) != spec.snapshots)
            throw ProfileLengthMismatch("load CSV rows for node " + std::to_string(ns.id) +
                                        " do not cover snapshots 0.." +
                                        std::to_string(spec.snapshots - 1));
        ns.load = it->second;
    }
}

void write_load_csv(const std::string& path, const FeederNetwork& net) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << "snapshot,node,active_power_w,power_factor\n";
    char buf[128];
    for (int m = 0; m < net.snapshots; ++m) {
        for (int id = 1; id < net.node_count(); ++id) {
            if (!net.loads[id]) continue;
            std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g\n", m, id,
                          net.loads[id]->active_power_w[m], net.loads[id]->power_factor[m]);
            out << buf;
        }
    }
}

TopologySpec make_chain_spec(int n_lines, Complex line_z, double nominal_voltage,
                             int snapshots) {
    TopologySpec spec;
    spec.nominal_voltage = nominal_voltage;
    spec.snapshots = snapshots;
    spec.nodes.push_back(NodeSpec{0, std::nullopt, Complex{}, std::nullopt, {}});
    for (int i = 1; i <= n_lines; ++i)
        spec.nodes.push_back(NodeSpec{i, i - 1, line_z, std::nullopt, {}});
    return spec;
}

} // namespace lvgrid
