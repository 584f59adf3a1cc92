#include "lvgrid/dbci.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "lvgrid/errors.hpp"

namespace lvgrid {

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ull;
    }
    return h;
}

std::uint64_t fnv1a_doubles(std::uint64_t h, const double* d, std::size_t n) {
    return fnv1a(h, d, n * sizeof(double));
}

} // namespace

std::uint64_t payload_checksum(const UpstreamPayload& p) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    const std::int64_t hdr[2] = {p.from, p.m};
    h = fnv1a(h, hdr, sizeof hdr);
    h = fnv1a_doubles(h, p.v.data(), p.v.size());
    h = fnv1a_doubles(h, reinterpret_cast<const double*>(p.j.data()), 2 * p.j.size());
    h = fnv1a_doubles(h, p.delta.data(), p.delta.size());
    return h;
}

AgentOutput agent_step(MeterAgent& agent, const AlgoConfig& cfg) {
    if (agent.inbox.size() != agent.children.size())
        throw MissingChildPayload("node " + std::to_string(agent.node) + " has " +
                                  std::to_string(agent.inbox.size()) + " of " +
                                  std::to_string(agent.children.size()) + " child payloads");
    const int M = static_cast<int>(agent.v.size());

    AgentOutput out;
    std::vector<ChildContribution> contribs;
    for (int child : agent.children) {
        auto it = agent.inbox.find(child);
        if (it == agent.inbox.end())
            throw MissingChildPayload("node " + std::to_string(agent.node) +
                                      " missing payload from child " + std::to_string(child));
        const UpstreamPayload& pay = it->second;
        if (pay.m != M)
            throw InconsistentSnapshotLengths("payload from node " + std::to_string(child) +
                                              " has mismatched snapshot count");

        AlgoConfig cfg_line = cfg;
        cfg_line.xr_ratio = cfg.xr_for_line(child);
        cfg_line.xr_overrides.clear();

        LineProblem prob;
        prob.v_up = agent.v;
        prob.v_down = pay.v;
        prob.j = pay.j;
        LineEstimate est = solve_line(prob, cfg_line);
        const RVec inc = phase_increments(est, prob, cfg_line);

        ChildContribution cc;
        cc.child = child;
        cc.j = line_contribution(prob, est, cfg_line, agent.children.size());
        cc.delta.resize(inc.size());
        for (std::size_t m = 0; m < inc.size(); ++m) cc.delta[m] = pay.delta[m] + inc[m];
        contribs.push_back(std::move(cc));
        out.estimates.push_back(AgentLineResult{child, std::move(est), inc});
    }

    if (agent.node != 0) {
        auto [agg, delta] = merge_children(agent.i_local, contribs, cfg);
        UpstreamPayload pay;
        pay.from = agent.node;
        pay.m = M;
        pay.v = agent.v;
        pay.j = std::move(agg);
        pay.delta = std::move(delta);
        out.payload = std::move(pay);
    }
    agent.fired = true;
    return out;
}

DecentralizedResult run_decentralized(const FeederNetwork& net, const MeasurementSet& ms,
                                      const AlgoConfig& cfg,
                                      const std::vector<int>& schedule) {
    const int n = net.node_count();
    if (ms.nodes() != n)
        throw InconsistentSnapshotLengths("measurement set does not cover the network");

    std::vector<int> order = schedule;
    if (order.empty()) {
        order = traversal_plan(net).edges_leaf_to_root;
        order.push_back(0);
    }
    if (static_cast<int>(order.size()) != n)
        throw Deadlock("schedule must activate every node exactly once");
    std::vector<char> seen(n, 0);
    for (int id : order) {
        if (id < 0 || id >= n || seen[id])
            throw Deadlock("schedule activates node " + std::to_string(id) +
                           " out of range or twice");
        seen[id] = 1;
    }

    std::vector<MeterAgent> agents(n);
    for (int id = 0; id < n; ++id) {
        agents[id].node = id;
        agents[id].v = (id == 0) ? ms.v0 : ms.v[id];
        if (id != 0) agents[id].i_local = ms.local_current(id);
        agents[id].children = net.children[id];
    }

    DecentralizedResult res;
    res.lines.resize(n);
    res.delta.resize(n);
    int clock = 0;
    for (int id : order) {
        MeterAgent& a = agents[id];
        if (a.inbox.size() != a.children.size())
            throw Deadlock("node " + std::to_string(id) +
                           " activated before all of its children reported");
        AgentOutput out = agent_step(a, cfg);
        for (auto& lr : out.estimates) {
            res.delta[lr.child] = std::move(lr.delta);
            res.lines[lr.child] = std::move(lr.est);
        }
        if (out.payload) {
            const int parent = net.parent[id];
            TraceEntry te;
            te.t = clock++;
            te.from = id;
            te.to = parent;
            te.m = out.payload->m;
            te.checksum = payload_checksum(*out.payload);
            res.trace.push_back(te);
            agents[parent].inbox.emplace(id, std::move(*out.payload));
        }
    }
    return res;
}

void write_trace_jsonl(const std::string& path, const std::vector<TraceEntry>& trace) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    char buf[160];
    for (const auto& te : trace) {
        std::snprintf(buf, sizeof buf,
                      "{\"t\":%d,\"from\":%d,\"to\":%d,\"m\":%d,\"checksum\":\"%016llx\"}\n",
                      te.t, te.from, te.to, te.m,
                      static_cast<unsigned long long>(te.checksum));
        out << buf;
    }
}

} // namespace lvgrid
