#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lvgrid/identify.hpp"
#include "lvgrid/network.hpp"
#include "lvgrid/simulator.hpp"

namespace lvgrid {

// One hop of the decentralized protocol: everything a meter forwards to the
// meter upstream of it. The voltage vector rides along because the parent's
// per-line solver needs the receiving-end voltage; delta carries the subtree's
// accumulated phase increments for tree phase matching. Immutable once sent.
struct UpstreamPayload {
    int from = 0;
    int m = 0;       // snapshot count
    RVec v;          // sender RMS volts
    CVec j;          // sender-side aggregated local line current, amps
    RVec delta;      // accumulated per-snapshot phase increments
};

// A smart meter: local measurements plus the inbox of child payloads. An agent
// computes only once every child has delivered exactly one payload.
struct MeterAgent {
    int node = 0;
    RVec v;           // own RMS voltage vector (node 0: substation v0)
    CVec i_local;     // own consumed current (empty at the substation)
    std::vector<int> children;
    std::map<int, UpstreamPayload> inbox;
    bool fired = false;
};

struct AgentLineResult {
    int child = 0;
    LineEstimate est;
    RVec delta;  // per-snapshot increments of the line into `child`
};

struct AgentOutput {
    std::vector<AgentLineResult> estimates;
    std::optional<UpstreamPayload> payload;  // absent at the substation
};

// Runs the per-line solver for every child line and merges the currents.
// Throws MissingChildPayload when the inbox is incomplete.
AgentOutput agent_step(MeterAgent& agent, const AlgoConfig& cfg);

struct TraceEntry {
    int t = 0;  // logical timestamp (send order)
    int from = 0, to = 0;
    int m = 0;
    std::uint64_t checksum = 0;
};

struct DecentralizedResult {
    std::vector<LineEstimate> lines;  // indexed by child node id
    std::vector<RVec> delta;
    std::vector<TraceEntry> trace;
};

// Executes the whole feeder. schedule lists node activation order; empty means
// the default leaf-to-root order. A schedule activating a parent before one of
// its children raises Deadlock instead of hanging.
DecentralizedResult run_decentralized(const FeederNetwork& net, const MeasurementSet& ms,
                                      const AlgoConfig& cfg,
                                      const std::vector<int>& schedule = {});

std::uint64_t payload_checksum(const UpstreamPayload& p);

// message trace JSONL: {"t":int,"from":int,"to":int,"m":int,"checksum":hex}
void write_trace_jsonl(const std::string& path, const std::vector<TraceEntry>& trace);

} // namespace lvgrid
