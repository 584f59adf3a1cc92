#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <set>

#include "lvgrid/errors.hpp"
#include "lvgrid/network.hpp"
#include "lvgrid/rng.hpp"

using namespace lvgrid;

TEST_CASE("uniform 50 m chain carries 0.02 + 0.014i ohms per line") {
    // 50 m at 0.4 ohm/km, X/R = 0.7
    const Complex z(0.4 * 0.05, 0.7 * 0.4 * 0.05);
    const TopologySpec spec = make_chain_spec(10, z, 230.0, 100);
    const FeederNetwork net = build_network(spec);
    CHECK(net.node_count() == 11);
    CHECK(net.line_count() == 10);
    CHECK(net.is_chain());
    for (int c = 1; c <= 10; ++c) {
        CHECK(net.line_z[c].real() == doctest::Approx(0.02));
        CHECK(net.line_z[c].imag() == doctest::Approx(0.014));
        CHECK(net.parent[c] == c - 1);
    }
}

TEST_CASE("branching tree builds with two children at node 1") {
    TopologySpec spec;
    spec.snapshots = 10;
    spec.nodes.push_back({0, std::nullopt, {}, std::nullopt, {}});
    spec.nodes.push_back({1, 0, Complex(0.02, 0.014), std::nullopt, {}});
    spec.nodes.push_back({2, 1, Complex(0.02, 0.014), std::nullopt, {}});
    spec.nodes.push_back({3, 1, Complex(0.02, 0.014), std::nullopt, {}});
    const FeederNetwork net = build_network(spec);
    CHECK_FALSE(net.is_chain());
    CHECK(net.children[1] == std::vector<int>{2, 3});
    CHECK(net.line_count() == net.node_count() - 1);
}

TEST_CASE("validation failures") {
    const Complex z(0.02, 0.014);
    SUBCASE("self loop") {
        TopologySpec spec;
        spec.snapshots = 5;
        spec.nodes.push_back({0, std::nullopt, {}, std::nullopt, {}});
        spec.nodes.push_back({1, 1, z, std::nullopt, {}});
        CHECK_THROWS_AS(build_network(spec), CycleDetected);
    }
    SUBCASE("cycle among non-root nodes") {
        TopologySpec spec;
        spec.snapshots = 5;
        spec.nodes.push_back({0, std::nullopt, {}, std::nullopt, {}});
        spec.nodes.push_back({1, 2, z, std::nullopt, {}});
        spec.nodes.push_back({2, 1, z, std::nullopt, {}});
        CHECK_THROWS_AS(build_network(spec), CycleDetected);
    }
    SUBCASE("missing parent link") {
        TopologySpec spec;
        spec.snapshots = 5;
        spec.nodes.push_back({0, std::nullopt, {}, std::nullopt, {}});
        spec.nodes.push_back({1, std::nullopt, z, std::nullopt, {}});
        CHECK_THROWS_AS(build_network(spec), DisconnectedNode);
    }
    SUBCASE("unknown parent id") {
        TopologySpec spec;
        spec.snapshots = 5;
        spec.nodes.push_back({0, std::nullopt, {}, std::nullopt, {}});
        spec.nodes.push_back({1, 7, z, std::nullopt, {}});
        CHECK_THROWS_AS(build_network(spec), DisconnectedNode);
    }
    SUBCASE("zero resistance") {
        TopologySpec spec;
        spec.snapshots = 5;
        spec.nodes.push_back({0, std::nullopt, {}, std::nullopt, {}});
        spec.nodes.push_back({1, 0, Complex(0.0, 0.014), std::nullopt, {}});
        CHECK_THROWS_AS(build_network(spec), NonPositiveResistance);
    }
    SUBCASE("profile length mismatch") {
        TopologySpec spec;
        spec.snapshots = 5;
        LoadModel lm;
        lm.active_power_w = {100, 100};
        lm.power_factor = {0.95, 0.95};
        spec.nodes.push_back({0, std::nullopt, {}, std::nullopt, {}});
        spec.nodes.push_back({1, 0, z, lm, {}});
        CHECK_THROWS_AS(build_network(spec), ProfileLengthMismatch);
    }
}

TEST_CASE("traversal order is reverse topological") {
    const Complex z(0.02, 0.014);
    SUBCASE("three-line chain") {
        const FeederNetwork net = build_network(make_chain_spec(3, z, 230.0, 5));
        const TraversalPlan plan = traversal_plan(net);
        CHECK(plan.edges_leaf_to_root == std::vector<int>{3, 2, 1});
    }
    SUBCASE("single edge") {
        const FeederNetwork net = build_network(make_chain_spec(1, z, 230.0, 5));
        CHECK(traversal_plan(net).edges_leaf_to_root == std::vector<int>{1});
    }
    SUBCASE("branching tree resolves leaves first") {
        TopologySpec spec;
        spec.snapshots = 5;
        spec.nodes.push_back({0, std::nullopt, {}, std::nullopt, {}});
        spec.nodes.push_back({1, 0, z, std::nullopt, {}});
        spec.nodes.push_back({2, 1, z, std::nullopt, {}});
        spec.nodes.push_back({3, 1, z, std::nullopt, {}});
        const TraversalPlan plan = traversal_plan(build_network(spec));
        const auto& order = plan.edges_leaf_to_root;
        const auto pos = [&](int e) {
            return std::find(order.begin(), order.end(), e) - order.begin();
        };
        CHECK(pos(2) < pos(1));
        CHECK(pos(3) < pos(1));
    }
}

TEST_CASE("random trees: every edge after its subtree, each edge once") {
    rng::Stream s{rng::derive(100, 4)};
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 2 + static_cast<int>(s.uniform(rep) * 30);
        TopologySpec spec;
        spec.snapshots = 3;
        spec.nodes.push_back({0, std::nullopt, {}, std::nullopt, {}});
        for (int id = 1; id < n; ++id) {
            const int parent = static_cast<int>(s.uniform(100 * rep + id) * id);
            spec.nodes.push_back({id, parent, Complex(0.02, 0.014), std::nullopt, {}});
        }
        const FeederNetwork net = build_network(spec);
        CHECK(net.line_count() == net.node_count() - 1);
        const TraversalPlan plan = traversal_plan(net);
        std::set<int> seen;
        for (int e : plan.edges_leaf_to_root) {
            for (int child : net.children[e]) CHECK(seen.count(child) == 1);
            CHECK(seen.insert(e).second);
        }
        CHECK(static_cast<int>(seen.size()) == net.line_count());
    }
}

TEST_CASE("synthetic load profiles") {
    SUBCASE("degenerate sigma pins pf at the mean") {
        LoadGenConfig cfg;
        cfg.pf_sigma = 0.0;
        const auto profiles = synth_load_profiles(cfg, 3, 50, 77);
        for (const auto& lm : profiles)
            for (double pf : lm.power_factor) CHECK(pf == doctest::Approx(0.95));
    }
    SUBCASE("deterministic under a fixed seed") {
        const auto a = synth_load_profiles(LoadGenConfig{}, 4, 100, 42);
        const auto b = synth_load_profiles(LoadGenConfig{}, 4, 100, 42);
        for (std::size_t k = 0; k < a.size(); ++k) {
            CHECK(a[k].active_power_w == b[k].active_power_w);
            CHECK(a[k].power_factor == b[k].power_factor);
        }
    }
    SUBCASE("clipped pf mean stays near 0.95") {
        const auto profiles = synth_load_profiles(LoadGenConfig{}, 2, 10000, 5);
        double mean = 0.0;
        for (double pf : profiles[0].power_factor) mean += pf;
        mean /= 10000.0;
        CHECK(mean > 0.94);
        CHECK(mean < 0.96);
    }
    SUBCASE("empty clip interval is rejected") {
        LoadGenConfig cfg;
        cfg.pf_clip_lo = 0.99;
        cfg.pf_clip_hi = 0.95;
        CHECK_THROWS_AS(synth_load_profiles(cfg, 1, 10, 1), InvalidConfig);
    }
    SUBCASE("high-variation preset widens the clip range") {
        const auto cfg = LoadGenConfig::high_variation();
        CHECK(cfg.pf_clip_lo == doctest::Approx(0.70));
        const auto profiles = synth_load_profiles(cfg, 1, 5000, 11);
        double lo = 1.0;
        for (double pf : profiles[0].power_factor) lo = std::min(lo, pf);
        CHECK(lo < 0.85);
        CHECK(lo >= 0.70);
    }
}

TEST_CASE("topology JSON and load CSV round trips") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "lvgrid_net_test";
    fs::create_directories(dir);

    TopologySpec spec = make_chain_spec(3, Complex(0.02, 0.014), 230.0, 4);
    const auto profiles = synth_load_profiles(LoadGenConfig{}, 3, 4, 9);
    for (int id = 1; id <= 3; ++id) spec.nodes[id].load = profiles[id - 1];

    const std::string tpath = (dir / "topo.json").string();
    save_topology_json(tpath, spec);
    TopologySpec loaded = load_topology_json(tpath);
    const FeederNetwork a = build_network(spec);
    const FeederNetwork b = build_network(loaded);
    for (int id = 1; id <= 3; ++id) {
        CHECK(a.line_z[id] == b.line_z[id]);
        CHECK(a.loads[id]->active_power_w == b.loads[id]->active_power_w);
        CHECK(a.loads[id]->power_factor == b.loads[id]->power_factor);
    }

    const std::string cpath = (dir / "loads.csv").string();
    write_load_csv(cpath, a);
    TopologySpec bare = make_chain_spec(3, Complex(0.02, 0.014), 230.0, 4);
    read_load_csv(cpath, bare);
    const FeederNetwork c = build_network(bare);
    for (int id = 1; id <= 3; ++id) {
        CHECK(c.loads[id]->active_power_w == a.loads[id]->active_power_w);
        CHECK(c.loads[id]->power_factor == a.loads[id]->power_factor);
    }

    SUBCASE("malformed json is a validation error") {
        const std::string bad = (dir / "bad.json").string();
        std::FILE* f = std::fopen(bad.c_str(), "w");
        std::fputs("{not json", f);
        std::fclose(f);
        CHECK_THROWS_AS(load_topology_json(bad), ValidationError);
    }
}
