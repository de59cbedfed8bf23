#include "doctest.h"
#include "support.hpp"

using namespace ragglom;

namespace {

AffinityStat s1(u64 value) { return AffinityStat{value, 1}; }

}  // namespace

TEST_SUITE_BEGIN("region_graph");

TEST_CASE("edge keys are canonical") {
    CHECK(make_edge_key(2, 1) == EdgeKey{1, 2});
    CHECK(make_edge_key(1, 2) == EdgeKey{1, 2});
    CHECK_THROWS_AS(make_edge_key(3, 3), std::invalid_argument);
    CHECK_THROWS_AS(make_edge_key(0, 3), std::invalid_argument);
}

TEST_CASE("add_edge") {
    RegionGraph g(LinkageKind::Mean);
    g.add_edge(1, 2, s1(500'000));
    CHECK(g.node_count() == 2);
    CHECK(g.edge_count() == 1);

    // duplicate key combines
    g.add_edge(1, 2, s1(500'000));
    CHECK(g.edge_count() == 1);
    CHECK(g.find_edge(EdgeKey{1, 2})->stat == AffinityStat{1'000'000, 2});

    // reversed endpoints normalize onto the same key
    g.add_edge(2, 1, s1(200'000));
    CHECK(g.find_edge(EdgeKey{1, 2})->stat.count == 3);
    CHECK(g.check_consistent());
}

TEST_CASE("merge on a path re-keys the far edge") {
    RegionGraph g(LinkageKind::Mean);
    g.add_edge(1, 2, s1(800'000));
    g.add_edge(2, 3, s1(600'000));
    const MergeDelta delta = g.merge_nodes(1, 2);
    CHECK(delta.survivor == 1);
    CHECK(delta.absorbed == 2);
    CHECK(delta.merged_stat == s1(800'000));
    CHECK(g.node_count() == 2);
    CHECK(g.edge_count() == 1);
    CHECK(g.find_edge(EdgeKey{1, 3})->stat == s1(600'000));
    CHECK(g.check_consistent());
}

TEST_CASE("merge on a triangle combines the parallel edges") {
    for (auto [kind, expected] :
         {std::pair{LinkageKind::Mean, AffinityStat{800'000, 2}},
          std::pair{LinkageKind::Max, AffinityStat{600'000, 2}}}) {
        RegionGraph g(kind);
        g.add_edge(1, 2, s1(900'000));
        g.add_edge(2, 3, s1(600'000));
        g.add_edge(1, 3, s1(200'000));
        const MergeDelta delta = g.merge_nodes(1, 2);
        CHECK(delta.survivor == 1);
        CHECK(g.edge_count() == 1);
        CHECK(g.find_edge(EdgeKey{1, 3})->stat == expected);
        CHECK(g.check_consistent());
        if (kind == LinkageKind::Mean)
            CHECK(value_rounded(kind, g.find_edge(EdgeKey{1, 3})->stat).value == 400'000);
    }
}

TEST_CASE("merge requires the edge to exist") {
    RegionGraph g(LinkageKind::Mean);
    g.add_edge(1, 2, s1(1));
    g.add_node(4);
    CHECK_THROWS_AS(g.merge_nodes(1, 4), std::logic_error);
}

TEST_CASE("nearest neighbor") {
    RegionGraph g(LinkageKind::Mean);
    g.add_edge(1, 2, s1(900'000));
    g.add_edge(1, 3, s1(400'000));
    g.add_node(9);
    CHECK(g.nearest_neighbor(1) == 2);
    CHECK(g.nearest_neighbor(9) == std::nullopt);  // isolated

    // exact-value tie breaks to the smaller id
    RegionGraph t(LinkageKind::Mean);
    t.add_edge(1, 2, s1(500'000));
    t.add_edge(1, 3, s1(500'000));
    CHECK(t.nearest_neighbor(1) == 2);
    CHECK_THROWS_AS(t.nearest_neighbor(77), std::logic_error);
}

TEST_CASE("mutual nearest pairs") {
    // Nearest-neighbor chain: affinities rise along the path, so only the
    // top pair is mutual.
    RegionGraph g(LinkageKind::Mean);
    g.add_edge(1, 2, s1(100'000));
    g.add_edge(2, 3, s1(300'000));
    g.add_edge(3, 4, s1(500'000));
    g.add_edge(4, 5, s1(900'000));
    CHECK(g.is_mutual_nearest_pair(4, 5));
    CHECK(!g.is_mutual_nearest_pair(3, 4));
    CHECK(!g.is_mutual_nearest_pair(1, 2));

    RegionGraph h(LinkageKind::Mean);
    h.add_edge(1, 2, s1(900'000));
    h.add_edge(2, 3, s1(950'000));
    CHECK(!h.is_mutual_nearest_pair(1, 2));

    RegionGraph two(LinkageKind::Mean);
    two.add_edge(7, 9, s1(10));
    CHECK(two.is_mutual_nearest_pair(7, 9));
}

TEST_CASE("consistency holds under random merge sequences") {
    std::mt19937_64 rng(5);
    for (u64 seed = 1; seed <= 20; ++seed) {
        RegionGraph g = testsup::random_graph(
            LinkageKind::Mean, testsup::RandomGraphSpec{30, 70, 4, seed});
        for (int step = 0; step < 15; ++step) {
            std::vector<EdgeKey> keys;
            g.for_each_edge([&](const EdgeKey& key, const EdgeRecord&) { keys.push_back(key); });
            if (keys.empty()) break;
            std::sort(keys.begin(), keys.end());
            const EdgeKey pick = keys[rng() % keys.size()];
            g.merge_nodes(pick.lo, pick.hi);
            REQUIRE(g.check_consistent());
        }
    }
}

TEST_CASE("one merge conserves total mean contact mass") {
    // Sum over live edges plus the merged-away edge is invariant.
    std::mt19937_64 rng(17);
    for (u64 seed = 1; seed <= 20; ++seed) {
        RegionGraph g = testsup::random_graph(
            LinkageKind::Mean, testsup::RandomGraphSpec{25, 60, 5, seed});
        auto total = [](const RegionGraph& graph) {
            u128 sum = 0;
            u64 count = 0;
            graph.for_each_edge([&](const EdgeKey&, const EdgeRecord& rec) {
                sum += rec.stat.sum;
                count += rec.stat.count;
            });
            return std::pair{sum, count};
        };
        const auto before = total(g);
        std::vector<EdgeKey> keys;
        g.for_each_edge([&](const EdgeKey& key, const EdgeRecord&) { keys.push_back(key); });
        std::sort(keys.begin(), keys.end());
        const EdgeKey pick = keys[rng() % keys.size()];
        const MergeDelta delta = g.merge_nodes(pick.lo, pick.hi);
        const auto after = total(g);
        CHECK(after.first + delta.merged_stat.sum == before.first);
        CHECK(after.second + delta.merged_stat.count == before.second);
    }
}

TEST_CASE("nearest neighbor is local to incident edges") {
    // Merging an edge that touches neither u nor nn(u) leaves nn(u) alone.
    std::mt19937_64 rng(23);
    for (u64 seed = 1; seed <= 30; ++seed) {
        RegionGraph g = testsup::random_graph(
            LinkageKind::Mean, testsup::RandomGraphSpec{20, 45, 4, seed});
        const auto nodes = g.sorted_nodes();
        const SegmentId u = nodes[rng() % nodes.size()];
        const auto nn = g.nearest_neighbor(u);
        if (!nn) continue;
        std::vector<EdgeKey> candidates;
        g.for_each_edge([&](const EdgeKey& key, const EdgeRecord&) {
            if (key.lo != u && key.hi != u && key.lo != *nn && key.hi != *nn)
                candidates.push_back(key);
        });
        if (candidates.empty()) continue;
        std::sort(candidates.begin(), candidates.end());
        const EdgeKey pick = candidates[rng() % candidates.size()];
        g.merge_nodes(pick.lo, pick.hi);
        if (g.has_node(u)) CHECK(g.nearest_neighbor(u) == nn);
    }
}

TEST_SUITE_END();
