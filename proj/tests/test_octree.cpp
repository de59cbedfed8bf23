#include "doctest.h"
#include "support.hpp"

#include <functional>

#include "ragglom/datagen.hpp"
#include "ragglom/executor.hpp"
#include "ragglom/octree.hpp"

using namespace ragglom;
using testsup::ScratchDir;

namespace {

AffinityStat s1(u64 value) { return AffinityStat{value, 1}; }

Box box1(u32 x0, u32 x1) { return Box{Vec3{x0, 0, 0}, Vec3{x1, 1, 1}}; }

// The four-cell chain 1-2-3-4 (0.9 / 0.7 / 0.8) split into two leaves with
// the straddling interface attributed to the lower leaf.
StoreManifest write_split_chain(ChunkStore& store) {
    StoreManifest manifest;
    manifest.dims = Vec3{4, 1, 1};
    manifest.leaf_dims = Vec3{2, 1, 1};

    LeafPayload left;
    left.nodes = {NodeExtent{1, box1(0, 1)}, NodeExtent{2, box1(1, 2)}, NodeExtent{3, box1(2, 3)}};
    left.boundary = {2, 3};
    left.records = {EdgeContribution{EdgeKey{1, 2}, s1(900'000)},
                    EdgeContribution{EdgeKey{2, 3}, s1(700'000)}};
    LeafPayload right;
    right.nodes = {NodeExtent{3, box1(2, 3)}, NodeExtent{4, box1(3, 4)}};
    right.boundary = {3};
    right.records = {EdgeContribution{EdgeKey{3, 4}, s1(800'000)}};

    LeafSummary summary;
    store.write_leaf(ChunkAddress{0, 0, 0, 0}, left, &summary);
    manifest.leaves.emplace("0/0_0_0", summary);
    store.write_leaf(ChunkAddress{0, 1, 0, 0}, right, &summary);
    manifest.leaves.emplace("0/1_0_0", summary);
    manifest.node_count = 4;
    manifest.edge_count = 3;
    manifest.record_count = 3;
    store.write_manifest(manifest);
    return manifest;
}

// Canonical comparison key for row multisets.
Dendrogram sorted_rows(Dendrogram rows) {
    std::sort(rows.begin(), rows.end(), [](const DendrogramRow& a, const DendrogramRow& b) {
        if (a.survivor != b.survivor) return a.survivor < b.survivor;
        if (a.absorbed != b.absorbed) return a.absorbed < b.absorbed;
        if (a.stat.sum != b.stat.sum) return a.stat.sum < b.stat.sum;
        return a.stat.count < b.stat.count;
    });
    return rows;
}

RegionGraph load_global(const ChunkStore& store, const StoreManifest& manifest, LinkageKind kind) {
    const DatasetLayout layout = DatasetLayout::create(manifest.dims, manifest.leaf_dims);
    RegionGraph graph(kind);
    for (const ChunkAddress& leaf : layout.leaves_under(layout.root())) {
        combine_edges(graph, store.read_leaf(leaf, kind, &manifest).graph);
    }
    return graph;
}

std::map<SegmentId, SegmentId> flat_partition(const Dendrogram& rows,
                                              const std::vector<SegmentId>& universe) {
    std::map<SegmentId, SegmentId> parent;
    for (SegmentId id : universe) parent[id] = id;
    std::function<SegmentId(SegmentId)> find = [&](SegmentId id) {
        while (parent.at(id) != id) id = parent.at(id);
        return id;
    };
    for (const DendrogramRow& row : rows) {
        const SegmentId ra = find(row.survivor), rb = find(row.absorbed);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
    std::map<SegmentId, SegmentId> out;
    for (SegmentId id : universe) out[id] = find(id);
    return out;
}

}  // namespace

TEST_SUITE_BEGIN("octree");

TEST_CASE("addresses and layout") {
    const DatasetLayout layout = DatasetLayout::create(Vec3{16, 16, 16}, Vec3{4, 4, 4});
    CHECK(layout.leaf_grid() == Vec3{4, 4, 4});
    CHECK(layout.root_level() == 2);
    CHECK(address_path(ChunkAddress{2, 0, 1, 3}) == "2/0_1_3");
    CHECK(parse_address_path("2/0_1_3") == ChunkAddress{2, 0, 1, 3});
    CHECK(!parse_address_path("nonsense"));
    CHECK(layout.parent(ChunkAddress{0, 3, 2, 1}) == ChunkAddress{1, 1, 1, 0});
    CHECK(layout.children(ChunkAddress{1, 0, 0, 0}).size() == 8);
    CHECK(layout.leaves_under(layout.root()).size() == 64);

    const ChunkDescriptor leaf = layout.descriptor(ChunkAddress{0, 1, 0, 0});
    CHECK(leaf.bounds == Box{Vec3{4, 0, 0}, Vec3{8, 4, 4}});
    CHECK(leaf.dataset_bounds == Box{Vec3{0, 0, 0}, Vec3{16, 16, 16}});

    CHECK_THROWS_AS(DatasetLayout::create(Vec3{10, 16, 16}, Vec3{4, 4, 4}),
                    std::invalid_argument);

    // Non-cubic: absent children are skipped.
    const DatasetLayout flat = DatasetLayout::create(Vec3{8, 4, 4}, Vec3{2, 2, 2});
    CHECK(flat.leaf_grid() == Vec3{4, 2, 2});
    CHECK(flat.root_level() == 2);
    CHECK(flat.children(flat.root()).size() == 2);
    CHECK(flat.grid_at(1) == Vec3{2, 1, 1});
}

TEST_CASE("boundary membership") {
    const DatasetLayout layout = DatasetLayout::create(Vec3{8, 8, 8}, Vec3{4, 4, 4});

    SUBCASE("the whole dataset has no artificial faces") {
        const DatasetLayout one = DatasetLayout::create(Vec3{8, 8, 8}, Vec3{8, 8, 8});
        ExtentMap extents{{1, Box{Vec3{0, 0, 0}, Vec3{8, 8, 8}}},
                          {2, Box{Vec3{3, 3, 3}, Vec3{4, 4, 4}}}};
        CHECK(boundary_set(one.descriptor(one.root()), extents).empty());
    }
    SUBCASE("flush and straddling boxes touch the shared face from both sides") {
        const ChunkDescriptor left = layout.descriptor(ChunkAddress{0, 0, 0, 0});
        const ChunkDescriptor right = layout.descriptor(ChunkAddress{0, 1, 0, 0});
        const Box flush_left{Vec3{2, 1, 1}, Vec3{4, 2, 2}};   // ends exactly at x=4
        const Box straddler{Vec3{3, 1, 1}, Vec3{5, 2, 2}};    // crosses x=4
        const Box flush_right{Vec3{4, 1, 1}, Vec3{6, 2, 2}};  // starts exactly at x=4
        CHECK(boundary_set(left, ExtentMap{{7, flush_left}}) == std::vector<SegmentId>{7});
        CHECK(boundary_set(right, ExtentMap{{7, flush_right}}) == std::vector<SegmentId>{7});
        CHECK(boundary_set(left, ExtentMap{{8, straddler}}) == std::vector<SegmentId>{8});
        CHECK(boundary_set(right, ExtentMap{{8, straddler}}) == std::vector<SegmentId>{8});
        // A box flush against the face participates in both siblings' edge
        // lists, so it must be a boundary member in both.
        CHECK(boundary_set(left, ExtentMap{{9, flush_right}}) == std::vector<SegmentId>{9});
    }
    SUBCASE("strictly interior boxes are not members") {
        const ChunkDescriptor left = layout.descriptor(ChunkAddress{0, 0, 0, 0});
        CHECK(boundary_set(left, ExtentMap{{5, Box{Vec3{1, 1, 1}, Vec3{3, 3, 3}}}}).empty());
    }
    SUBCASE("dataset faces do not count") {
        const ChunkDescriptor left = layout.descriptor(ChunkAddress{0, 0, 0, 0});
        // touches x=0, y=0, z=0, which are dataset faces
        CHECK(boundary_set(left, ExtentMap{{5, Box{Vec3{0, 0, 0}, Vec3{2, 2, 2}}}}).empty());
    }
    SUBCASE("a strictly disjoint box is a format error") {
        const ChunkDescriptor left = layout.descriptor(ChunkAddress{0, 0, 0, 0});
        CHECK_THROWS_AS(boundary_set(left, ExtentMap{{5, Box{Vec3{6, 6, 6}, Vec3{7, 7, 7}}}}),
                        std::invalid_argument);
    }
}

TEST_CASE("combine_edges") {
    SUBCASE("identity on an empty accumulator") {
        RegionGraph acc(LinkageKind::Mean);
        RegionGraph part(LinkageKind::Mean);
        part.add_edge(7, 9, AffinityStat{500'000, 2});
        part.add_node(11);
        combine_edges(acc, part);
        CHECK(acc.node_count() == 3);
        CHECK(acc.sorted_edges() == part.sorted_edges());
    }
    SUBCASE("split interfaces recombine exactly") {
        RegionGraph acc(LinkageKind::Mean);
        acc.add_edge(7, 9, AffinityStat{500'000, 2});
        RegionGraph part(LinkageKind::Mean);
        part.add_edge(7, 9, AffinityStat{900'000, 1});
        combine_edges(acc, part);
        CHECK(acc.find_edge(EdgeKey{7, 9})->stat == AffinityStat{1'400'000, 3});
    }
    SUBCASE("disjoint keys form a disjoint union") {
        RegionGraph acc(LinkageKind::Mean);
        acc.add_edge(1, 2, s1(1));
        RegionGraph part(LinkageKind::Mean);
        part.add_edge(3, 4, s1(2));
        combine_edges(acc, part);
        CHECK(acc.edge_count() == 2);
        CHECK(acc.node_count() == 4);
    }
    SUBCASE("fold order does not matter") {
        std::vector<RegionGraph> parts;
        for (u64 seed = 1; seed <= 4; ++seed)
            parts.push_back(testsup::random_graph(LinkageKind::Mean,
                                                  testsup::RandomGraphSpec{12, 25, 3, seed}));
        std::vector<std::size_t> order{0, 1, 2, 3};
        std::vector<std::vector<std::pair<EdgeKey, AffinityStat>>> results;
        do {
            RegionGraph acc(LinkageKind::Mean);
            for (std::size_t i : order) combine_edges(acc, parts[i]);
            results.push_back(acc.sorted_edges());
        } while (std::next_permutation(order.begin(), order.end()));
        for (const auto& result : results) CHECK(result == results.front());
    }
}

TEST_CASE("split chain runs the deferred merges at the root") {
    ScratchDir scratch("splitchain");
    ChunkStore store(scratch.path, true);
    const StoreManifest manifest = write_split_chain(store);
    const DatasetLayout layout = DatasetLayout::create(manifest.dims, manifest.leaf_dims);

    // Leaf-level behavior: no merges, everything frozen.
    const TaskPlan plan = build_task_plan(layout, manifest, 0);
    REQUIRE(plan.tasks.size() == 3);
    const TaskOutput left = execute_chunk_task(store, layout, manifest, plan.tasks[0],
                                               LinkageKind::Mean, FixedAffinity{500'000},
                                               store_frozen_source(store));
    CHECK(left.rows.empty());
    REQUIRE(left.frozen_edges.size() == 2);
    CHECK(left.frozen_edges[0] == std::pair{EdgeKey{1, 2}, s1(900'000)});
    CHECK(left.frozen_edges[1] == std::pair{EdgeKey{2, 3}, s1(700'000)});

    const RecursiveResult result = agglomerate_recursive(store, layout, manifest,
                                                         LinkageKind::Mean, FixedAffinity{500'000},
                                                         0);
    REQUIRE(result.rows.size() == 3);
    CHECK(result.rows[0] == DendrogramRow{1, 2, s1(900'000)});
    CHECK(result.rows[1] == DendrogramRow{3, 4, s1(800'000)});
    CHECK(result.rows[2] == DendrogramRow{1, 3, s1(700'000)});
    CHECK(result.root_frozen_edges.empty());

    const auto hist = merge_level_histogram(result.rows, result.row_levels);
    CHECK(!hist.contains(0));
    CHECK(hist.at(1) == 3);

    // Same rows as the unsplit chain, and the same flat partition.
    RegionGraph whole = load_global(store, manifest, LinkageKind::Mean);
    const Dendrogram generic_rows = agglomerate_generic(whole, FixedAffinity{500'000});
    CHECK(sorted_rows(generic_rows) == sorted_rows(result.rows));
    const std::vector<SegmentId> universe{1, 2, 3, 4};
    CHECK(flat_partition(generic_rows, universe) == flat_partition(result.rows, universe));
    const auto partition = flat_partition(result.rows, universe);
    for (SegmentId id : universe) CHECK(partition.at(id) == 1);
}

TEST_CASE("task plans collapse small subtrees") {
    ScratchDir scratch("plan");
    ChunkStore store(scratch.path, true);
    const StoreManifest manifest = write_split_chain(store);
    const DatasetLayout layout = DatasetLayout::create(manifest.dims, manifest.leaf_dims);

    const TaskPlan full = build_task_plan(layout, manifest, 0);
    REQUIRE(full.tasks.size() == 3);
    CHECK(full.tasks[0].kind == TaskKind::Leaf);
    CHECK(full.tasks[1].kind == TaskKind::Leaf);
    CHECK(full.tasks[2].kind == TaskKind::Stitch);
    CHECK(full.root().addr == ChunkAddress{1, 0, 0, 0});
    CHECK(full.tasks[2].children.size() == 2);

    // Three edges total: a threshold of 3 collapses the whole tree.
    const TaskPlan collapsed = build_task_plan(layout, manifest, 3);
    REQUIRE(collapsed.tasks.size() == 1);
    CHECK(collapsed.tasks[0].kind == TaskKind::SuperLeaf);

    const RecursiveResult full_run = agglomerate_recursive(
        store, layout, manifest, LinkageKind::Mean, FixedAffinity{500'000}, 0);
    const RecursiveResult collapsed_run = agglomerate_recursive(
        store, layout, manifest, LinkageKind::Mean, FixedAffinity{500'000}, 3);
    CHECK(sorted_rows(full_run.rows) == sorted_rows(collapsed_run.rows));
    // The collapsed root spans the whole dataset: no boundary, generic behavior.
    CHECK(collapsed_run.root_frozen_edges.empty());
}

TEST_CASE("chunking independence on random synthetic datasets") {
    for (u64 seed = 1; seed <= 6; ++seed) {
        for (LinkageKind kind : {LinkageKind::Mean, LinkageKind::Max}) {
            const char* kind_text = kind == LinkageKind::Mean ? "mean" : "max";
            CAPTURE(seed);
            CAPTURE(kind_text);
            SyntheticSpec spec;
            spec.dims = Vec3{12, 12, 12};
            spec.leaf_dims = Vec3{2, 2, 2};
            spec.seed = seed;
            spec.object_mode = seed % 2 == 0 ? ObjectMode::Lines : ObjectMode::Blocks;
            spec.object_cells = seed % 2 == 0 ? Vec3{3, 1, 1} : Vec3{2, 2, 2};
            spec.cell_min = 1;
            spec.cell_max = seed % 3 == 0 ? 2 : 1;
            ScratchDir scratch("indep");
            ChunkStore store(scratch.path, true);
            generate(spec, store);
            const StoreManifest manifest = store.read_manifest();
            const DatasetLayout layout = DatasetLayout::create(manifest.dims, manifest.leaf_dims);

            RegionGraph whole = load_global(store, manifest, kind);
            std::vector<SegmentId> universe = whole.sorted_nodes();
            const Dendrogram generic_rows = agglomerate_generic(whole, FixedAffinity{300'000});
            const auto generic_sorted = sorted_rows(generic_rows);

            for (u64 leaf_threshold : {u64{0}, u64{40}, u64{100'000}}) {
                const RecursiveResult rec = agglomerate_recursive(
                    store, layout, manifest, kind, FixedAffinity{300'000}, leaf_threshold);
                CHECK(sorted_rows(rec.rows) == generic_sorted);
                CHECK(flat_partition(rec.rows, universe) ==
                      flat_partition(generic_rows, universe));
                CHECK(rec.root_frozen_edges.empty());
            }
        }
    }
}

TEST_CASE("contact mass is conserved through the recursion") {
    struct CountingHooks final : TraceHooks {
        u128 merged_sum = 0, discarded_sum = 0;
        u64 merged_count = 0, discarded_count = 0;
        void on_merge(const DendrogramRow& row) override {
            merged_sum += row.stat.sum;
            merged_count += row.stat.count;
        }
        void on_discard(const EdgeKey&, const AffinityStat& stat) override {
            discarded_sum += stat.sum;
            discarded_count += stat.count;
        }
    };

    SyntheticSpec spec;
    spec.dims = Vec3{8, 8, 8};
    spec.leaf_dims = Vec3{4, 4, 4};
    spec.seed = 99;
    spec.object_cells = Vec3{2, 1, 1};
    ScratchDir scratch("conserve");
    ChunkStore store(scratch.path, true);
    const GenerateResult gen = generate(spec, store);
    const StoreManifest manifest = store.read_manifest();
    const DatasetLayout layout = DatasetLayout::create(manifest.dims, manifest.leaf_dims);

    u128 total_sum = 0;
    for (const ChunkAddress& leaf : layout.leaves_under(layout.root())) {
        const LeafLoad load = store.read_leaf(leaf, LinkageKind::Mean, &manifest);
        load.graph.for_each_edge(
            [&](const EdgeKey&, const EdgeRecord& rec) { total_sum += rec.stat.sum; });
    }

    CountingHooks hooks;
    const RecursiveResult rec = agglomerate_recursive(store, layout, manifest, LinkageKind::Mean,
                                                      FixedAffinity{300'000}, 0, &hooks);
    CHECK(rec.root_frozen_edges.empty());
    // Every voxel-pair contribution ends in a merge row or a discard.
    CHECK(hooks.merged_count + hooks.discarded_count == gen.record_count);
    CHECK(hooks.merged_sum + hooks.discarded_sum == total_sum);
}

TEST_CASE("merge level histogram validates provenance") {
    CHECK_THROWS_AS(merge_level_histogram(Dendrogram{DendrogramRow{1, 2, s1(1)}}, {}),
                    std::invalid_argument);
    const auto hist = merge_level_histogram(
        Dendrogram{DendrogramRow{1, 2, s1(1)}, DendrogramRow{1, 3, s1(2)}}, {0, 0});
    CHECK(hist.at(0) == 2);
}

TEST_SUITE_END();
