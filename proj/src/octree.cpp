#include "ragglom/octree.hpp"

#include <algorithm>
#include <stdexcept>

namespace ragglom {

std::vector<SegmentId> boundary_set(const ChunkDescriptor& chunk, const ExtentMap& extents) {
    const Box& bounds = chunk.bounds;
    const Box& dataset = chunk.dataset_bounds;
    std::vector<SegmentId> out;
    for (const auto& [id, box] : extents) {
        if (strictly_disjoint(box, bounds))
            throw std::invalid_argument("node " + std::to_string(id) +
                                        " lies outside chunk " + address_path(chunk.address));
        const bool touches =
            (bounds.lo.x != dataset.lo.x && box.lo.x <= bounds.lo.x) ||
            (bounds.hi.x != dataset.hi.x && box.hi.x >= bounds.hi.x) ||
            (bounds.lo.y != dataset.lo.y && box.lo.y <= bounds.lo.y) ||
            (bounds.hi.y != dataset.hi.y && box.hi.y >= bounds.hi.y) ||
            (bounds.lo.z != dataset.lo.z && box.lo.z <= bounds.lo.z) ||
            (bounds.hi.z != dataset.hi.z && box.hi.z >= bounds.hi.z);
        if (touches) out.push_back(id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

void combine_edges(RegionGraph& acc, const RegionGraph& part) {
    if (acc.kind() != part.kind()) throw std::logic_error("combine_edges: linkage kind mismatch");
    part.for_each_node([&](SegmentId id) { acc.add_node(id); });
    part.for_each_edge([&](const EdgeKey& key, const EdgeRecord& rec) {
        acc.add_edge(key, rec.stat);
    });
}

void combine_edges(RegionGraph& acc, const std::vector<std::pair<EdgeKey, AffinityStat>>& part) {
    for (const auto& [key, stat] : part) acc.add_edge(key, stat);
}

const TaskSpec* TaskPlan::find(const ChunkAddress& addr) const {
    for (const TaskSpec& task : tasks) {
        if (task.addr == addr) return &task;
    }
    return nullptr;
}

TaskPlan build_task_plan(const DatasetLayout& layout, const StoreManifest& manifest,
                         u64 leaf_threshold) {
    TaskPlan plan;
    // Walk top-down marking the maximal collapsible subtrees, then emit
    // tasks bottom-up in level-major address order.
    std::vector<std::pair<ChunkAddress, TaskKind>> chosen;
    std::vector<ChunkAddress> stack{layout.root()};
    while (!stack.empty()) {
        const ChunkAddress addr = stack.back();
        stack.pop_back();
        if (addr.level == 0) {
            chosen.emplace_back(addr, TaskKind::Leaf);
            continue;
        }
        if (leaf_threshold > 0 && manifest.subtree_edges(layout, addr) <= leaf_threshold) {
            chosen.emplace_back(addr, TaskKind::SuperLeaf);
            continue;
        }
        chosen.emplace_back(addr, TaskKind::Stitch);
        for (const ChunkAddress& child : layout.children(addr)) stack.push_back(child);
    }
    std::sort(chosen.begin(), chosen.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [addr, kind] : chosen) {
        TaskSpec task{addr, kind, {}};
        if (kind == TaskKind::Stitch) task.children = layout.children(addr);
        plan.tasks.push_back(std::move(task));
    }
    return plan;
}

namespace {

// Rolls input extents forward through the merge rows: a survivor's box grows
// to cover everything it absorbed.
ExtentMap roll_extents(ExtentMap extents, const Dendrogram& rows) {
    for (const DendrogramRow& row : rows) {
        auto absorbed = extents.find(row.absorbed);
        auto survivor = extents.find(row.survivor);
        if (absorbed == extents.end() || survivor == extents.end())
            throw std::logic_error("merge row references unknown extent");
        survivor->second = box_union(survivor->second, absorbed->second);
        extents.erase(absorbed);
    }
    return extents;
}

struct AssembledInput {
    RegionGraph graph;
    ExtentMap extents;
    std::vector<SegmentId> boundary;
    bool boundary_from_leaf = false;
};

AssembledInput assemble_input(const ChunkStore& store, const DatasetLayout& layout,
                              const StoreManifest& manifest, const TaskSpec& task,
                              LinkageKind kind, FixedAffinity threshold,
                              const FrozenSource& frozen_source) {
    AssembledInput input{RegionGraph{kind}, {}, {}, false};
    switch (task.kind) {
        case TaskKind::Leaf: {
            LeafLoad leaf = store.read_leaf(task.addr, kind, &manifest);
            input.graph = std::move(leaf.graph);
            input.extents = std::move(leaf.extents);
            input.boundary = std::move(leaf.boundary);
            input.boundary_from_leaf = true;
            break;
        }
        case TaskKind::SuperLeaf: {
            for (const ChunkAddress& leaf_addr : layout.leaves_under(task.addr)) {
                LeafLoad leaf = store.read_leaf(leaf_addr, kind, &manifest);
                combine_edges(input.graph, leaf.graph);
                for (const auto& [id, box] : leaf.extents) input.extents.emplace(id, box);
            }
            break;
        }
        case TaskKind::Stitch: {
            for (const ChunkAddress& child : task.children) {
                FrozenLoad frozen = frozen_source(child);
                if (frozen.kind != kind || !(frozen.threshold == threshold))
                    throw CorruptStoreError("frozen output of " + address_path(child) +
                                            " was produced by a different run configuration");
                for (const NodeExtent& node : frozen.nodes) {
                    input.graph.add_node(node.id);
                    input.extents.emplace(node.id, node.box);
                }
                combine_edges(input.graph, frozen.edges);
            }
            break;
        }
    }
    if (!input.boundary_from_leaf)
        input.boundary = boundary_set(layout.descriptor(task.addr), input.extents);
    return input;
}

}  // namespace

FrozenSource store_frozen_source(const ChunkStore& store) {
    return [&store](const ChunkAddress& addr) { return store.read_frozen(addr); };
}

TaskOutput execute_chunk_task(const ChunkStore& store, const DatasetLayout& layout,
                              const StoreManifest& manifest, const TaskSpec& task,
                              LinkageKind kind, FixedAffinity threshold,
                              const FrozenSource& frozen_source, TraceHooks* hooks) {
    AssembledInput input =
        assemble_input(store, layout, manifest, task, kind, threshold, frozen_source);
    TaskOutput output;
    output.kind = kind;
    output.threshold = threshold;
    output.stats.input_edges = input.graph.edge_count();

    ChunkResult result = agglomerate_chunk(input.graph, input.boundary, threshold, hooks);
    output.rows = std::move(result.dendrogram);
    output.frozen_edges = result.frozen_graph.sorted_edges();
    output.stats.merges = result.stats.merges;
    output.stats.discarded_edges = result.stats.discarded_edges;
    output.stats.frozen_edges = result.stats.frozen_edges;
    output.stats.peak_live_edges = result.stats.peak_live_edges;

    const ExtentMap rolled = roll_extents(std::move(input.extents), output.rows);
    for (SegmentId id : result.frozen_graph.sorted_nodes()) {
        auto it = rolled.find(id);
        if (it == rolled.end()) throw std::logic_error("frozen node without extent");
        output.frozen_nodes.push_back(NodeExtent{id, it->second});
    }
    return output;
}

RecursiveResult agglomerate_recursive(const ChunkStore& store, const DatasetLayout& layout,
                                      const StoreManifest& manifest, LinkageKind kind,
                                      FixedAffinity threshold, u64 leaf_threshold,
                                      TraceHooks* hooks) {
    const TaskPlan plan = build_task_plan(layout, manifest, leaf_threshold);
    std::map<ChunkAddress, FrozenLoad> frozen_outputs;
    const FrozenSource source = [&frozen_outputs](const ChunkAddress& addr) {
        auto it = frozen_outputs.find(addr);
        if (it == frozen_outputs.end())
            throw MissingEntryError("frozen output not available: " + address_path(addr));
        return it->second;
    };
    RecursiveResult result;
    // Tasks are level-major, so children always precede their parents and
    // executing in plan order is a valid topological order.
    for (const TaskSpec& task : plan.tasks) {
        TaskOutput output =
            execute_chunk_task(store, layout, manifest, task, kind, threshold, source, hooks);
        for (const DendrogramRow& row : output.rows) {
            result.rows.push_back(row);
            result.row_levels.push_back(task.addr.level);
        }
        if (task.addr == plan.root().addr) result.root_frozen_edges = output.frozen_edges;
        frozen_outputs.emplace(task.addr,
                               FrozenLoad{kind, threshold, std::move(output.frozen_edges),
                                          std::move(output.frozen_nodes)});
        for (const ChunkAddress& child : task.children) frozen_outputs.erase(child);
    }
    return result;
}

std::map<u32, u64> merge_level_histogram(const Dendrogram& rows,
                                         const std::vector<u32>& row_levels) {
    if (rows.size() != row_levels.size())
        throw std::invalid_argument("provenance does not match dendrogram");
    std::map<u32, u64> hist;
    for (u32 level : row_levels) ++hist[level];
    return hist;
}

}  // namespace ragglom
