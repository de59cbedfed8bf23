#include "ragglom/agglomerate.hpp"

#include <algorithm>

namespace ragglom {

namespace {

void fill_queue(MaxAffinityQueue& queue, const RegionGraph& graph, TraceHooks* hooks) {
    graph.for_each_edge([&](const EdgeKey& key, const EdgeRecord& rec) {
        queue.push(key, rec.stat, rec.revision);
        if (hooks) hooks->on_edge_live(key, rec.stat);
    });
}

// Applies one merge and requeues the rewired incident edges.
void apply_merge(RegionGraph& graph, MaxAffinityQueue& queue, Dendrogram& rows,
                 const MaxAffinityQueue::Entry& top, TraceHooks* hooks) {
    if (hooks) hooks->on_edge_dead(top.key, top.stat);
    MergeDelta delta = graph.merge_nodes(top.key.lo, top.key.hi);
    rows.push_back(DendrogramRow{delta.survivor, delta.absorbed, delta.merged_stat});
    if (hooks) hooks->on_merge(rows.back());
    for (const EdgeUpsert& up : delta.upserts) {
        queue.push(up.key, up.stat, up.revision);
        if (hooks) {
            hooks->on_edge_dead(up.old_key, up.old_stat);
            if (up.combined) hooks->on_edge_dead(up.key, up.combined_prev);
            hooks->on_edge_live(up.key, up.stat);
        }
    }
}

}  // namespace

Dendrogram agglomerate_generic(RegionGraph& graph, FixedAffinity threshold, TraceHooks* hooks,
                               AgglomerateStats* stats) {
    MaxAffinityQueue queue(graph.kind());
    fill_queue(queue, graph, hooks);
    Dendrogram rows;
    AgglomerateStats local;
    local.peak_live_edges = graph.edge_count();
    while (auto top = queue.pop_live(graph)) {
        if (hooks) hooks->on_pop(top->key, top->stat);
        if (!value_at_least(graph.kind(), top->stat, threshold)) break;
        apply_merge(graph, queue, rows, *top, hooks);
        ++local.merges;
        local.peak_live_edges = std::max(local.peak_live_edges, graph.edge_count());
    }
    if (stats) *stats = local;
    return rows;
}

ChunkResult agglomerate_chunk(RegionGraph& graph, const std::vector<SegmentId>& boundary,
                              FixedAffinity threshold, TraceHooks* hooks) {
    MaxAffinityQueue queue(graph.kind());
    fill_queue(queue, graph, hooks);

    ChunkResult result{Dendrogram{}, RegionGraph{graph.kind()}, {}, {}};
    result.frozen_nodes.insert(boundary.begin(), boundary.end());
    result.stats.peak_live_edges = graph.edge_count();

    while (auto top = queue.pop_live(graph)) {
        if (hooks) hooks->on_pop(top->key, top->stat);
        const bool lo_frozen = result.frozen_nodes.contains(top->key.lo);
        const bool hi_frozen = result.frozen_nodes.contains(top->key.hi);
        if (lo_frozen || hi_frozen) {
            if (!lo_frozen) {
                result.frozen_nodes.insert(top->key.lo);
                if (hooks) hooks->on_freeze_node(top->key.lo, top->key);
            }
            if (!hi_frozen) {
                result.frozen_nodes.insert(top->key.hi);
                if (hooks) hooks->on_freeze_node(top->key.hi, top->key);
            }
            result.frozen_graph.add_edge(top->key, top->stat);
            graph.remove_edge(top->key);
            ++result.stats.frozen_edges;
            if (hooks) {
                hooks->on_freeze_edge(top->key, top->stat);
                hooks->on_edge_dead(top->key, top->stat);
            }
            continue;
        }
        if (!value_at_least(graph.kind(), top->stat, threshold)) {
            graph.remove_edge(top->key);
            ++result.stats.discarded_edges;
            if (hooks) {
                hooks->on_discard(top->key, top->stat);
                hooks->on_edge_dead(top->key, top->stat);
            }
            continue;
        }
        apply_merge(graph, queue, result.dendrogram, *top, hooks);
        ++result.stats.merges;
        result.stats.peak_live_edges = std::max(result.stats.peak_live_edges, graph.edge_count());
    }
    return result;
}

bool audit_frozen_reachability(const ChunkTraceCollector& trace,
                               const std::unordered_set<SegmentId>& final_frozen) {
    std::unordered_set<SegmentId> reached(trace.initial_boundary.begin(),
                                          trace.initial_boundary.end());
    for (const auto& ev : trace.freeze_events) {
        // The freeze must have been justified by the other endpoint of the
        // popped edge already being frozen.
        const SegmentId other = ev.via.lo == ev.node ? ev.via.hi : ev.via.lo;
        if (!reached.contains(other)) return false;
        reached.insert(ev.node);
    }
    return reached == final_frozen;
}

}  // namespace ragglom
