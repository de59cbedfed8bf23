// Heap-driven agglomeration.
//
// agglomerate_generic repeatedly merges the strongest live edge until the
// strongest falls below the threshold. agglomerate_chunk is the variant for
// partial inputs: segments touching artificial chunk boundaries start out
// frozen, any edge popped with a frozen endpoint freezes both endpoints and
// is routed to a frozen residual graph instead of merging, and sub-threshold
// pops are skipped rather than terminating the loop (frozen edges may still
// be queued behind them). The frozen test deliberately precedes the
// threshold test: a frozen interface below the threshold can still grow
// above it once partial edges are stitched at a higher level.

#pragma once

#include <cstdint>
#include <queue>
#include <unordered_set>
#include <vector>

#include "ragglom/region_graph.hpp"

namespace ragglom {

// Observation points for audits and statistics. All callbacks default to
// no-ops; pass nullptr in production paths.
struct TraceHooks {
    virtual ~TraceHooks() = default;

    // Edge lifecycle, including the initial population.
    virtual void on_edge_live(const EdgeKey&, const AffinityStat&) {}
    virtual void on_edge_dead(const EdgeKey&, const AffinityStat&) {}

    // One live pop, before it is routed.
    virtual void on_pop(const EdgeKey&, const AffinityStat&) {}

    virtual void on_merge(const DendrogramRow&) {}
    virtual void on_discard(const EdgeKey&, const AffinityStat&) {}
    virtual void on_freeze_edge(const EdgeKey&, const AffinityStat&) {}
    virtual void on_freeze_node(SegmentId, const EdgeKey&) {}
};

// Max-priority queue over edges ordered by (stat, then canonical key with
// smaller keys ranking higher among exact-value ties). Deletion is lazy:
// entries carry the edge revision they were pushed with and a popped entry
// is live only while the graph still holds that revision.
class MaxAffinityQueue {
public:
    struct Entry {
        AffinityStat stat;
        EdgeKey key;
        u64 revision = 0;
    };

    explicit MaxAffinityQueue(LinkageKind kind) : kind_(kind), heap_(Less{kind}) {}

    void push(const EdgeKey& key, const AffinityStat& stat, u64 revision) {
        heap_.push(Entry{stat, key, revision});
    }

    // Discards stale entries and returns the maximal live one, or nullopt
    // once the queue is exhausted.
    std::optional<Entry> pop_live(const RegionGraph& graph) {
        while (!heap_.empty()) {
            Entry top = heap_.top();
            heap_.pop();
            const EdgeRecord* rec = graph.find_edge(top.key);
            if (rec != nullptr && rec->revision == top.revision) return top;
        }
        return std::nullopt;
    }

    std::size_t size() const { return heap_.size(); }

private:
    struct Less {
        LinkageKind kind;
        bool operator()(const Entry& a, const Entry& b) const {
            const auto order = compare(kind, a.stat, b.stat);
            if (order != 0) return order < 0;
            return a.key > b.key;
        }
    };

    LinkageKind kind_;
    std::priority_queue<Entry, std::vector<Entry>, Less> heap_;
};

struct AgglomerateStats {
    u64 merges = 0;
    u64 discarded_edges = 0;
    u64 frozen_edges = 0;
    std::size_t peak_live_edges = 0;
};

// Merges the strongest live edge while its value is >= threshold, recording
// (survivor, absorbed, stat) rows. The graph is left in its residual state.
Dendrogram agglomerate_generic(RegionGraph& graph, FixedAffinity threshold,
                               TraceHooks* hooks = nullptr, AgglomerateStats* stats = nullptr);

struct ChunkResult {
    Dendrogram dendrogram;
    RegionGraph frozen_graph;
    std::unordered_set<SegmentId> frozen_nodes;
    AgglomerateStats stats;
};

// Chunked variant: `boundary` seeds the frozen set. Pops every edge exactly
// once; each is merged, discarded (unfrozen and below threshold) or frozen.
// On return the working graph holds no edges.
ChunkResult agglomerate_chunk(RegionGraph& graph, const std::vector<SegmentId>& boundary,
                              FixedAffinity threshold, TraceHooks* hooks = nullptr);

// Trace collector sufficient for the freeze soundness audit below.
struct ChunkTraceCollector final : TraceHooks {
    struct FreezeEvent {
        SegmentId node;
        EdgeKey via;
    };

    std::vector<SegmentId> initial_boundary;
    std::vector<FreezeEvent> freeze_events;
    std::vector<EdgeKey> frozen_edge_pops;

    void on_freeze_node(SegmentId node, const EdgeKey& via) override {
        freeze_events.push_back(FreezeEvent{node, via});
    }
    void on_freeze_edge(const EdgeKey& key, const AffinityStat&) override {
        frozen_edge_pops.push_back(key);
    }
};

// True iff every finally-frozen node is in the initial boundary or reachable
// from it through the chain of popped frozen edges, in pop order.
bool audit_frozen_reachability(const ChunkTraceCollector& trace,
                               const std::unordered_set<SegmentId>& final_frozen);

}  // namespace ragglom
