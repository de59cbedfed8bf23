// Region adjacency graph with exact per-edge interface statistics.
//
// Nodes are segment ids (globally unique, nonzero). Edges are canonical
// unordered pairs carrying an AffinityStat. Node merging rewires the
// absorbed node's edges onto the survivor, combining parallel edges
// exactly. Every edge mutation bumps a graph-wide revision counter whose
// value is stored on the edge record; a revision uniquely identifies one
// state of one edge over the whole life of the graph, which is what the
// lazy-deletion queue in the agglomerator validates against.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "ragglom/affinity.hpp"

namespace ragglom {

using SegmentId = std::uint64_t;  // 0 is reserved for "background/none"

struct EdgeKey {
    SegmentId lo = 0;
    SegmentId hi = 0;

    friend auto operator<=>(const EdgeKey&, const EdgeKey&) = default;
};

// Canonicalizes an unordered pair. Self loops are rejected.
EdgeKey make_edge_key(SegmentId a, SegmentId b);

struct EdgeKeyHash {
    std::size_t operator()(const EdgeKey& k) const {
        u64 x = k.lo * 0x9e3779b97f4a7c15ULL ^ (k.hi + 0x7f4a7c15ULL);
        x ^= x >> 30;
        x *= 0xbf58476d1ce4e5b9ULL;
        x ^= x >> 27;
        x *= 0x94d049bb133111ebULL;
        x ^= x >> 31;
        return static_cast<std::size_t>(x);
    }
};

struct EdgeRecord {
    AffinityStat stat;
    u64 revision = 0;
};

struct DendrogramRow {
    SegmentId survivor = 0;
    SegmentId absorbed = 0;
    AffinityStat stat;

    bool operator==(const DendrogramRow& o) const {
        return survivor == o.survivor && absorbed == o.absorbed && stat == o.stat;
    }
};

// Ordered merge records; truncated at the run's threshold.
using Dendrogram = std::vector<DendrogramRow>;

// One edge state change produced by merge_nodes: the absorbed node's edge
// `old_key` was rewired onto `key`, combining with that key's previous stat
// when one existed.
struct EdgeUpsert {
    EdgeKey key;
    AffinityStat stat;
    u64 revision = 0;
    EdgeKey old_key;
    AffinityStat old_stat;
    bool combined = false;
    AffinityStat combined_prev;  // stat previously at `key`; valid when combined
};

struct MergeDelta {
    SegmentId survivor = 0;
    SegmentId absorbed = 0;
    AffinityStat merged_stat;              // stat of the merged edge itself
    std::vector<EdgeUpsert> upserts;       // rewired / combined incident edges
};

class RegionGraph {
public:
    explicit RegionGraph(LinkageKind kind) : kind_(kind) {}

    LinkageKind kind() const { return kind_; }

    void reserve(std::size_t nodes, std::size_t edges);

    // Ensures the node exists (possibly isolated).
    void add_node(SegmentId id);

    // Inserts the (canonicalized) edge, combining with an existing stat when
    // the key is already present. Both endpoints are ensured present.
    void add_edge(SegmentId a, SegmentId b, const AffinityStat& stat);
    void add_edge(const EdgeKey& key, const AffinityStat& stat);

    // Removes one edge; endpoints stay. No-op contractually not allowed:
    // the key must exist.
    void remove_edge(const EdgeKey& key);

    // Merges v into u (or u into v): the survivor is always min(u, v).
    // The edge (u,v) must exist; it is removed and reported as merged_stat.
    // Every other edge of the absorbed node is either re-keyed onto the
    // survivor or combined with the survivor's parallel edge.
    MergeDelta merge_nodes(SegmentId u, SegmentId v);

    bool has_node(SegmentId id) const { return adjacency_.contains(id); }
    bool has_edge(const EdgeKey& key) const { return edges_.contains(key); }
    const EdgeRecord* find_edge(const EdgeKey& key) const;

    std::size_t node_count() const { return adjacency_.size(); }
    std::size_t edge_count() const { return edges_.size(); }

    const std::vector<SegmentId>& neighbors(SegmentId id) const;

    // Neighbor with the maximal interface statistic; exact-value ties break
    // toward the smaller segment id. nullopt when the node is isolated.
    std::optional<SegmentId> nearest_neighbor(SegmentId id) const;

    bool is_mutual_nearest_pair(SegmentId u, SegmentId v) const;

    template <typename Fn>
    void for_each_edge(Fn&& fn) const {
        for (const auto& [key, rec] : edges_) fn(key, rec);
    }

    template <typename Fn>
    void for_each_node(Fn&& fn) const {
        for (const auto& [id, adj] : adjacency_) fn(id);
    }

    // Collects nodes / edges in canonical order (for serialization and tests).
    std::vector<SegmentId> sorted_nodes() const;
    std::vector<std::pair<EdgeKey, AffinityStat>> sorted_edges() const;

    // Audits that the adjacency lists and the edge map describe the same
    // edge set, keys are canonical, and no self loops exist. Returns false
    // (and stops) on the first violation.
    bool check_consistent() const;

private:
    void adjacency_insert(SegmentId node, SegmentId neighbor);
    void adjacency_erase(SegmentId node, SegmentId neighbor);

    LinkageKind kind_;
    u64 next_revision_ = 1;
    std::unordered_map<SegmentId, std::vector<SegmentId>> adjacency_;
    std::unordered_map<EdgeKey, EdgeRecord, EdgeKeyHash> edges_;
};

}  // namespace ragglom
