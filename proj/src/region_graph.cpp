#include "ragglom/region_graph.hpp"

#include <algorithm>
#include <stdexcept>

namespace ragglom {

EdgeKey make_edge_key(SegmentId a, SegmentId b) {
    if (a == b) throw std::invalid_argument("edge key: self loop");
    if (a == 0 || b == 0) throw std::invalid_argument("edge key: segment id 0 is reserved");
    return a < b ? EdgeKey{a, b} : EdgeKey{b, a};
}

void RegionGraph::reserve(std::size_t nodes, std::size_t edges) {
    adjacency_.reserve(nodes);
    edges_.reserve(edges);
}

void RegionGraph::add_node(SegmentId id) {
    if (id == 0) throw std::invalid_argument("segment id 0 is reserved");
    adjacency_.try_emplace(id);
}

void RegionGraph::add_edge(SegmentId a, SegmentId b, const AffinityStat& stat) {
    add_edge(make_edge_key(a, b), stat);
}

void RegionGraph::add_edge(const EdgeKey& key, const AffinityStat& stat) {
    if (key.lo >= key.hi || key.lo == 0) throw std::invalid_argument("edge key not canonical");
    auto [it, inserted] = edges_.try_emplace(key, EdgeRecord{stat, next_revision_++});
    if (!inserted) {
        it->second.stat = combine(kind_, it->second.stat, stat);
        it->second.revision = next_revision_++;
        return;
    }
    add_node(key.lo);
    add_node(key.hi);
    adjacency_insert(key.lo, key.hi);
    adjacency_insert(key.hi, key.lo);
}

void RegionGraph::remove_edge(const EdgeKey& key) {
    auto it = edges_.find(key);
    if (it == edges_.end()) throw std::logic_error("remove_edge: edge does not exist");
    edges_.erase(it);
    adjacency_erase(key.lo, key.hi);
    adjacency_erase(key.hi, key.lo);
}

MergeDelta RegionGraph::merge_nodes(SegmentId u, SegmentId v) {
    const EdgeKey merged_key = make_edge_key(u, v);
    auto merged_it = edges_.find(merged_key);
    if (merged_it == edges_.end()) throw std::logic_error("merge_nodes: edge does not exist");

    MergeDelta delta;
    delta.survivor = merged_key.lo;
    delta.absorbed = merged_key.hi;
    delta.merged_stat = merged_it->second.stat;

    edges_.erase(merged_it);
    adjacency_erase(delta.survivor, delta.absorbed);

    auto absorbed_adj = adjacency_.find(delta.absorbed);
    // Move ownership of the neighbor list; entries are consumed below.
    std::vector<SegmentId> rest = std::move(absorbed_adj->second);
    adjacency_.erase(absorbed_adj);

    for (SegmentId w : rest) {
        if (w == delta.survivor) continue;
        const EdgeKey old_key = make_edge_key(delta.absorbed, w);
        auto old_it = edges_.find(old_key);
        AffinityStat stat = old_it->second.stat;
        edges_.erase(old_it);
        adjacency_erase(w, delta.absorbed);

        EdgeUpsert upsert;
        upsert.old_key = old_key;
        upsert.old_stat = stat;
        const EdgeKey new_key = make_edge_key(delta.survivor, w);
        auto [it, inserted] = edges_.try_emplace(new_key, EdgeRecord{stat, next_revision_++});
        if (!inserted) {
            upsert.combined = true;
            upsert.combined_prev = it->second.stat;
            it->second.stat = combine(kind_, it->second.stat, stat);
            it->second.revision = next_revision_++;
        } else {
            adjacency_insert(delta.survivor, w);
            adjacency_insert(w, delta.survivor);
        }
        upsert.key = new_key;
        upsert.stat = it->second.stat;
        upsert.revision = it->second.revision;
        delta.upserts.push_back(upsert);
    }
    return delta;
}

const EdgeRecord* RegionGraph::find_edge(const EdgeKey& key) const {
    auto it = edges_.find(key);
    return it == edges_.end() ? nullptr : &it->second;
}

const std::vector<SegmentId>& RegionGraph::neighbors(SegmentId id) const {
    auto it = adjacency_.find(id);
    if (it == adjacency_.end()) throw std::logic_error("neighbors: node does not exist");
    return it->second;
}

std::optional<SegmentId> RegionGraph::nearest_neighbor(SegmentId id) const {
    const auto& adj = neighbors(id);
    std::optional<SegmentId> best;
    const AffinityStat* best_stat = nullptr;
    for (SegmentId w : adj) {
        const AffinityStat& stat = edges_.at(make_edge_key(id, w)).stat;
        if (!best) {
            best = w;
            best_stat = &stat;
            continue;
        }
        const auto order = compare(kind_, stat, *best_stat);
        if (order > 0 || (order == 0 && w < *best)) {
            best = w;
            best_stat = &stat;
        }
    }
    return best;
}

bool RegionGraph::is_mutual_nearest_pair(SegmentId u, SegmentId v) const {
    return nearest_neighbor(u) == v && nearest_neighbor(v) == u;
}

std::vector<SegmentId> RegionGraph::sorted_nodes() const {
    std::vector<SegmentId> out;
    out.reserve(adjacency_.size());
    for (const auto& [id, adj] : adjacency_) out.push_back(id);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::pair<EdgeKey, AffinityStat>> RegionGraph::sorted_edges() const {
    std::vector<std::pair<EdgeKey, AffinityStat>> out;
    out.reserve(edges_.size());
    for (const auto& [key, rec] : edges_) out.emplace_back(key, rec.stat);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

bool RegionGraph::check_consistent() const {
    std::size_t adjacency_entries = 0;
    for (const auto& [id, adj] : adjacency_) {
        for (SegmentId w : adj) {
            if (w == id) return false;
            if (!edges_.contains(make_edge_key(id, w))) return false;
        }
        adjacency_entries += adj.size();
    }
    if (adjacency_entries != 2 * edges_.size()) return false;
    for (const auto& [key, rec] : edges_) {
        if (key.lo == 0 || key.lo >= key.hi) return false;
        if (rec.stat.count == 0) return false;
        auto lo_it = adjacency_.find(key.lo);
        auto hi_it = adjacency_.find(key.hi);
        if (lo_it == adjacency_.end() || hi_it == adjacency_.end()) return false;
        if (std::find(lo_it->second.begin(), lo_it->second.end(), key.hi) == lo_it->second.end())
            return false;
        if (std::find(hi_it->second.begin(), hi_it->second.end(), key.lo) == hi_it->second.end())
            return false;
    }
    return true;
}

void RegionGraph::adjacency_insert(SegmentId node, SegmentId neighbor) {
    adjacency_[node].push_back(neighbor);
}

void RegionGraph::adjacency_erase(SegmentId node, SegmentId neighbor) {
    auto& adj = adjacency_.at(node);
    auto it = std::find(adj.begin(), adj.end(), neighbor);
    if (it == adj.end()) throw std::logic_error("adjacency desync");
    *it = adj.back();
    adj.pop_back();
}

}  // namespace ragglom
