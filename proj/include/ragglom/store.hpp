// Durable chunk store.
//
// Layout under the store root:
//   manifest.json        dataset layout, generation parameters, per-leaf stats
//   truth.bin            planted ground truth (synthetic stores)
//   leaves/0/x_y_z.rag   leaf region-graph inputs
//   out/L/x_y_z.dend     per-chunk dendrogram fragment
//   out/L/x_y_z.frozen   per-chunk frozen residual graph
//   out/L/x_y_z.ok       completion marker (sizes, CRC-64 checksums, stats)
//
// Writes are atomic (write to a temp file, then rename); an output entry
// exists only once its .ok marker does, and entries are immutable after
// commit. All binary files are little-endian with a magic and a version.

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ragglom/geometry.hpp"
#include "ragglom/region_graph.hpp"

namespace ragglom {

struct StoreError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A dependency that is not committed yet; retriable.
struct MissingEntryError : StoreError {
    using StoreError::StoreError;
};

// Checksum mismatch or malformed bytes; fatal.
struct CorruptStoreError : StoreError {
    using StoreError::StoreError;
};

u64 crc64(const void* data, std::size_t size, u64 seed = 0);

struct NodeExtent {
    SegmentId id = 0;
    Box box;
};

// One interface contribution; count is 1 for raw voxel-pair records, so the
// same bytes ingest exactly under either linkage kind.
struct EdgeContribution {
    EdgeKey key;
    AffinityStat stat;
};

struct LeafPayload {
    std::vector<NodeExtent> nodes;        // sorted by id
    std::vector<SegmentId> boundary;      // sorted
    std::vector<EdgeContribution> records;  // sorted by (key, sum)
};

// Decoded leaf, folded under one linkage kind.
struct LeafLoad {
    RegionGraph graph;
    std::vector<SegmentId> boundary;
    std::unordered_map<SegmentId, Box> extents;
    u64 record_count = 0;
};

struct TaskStats {
    u64 input_edges = 0;
    u64 merges = 0;
    u64 discarded_edges = 0;
    u64 frozen_edges = 0;
    u64 peak_live_edges = 0;
    u64 wall_ms = 0;
    u64 rss_kb = 0;
};

struct TaskOutput {
    LinkageKind kind = LinkageKind::Mean;
    FixedAffinity threshold;
    Dendrogram rows;
    std::vector<std::pair<EdgeKey, AffinityStat>> frozen_edges;  // sorted by key
    std::vector<NodeExtent> frozen_nodes;                        // sorted by id
    TaskStats stats;
};

struct FrozenLoad {
    LinkageKind kind = LinkageKind::Mean;
    FixedAffinity threshold;
    std::vector<std::pair<EdgeKey, AffinityStat>> edges;
    std::vector<NodeExtent> nodes;
};

struct LeafSummary {
    u64 nodes = 0;
    u64 edges = 0;    // distinct keys
    u64 records = 0;
    u64 crc = 0;
};

struct StoreManifest {
    Vec3 dims;
    Vec3 leaf_dims;
    u64 seed = 0;
    u64 node_count = 0;
    u64 edge_count = 0;
    u64 record_count = 0;
    std::string generator;  // spec echo, free-form
    std::unordered_map<std::string, LeafSummary> leaves;  // key: "0/x_y_z"

    u64 subtree_edges(const DatasetLayout& layout, const ChunkAddress& addr) const;
};

// Dendrogram files ("RAGD"): header magic, version, linkage kind byte,
// fixed-point threshold; then 40-byte rows in merge order.
struct DendrogramFile {
    LinkageKind kind = LinkageKind::Mean;
    FixedAffinity threshold;
    Dendrogram rows;
};

void write_dendrogram_file(const std::filesystem::path& path, const DendrogramFile& file);
DendrogramFile read_dendrogram_file(const std::filesystem::path& path);

// Flat segmentation ("RAGP"): (supervoxel id, representative id) pairs
// sorted by supervoxel id.
void write_flat_segmentation(const std::filesystem::path& path,
                             const std::vector<std::pair<SegmentId, SegmentId>>& rows);
std::vector<std::pair<SegmentId, SegmentId>> read_flat_segmentation(
    const std::filesystem::path& path);

class ChunkStore {
public:
    explicit ChunkStore(std::filesystem::path root, bool create = false);

    const std::filesystem::path& root() const { return root_; }

    std::filesystem::path leaf_path(const ChunkAddress& addr) const;
    std::filesystem::path dend_path(const ChunkAddress& addr) const;
    std::filesystem::path frozen_path(const ChunkAddress& addr) const;
    std::filesystem::path ok_path(const ChunkAddress& addr) const;
    std::filesystem::path claim_path(const ChunkAddress& addr) const;
    std::filesystem::path fail_path(const ChunkAddress& addr) const;

    bool has_manifest() const;
    void write_manifest(const StoreManifest& manifest);
    StoreManifest read_manifest() const;

    void write_leaf(const ChunkAddress& addr, const LeafPayload& payload, LeafSummary* summary);
    // Verifies the CRC recorded in the manifest when one is available.
    LeafLoad read_leaf(const ChunkAddress& addr, LinkageKind kind, const StoreManifest* manifest) const;
    // Node table only (cheap id universe scans).
    std::vector<SegmentId> read_leaf_nodes(const ChunkAddress& addr) const;

    bool output_committed(const ChunkAddress& addr) const;
    void commit_task_output(const ChunkAddress& addr, const TaskOutput& output);
    FrozenLoad read_frozen(const ChunkAddress& addr) const;
    DendrogramFile read_dend_fragment(const ChunkAddress& addr) const;
    TaskStats read_task_stats(const ChunkAddress& addr) const;

    void write_truth(const std::vector<std::pair<SegmentId, u64>>& rows);
    std::vector<std::pair<SegmentId, u64>> read_truth() const;

private:
    std::filesystem::path root_;
};

}  // namespace ragglom
