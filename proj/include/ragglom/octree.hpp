// Spatial chunking: boundary supervoxel determination, residual graph
// assembly from frozen chunk outputs, and the recursive agglomeration
// driver over an octree of chunks.
//
// A supervoxel is a boundary member of a chunk when its bounding box
// reaches an artificial face of the chunk (a face that is not part of the
// dataset boundary). Boxes extending past the chunk, flush against a face
// from either side, all count as reaching it; only boundary supervoxels can
// have incomplete edge lists inside the chunk, and clusters formed by
// merging strictly-interior supervoxels can never become boundary members
// at any coarser level.

#pragma once

#include <functional>
#include <map>
#include <unordered_map>
#include <vector>

#include "ragglom/agglomerate.hpp"
#include "ragglom/geometry.hpp"
#include "ragglom/store.hpp"

namespace ragglom {

using ExtentMap = std::unordered_map<SegmentId, Box>;

// Sorted boundary supervoxels of a chunk. A node box strictly disjoint from
// the chunk is a format error.
std::vector<SegmentId> boundary_set(const ChunkDescriptor& chunk, const ExtentMap& extents);

// Folds `part` into `acc`: node sets are unioned, stats of shared edge keys
// are combined, other edges copied. Commutative and associative over parts.
void combine_edges(RegionGraph& acc, const RegionGraph& part);
void combine_edges(RegionGraph& acc, const std::vector<std::pair<EdgeKey, AffinityStat>>& part);

enum class TaskKind {
    Leaf,       // loads one leaf input file
    SuperLeaf,  // subtree small enough: loads and unions all descendant leaves
    Stitch,     // combines the children's frozen graphs
};

struct TaskSpec {
    ChunkAddress addr;
    TaskKind kind = TaskKind::Leaf;
    std::vector<ChunkAddress> children;  // empty for Leaf / SuperLeaf
};

// The chunk tasks of one run, level-major, address order within a level.
// A subtree whose leaf inputs hold at most `leaf_threshold` edges collapses
// into a single SuperLeaf task; leaf_threshold 0 keeps the full octree.
struct TaskPlan {
    std::vector<TaskSpec> tasks;

    const TaskSpec& root() const { return tasks.back(); }
    const TaskSpec* find(const ChunkAddress& addr) const;
};

TaskPlan build_task_plan(const DatasetLayout& layout, const StoreManifest& manifest,
                         u64 leaf_threshold);

// Supplies the frozen outputs a stitch task consumes. The distributed
// executor reads them back from the store; the sequential reference keeps
// them in memory. Must throw MissingEntryError for uncommitted children.
using FrozenSource = std::function<FrozenLoad(const ChunkAddress&)>;

FrozenSource store_frozen_source(const ChunkStore& store);

// Runs one chunk task: assembles the input graph (leaf files for Leaf and
// SuperLeaf tasks, children's frozen graphs for Stitch tasks), seeds the
// frozen set from the chunk's boundary supervoxels, runs the chunk
// agglomeration and rolls cluster extents forward onto the frozen nodes.
// Pure function of its inputs.
TaskOutput execute_chunk_task(const ChunkStore& store, const DatasetLayout& layout,
                              const StoreManifest& manifest, const TaskSpec& task,
                              LinkageKind kind, FixedAffinity threshold,
                              const FrozenSource& frozen_source, TraceHooks* hooks = nullptr);

struct RecursiveResult {
    Dendrogram rows;
    std::vector<u32> row_levels;  // provenance: octree level per row
    std::vector<std::pair<EdgeKey, AffinityStat>> root_frozen_edges;
};

// Sequential in-process reference for the distributed pipeline: executes the
// task plan in order, carrying frozen graphs in memory, and assembles rows
// in canonical order (level-major, address order within a level) — the same
// order the distributed executor uses. Does not write to the store.
RecursiveResult agglomerate_recursive(const ChunkStore& store, const DatasetLayout& layout,
                                      const StoreManifest& manifest, LinkageKind kind,
                                      FixedAffinity threshold, u64 leaf_threshold,
                                      TraceHooks* hooks = nullptr);

// Merge counts per octree level.
std::map<u32, u64> merge_level_histogram(const Dendrogram& rows,
                                         const std::vector<u32>& row_levels);

}  // namespace ragglom
