// Deterministic synthetic dataset generator.
//
// Supervoxels are axis-aligned boxes forming a product tiling of the voxel
// lattice (per-axis cut positions), so boxes freely straddle leaf chunk
// boundaries. Every supervoxel belongs to exactly one planted object;
// voxel-pair affinities are drawn from a high band inside objects and a low
// band between them, plus a per-pair jitter that keeps values distinct.
// A voxel pair's affinity depends only on the spec and the pair itself —
// never on the leaf tiling — so stores generated with different leaf sizes
// describe the identical global graph.
//
// Pair attribution: a voxel pair belongs to the leaf containing its
// lower-coordinate voxel. Interfaces that cross or lie on leaf faces are
// therefore split into partial statistics that stitching recombines
// exactly.

#pragma once

#include <vector>

#include "ragglom/geometry.hpp"
#include "ragglom/store.hpp"

namespace ragglom {

enum class ObjectMode {
    Lines,         // runs of consecutive cells along the x axis, phase-shifted per row
    Blocks,        // rectangular groups of cells
    LeafInterior,  // one-cell singleton shell per leaf, block objects strictly inside
};

enum class JitterMode {
    GlobalUnique,  // all pair affinities distinct within their band (small datasets)
    ObjectUnique,  // distinct within each object's intra band; inter band hashed
    Hashed,        // hashed everywhere
};

struct SyntheticSpec {
    Vec3 dims;               // fine lattice, voxels
    Vec3 leaf_dims;          // must divide dims
    u32 cell_min = 1;        // per-axis cell run lengths, sampled uniformly
    u32 cell_max = 1;
    Vec3 cell_size{0, 0, 0};  // a nonzero component fixes that axis' run length
    ObjectMode object_mode = ObjectMode::Lines;
    Vec3 object_cells{4, 1, 1};  // object size in cells
    u64 intra_base = 700'000;
    u64 intra_width = 300'000;
    u64 inter_base = 0;
    u64 inter_width = 300'000;
    JitterMode jitter = JitterMode::GlobalUnique;
    u64 seed = 0;
};

struct GenerateResult {
    u64 node_count = 0;
    u64 edge_count = 0;     // distinct interfaces
    u64 record_count = 0;   // voxel-pair contributions
    u64 intra_pairs = 0;
    u64 inter_pairs = 0;
    u64 leaf_count = 0;
    u64 object_count = 0;
};

// Populates the store: leaf inputs, ground truth, manifest. Deterministic
// given the spec.
GenerateResult generate(const SyntheticSpec& spec, ChunkStore& store);

struct TruthScore {
    u64 split_objects = 0;    // planted objects spread over >1 output segment
    u64 merged_segments = 0;  // output segments mixing >1 planted object
    double rand_index = 1.0;
};

TruthScore score_against_truth(const std::vector<std::pair<SegmentId, SegmentId>>& partition,
                               const std::vector<std::pair<SegmentId, u64>>& truth);

}  // namespace ragglom
