#include "ragglom/datagen.hpp"

#include "ragglom/octree.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_set>

namespace ragglom {

namespace {

// splitmix64; fully specified so stores are reproducible across platforms.
u64 mix64(u64 x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

u64 mix64(u64 a, u64 b) { return mix64(a ^ mix64(b)); }
u64 mix64(u64 a, u64 b, u64 c) { return mix64(a ^ mix64(b ^ mix64(c))); }

struct SplitMix {
    u64 state;
    u64 next() {
        state += 0x9e3779b97f4a7c15ULL;
        u64 x = state;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }
    u64 bounded(u64 n) { return next() % n; }
};

// Per-axis product tiling.
struct AxisCuts {
    std::vector<u32> starts;      // cell start coordinate, starts[n] == dim
    std::vector<u32> cell_of;     // coordinate -> cell index

    u32 cells() const { return static_cast<u32>(starts.size()) - 1; }
};

AxisCuts build_axis_cuts(const SyntheticSpec& spec, u32 dim, u32 leaf_dim, u64 axis_tag) {
    const u32 fixed = axis_tag == 1   ? spec.cell_size.x
                      : axis_tag == 2 ? spec.cell_size.y
                                      : spec.cell_size.z;
    AxisCuts cuts;
    cuts.starts.push_back(0);
    if (spec.object_mode == ObjectMode::LeafInterior) {
        const u32 s = spec.cell_min;
        if (leaf_dim < s + 2 || (leaf_dim - 2) % s != 0)
            throw std::invalid_argument(
                "leaf-interior mode needs leaf dims of the form 2 + k*cell size");
        for (u32 base = 0; base < dim; base += leaf_dim) {
            cuts.starts.push_back(base + 1);
            for (u32 c = base + 1 + s; c < base + leaf_dim - 1; c += s) cuts.starts.push_back(c);
            cuts.starts.push_back(base + leaf_dim - 1);
            cuts.starts.push_back(base + leaf_dim);
        }
        cuts.starts.pop_back();  // final leaf end re-added below
    } else if (fixed > 0) {
        for (u32 c = fixed; c < dim; c += fixed) cuts.starts.push_back(c);
    } else if (spec.cell_min == spec.cell_max) {
        for (u32 c = spec.cell_min; c < dim; c += spec.cell_min) cuts.starts.push_back(c);
    } else {
        if (spec.cell_min == 0 || spec.cell_min > spec.cell_max)
            throw std::invalid_argument("invalid cell size range");
        SplitMix rng{mix64(spec.seed, 0x6375747321ULL, axis_tag)};
        u32 pos = 0;
        while (pos < dim) {
            const u32 run = spec.cell_min +
                            static_cast<u32>(rng.bounded(spec.cell_max - spec.cell_min + 1));
            pos = std::min(pos + run, dim);
            if (pos < dim) cuts.starts.push_back(pos);
        }
    }
    cuts.starts.push_back(dim);
    cuts.cell_of.resize(dim);
    for (u32 i = 0; i + 1 < cuts.starts.size(); ++i) {
        for (u32 c = cuts.starts[i]; c < cuts.starts[i + 1]; ++c) cuts.cell_of[c] = i;
    }
    return cuts;
}

struct CellGrid {
    AxisCuts x, y, z;

    u64 cell_count() const {
        return static_cast<u64>(x.cells()) * y.cells() * z.cells();
    }
    SegmentId id_of(u32 ix, u32 iy, u32 iz) const {
        return 1 + ix + static_cast<u64>(x.cells()) * (iy + static_cast<u64>(y.cells()) * iz);
    }
    Box box_of(u32 ix, u32 iy, u32 iz) const {
        return Box{Vec3{x.starts[ix], y.starts[iy], z.starts[iz]},
                   Vec3{x.starts[ix + 1], y.starts[iy + 1], z.starts[iz + 1]}};
    }
};

// Planted object assignment.
class ObjectMap {
public:
    ObjectMap(const SyntheticSpec& spec, const CellGrid& grid, const DatasetLayout& layout)
        : spec_(spec), grid_(grid), layout_(layout) {
        if (spec.object_cells.x == 0 || spec.object_cells.y == 0 || spec.object_cells.z == 0)
            throw std::invalid_argument("object cell dims must be positive");
    }

    u64 object_of(u32 ix, u32 iy, u32 iz) const {
        switch (spec_.object_mode) {
            case ObjectMode::Lines: {
                const u32 len = spec_.object_cells.x;
                const u64 shifted = ix + phase(iy, iz, len);
                const u64 run = shifted / len;
                const u64 runs_per_row = grid_.x.cells() / len + 2;
                return 1 + run + runs_per_row * (iy + static_cast<u64>(grid_.y.cells()) * iz);
            }
            case ObjectMode::Blocks: {
                const u64 bx = ix / spec_.object_cells.x;
                const u64 by = iy / spec_.object_cells.y;
                const u64 bz = iz / spec_.object_cells.z;
                const u64 nbx = (grid_.x.cells() + spec_.object_cells.x - 1) / spec_.object_cells.x;
                const u64 nby = (grid_.y.cells() + spec_.object_cells.y - 1) / spec_.object_cells.y;
                return 1 + bx + nbx * (by + nby * bz);
            }
            case ObjectMode::LeafInterior: {
                // Shell cells (one voxel thick at leaf borders) are singleton
                // objects; interior cells form blocks.
                const Box box = grid_.box_of(ix, iy, iz);
                const Vec3 leaf_dims = layout_.leaf_dims();
                const bool shell = (box.lo.x % leaf_dims.x == 0) || (box.hi.x % leaf_dims.x == 0) ||
                                   (box.lo.y % leaf_dims.y == 0) || (box.hi.y % leaf_dims.y == 0) ||
                                   (box.lo.z % leaf_dims.z == 0) || (box.hi.z % leaf_dims.z == 0);
                if (shell) return (u64{1} << 40) + grid_.id_of(ix, iy, iz);
                // Interior cell indices restart per leaf; group into blocks.
                const u32 s = spec_.cell_min;
                const u32 lx = (box.lo.x % leaf_dims.x - 1) / s / spec_.object_cells.x;
                const u32 ly = (box.lo.y % leaf_dims.y - 1) / s / spec_.object_cells.y;
                const u32 lz = (box.lo.z % leaf_dims.z - 1) / s / spec_.object_cells.z;
                const u32 per_axis_x = (leaf_dims.x - 2) / s / spec_.object_cells.x;
                const u32 per_axis_y = (leaf_dims.y - 2) / s / spec_.object_cells.y;
                const u64 blocks_per_leaf = static_cast<u64>(per_axis_x) * per_axis_y *
                                            ((leaf_dims.z - 2) / s / spec_.object_cells.z);
                const Vec3 grid_dims = layout_.leaf_grid();
                const u64 leaf_linear =
                    (box.lo.x / leaf_dims.x) +
                    static_cast<u64>(grid_dims.x) *
                        ((box.lo.y / leaf_dims.y) +
                         static_cast<u64>(grid_dims.y) * (box.lo.z / leaf_dims.z));
                return 1 + leaf_linear * blocks_per_leaf + lx +
                       static_cast<u64>(per_axis_x) * (ly + static_cast<u64>(per_axis_y) * lz);
            }
        }
        return 0;
    }

    // Pair ordinal inside an object, for the object-unique jitter. Only
    // called for intra-object pairs of adjacent cells.
    u64 intra_ordinal(u32 ix, u32 iy, u32 iz, int axis) const {
        if (spec_.object_mode == ObjectMode::Lines) {
            const u32 len = spec_.object_cells.x;
            return (ix + phase(iy, iz, len)) % len;
        }
        u32 lx, ly, lz;
        if (spec_.object_mode == ObjectMode::LeafInterior) {
            // Position inside the leaf's interior block grid.
            const Box box = grid_.box_of(ix, iy, iz);
            const Vec3 leaf = layout_.leaf_dims();
            const u32 s = spec_.cell_min;
            lx = (box.lo.x % leaf.x - 1) / s % spec_.object_cells.x;
            ly = (box.lo.y % leaf.y - 1) / s % spec_.object_cells.y;
            lz = (box.lo.z % leaf.z - 1) / s % spec_.object_cells.z;
        } else {
            lx = ix % spec_.object_cells.x;
            ly = iy % spec_.object_cells.y;
            lz = iz % spec_.object_cells.z;
        }
        const u64 bx = spec_.object_cells.x, by = spec_.object_cells.y, bz = spec_.object_cells.z;
        u64 base = 0;
        if (axis > 0) base += (bx - 1) * by * bz;
        if (axis > 1) base += bx * (by - 1) * bz;
        switch (axis) {
            case 0: return base + lx + (bx - 1) * (ly + by * static_cast<u64>(lz));
            case 1: return base + lx + bx * (ly + (by - 1) * static_cast<u64>(lz));
            default: return base + lx + bx * (ly + by * static_cast<u64>(lz));
        }
    }

private:
    u64 phase(u32 iy, u32 iz, u32 len) const {
        return mix64(spec_.seed, 0x70686173ULL, iy + (static_cast<u64>(iz) << 20)) % len;
    }

    const SyntheticSpec& spec_;
    const CellGrid& grid_;
    const DatasetLayout& layout_;
};

struct Vox {
    u32 x, y, z;
};

// Canonical global ordinal of a voxel pair, independent of leaf tiling.
u64 pair_ordinal(const Vec3& dims, const Vox& p, int axis) {
    const u64 nx = dims.x, ny = dims.y, nz = dims.z;
    u64 base = 0;
    if (axis > 0) base += (nx - 1) * ny * nz;
    if (axis > 1) base += nx * (ny - 1) * nz;
    switch (axis) {
        case 0: return base + p.x + (nx - 1) * (p.y + ny * static_cast<u64>(p.z));
        case 1: return base + p.x + nx * (p.y + (ny - 1) * static_cast<u64>(p.z));
        default: return base + p.x + nx * (p.y + ny * static_cast<u64>(p.z));
    }
}

u64 coprime_step(u64 width) {
    u64 step = width / 3 | 1;
    while (std::gcd(step, width) != 1) step += 2;
    return step;
}

class JitterSource {
public:
    JitterSource(const SyntheticSpec& spec, u64 intra_count, u64 inter_count) : spec_(spec) {
        if (spec.intra_base + spec.intra_width > FixedAffinity::kScale + 1 ||
            spec.inter_base + spec.inter_width > FixedAffinity::kScale + 1)
            throw std::invalid_argument("affinity band exceeds the fixed-point range");
        if (spec.intra_width == 0 || spec.inter_width == 0)
            throw std::invalid_argument("affinity band width must be positive");
        intra_step_ = coprime_step(spec.intra_width);
        if (spec.jitter == JitterMode::GlobalUnique) {
            if (intra_count > spec.intra_width || inter_count > spec.inter_width)
                throw std::invalid_argument(
                    "global-unique jitter: more voxel pairs than band values; shrink the "
                    "dataset or use --jitter object");
            intra_perm_ = build_perm(spec.intra_width, mix64(spec.seed, 0x696e747261ULL));
            inter_perm_ = build_perm(spec.inter_width, mix64(spec.seed, 0x696e746572ULL));
        }
    }

    // Intra-band value. `object` and `ordinal` identify the pair within its
    // object; `rank` is the running intra counter (global enumeration order).
    u64 intra(u64 object, u64 ordinal, u64 rank, u64 pair_ord) {
        switch (spec_.jitter) {
            case JitterMode::GlobalUnique: return spec_.intra_base + intra_perm_[rank];
            case JitterMode::ObjectUnique: {
                const u64 base = mix64(spec_.seed, 0x6f626a75ULL, object) % spec_.intra_width;
                return spec_.intra_base + (base + ordinal * intra_step_) % spec_.intra_width;
            }
            case JitterMode::Hashed:
                return spec_.intra_base +
                       mix64(spec_.seed, 0x68617368ULL, pair_ord) % spec_.intra_width;
        }
        return spec_.intra_base;
    }

    u64 inter(u64 rank, u64 pair_ord) {
        if (spec_.jitter == JitterMode::GlobalUnique) return spec_.inter_base + inter_perm_[rank];
        return spec_.inter_base + mix64(spec_.seed, 0x78686173ULL, pair_ord) % spec_.inter_width;
    }

private:
    static std::vector<u32> build_perm(u64 width, u64 seed) {
        std::vector<u32> perm(width);
        std::iota(perm.begin(), perm.end(), 0u);
        SplitMix rng{seed};
        for (u64 i = width - 1; i > 0; --i) {
            const u64 j = rng.bounded(i + 1);
            std::swap(perm[i], perm[j]);
        }
        return perm;
    }

    const SyntheticSpec& spec_;
    u64 intra_step_ = 1;
    std::vector<u32> intra_perm_;
    std::vector<u32> inter_perm_;
};

}  // namespace

GenerateResult generate(const SyntheticSpec& spec, ChunkStore& store) {
    const DatasetLayout layout = DatasetLayout::create(spec.dims, spec.leaf_dims);
    CellGrid grid{build_axis_cuts(spec, spec.dims.x, spec.leaf_dims.x, 1),
                  build_axis_cuts(spec, spec.dims.y, spec.leaf_dims.y, 2),
                  build_axis_cuts(spec, spec.dims.z, spec.leaf_dims.z, 3)};
    const ObjectMap objects(spec, grid, layout);

    if (spec.jitter == JitterMode::ObjectUnique) {
        const u64 bx = spec.object_cells.x, by = spec.object_cells.y, bz = spec.object_cells.z;
        const u64 worst_object_pairs =
            spec.object_mode == ObjectMode::Lines
                ? bx - 1
                : (bx - 1) * by * bz + bx * (by - 1) * bz + bx * by * (bz - 1);
        if (worst_object_pairs > spec.intra_width)
            throw std::invalid_argument(
                "object-unique jitter: objects have more pairs than intra band values");
    }

    struct PairInfo {
        SegmentId cu, cv;
        bool intra;
        u64 object;
        u64 ordinal;
        u64 pair_ord;
    };

    // Classifies the pair (p, p + e_axis); returns false for cell-internal
    // pairs, which are not graph edges.
    auto classify = [&](const Vox& p, int axis, PairInfo& info) {
        u32 ix = grid.x.cell_of[p.x], iy = grid.y.cell_of[p.y], iz = grid.z.cell_of[p.z];
        u32 jx = ix, jy = iy, jz = iz;
        if (axis == 0) jx = grid.x.cell_of[p.x + 1];
        else if (axis == 1) jy = grid.y.cell_of[p.y + 1];
        else jz = grid.z.cell_of[p.z + 1];
        if (ix == jx && iy == jy && iz == jz) return false;
        info.cu = grid.id_of(ix, iy, iz);
        info.cv = grid.id_of(jx, jy, jz);
        const u64 obj_u = objects.object_of(ix, iy, iz);
        const u64 obj_v = objects.object_of(jx, jy, jz);
        info.intra = obj_u == obj_v;
        info.object = obj_u;
        info.ordinal = info.intra ? objects.intra_ordinal(ix, iy, iz, axis) : 0;
        info.pair_ord = pair_ordinal(spec.dims, p, axis);
        return true;
    };

    // Pass 1: band sizes (for global-unique jitter validation and sizing).
    u64 intra_pairs = 0, inter_pairs = 0;
    for (int axis = 0; axis < 3; ++axis) {
        const u32 ex = axis == 0, ey = axis == 1, ez = axis == 2;
        for (u32 z = 0; z + ez < spec.dims.z; ++z)
            for (u32 y = 0; y + ey < spec.dims.y; ++y)
                for (u32 x = 0; x + ex < spec.dims.x; ++x) {
                    PairInfo info;
                    if (!classify(Vox{x, y, z}, axis, info)) continue;
                    (info.intra ? intra_pairs : inter_pairs) += 1;
                }
    }

    JitterSource jitter(spec, intra_pairs, inter_pairs);

    // Pass 2: emit records grouped per attributed leaf. The enumeration is
    // global and canonical so the band ranks are independent of the leaf
    // tiling; attribution only picks the bucket a record lands in.
    std::map<ChunkAddress, std::vector<EdgeContribution>> leaf_records;
    u64 intra_rank = 0, inter_rank = 0;
    const Vec3 leaf_dims = spec.leaf_dims;
    for (int axis = 0; axis < 3; ++axis) {
        const u32 ex = axis == 0, ey = axis == 1, ez = axis == 2;
        for (u32 z = 0; z + ez < spec.dims.z; ++z)
            for (u32 y = 0; y + ey < spec.dims.y; ++y)
                for (u32 x = 0; x + ex < spec.dims.x; ++x) {
                    PairInfo info;
                    if (!classify(Vox{x, y, z}, axis, info)) continue;
                    u64 value;
                    if (info.intra) {
                        value = jitter.intra(info.object, info.ordinal, intra_rank++, info.pair_ord);
                    } else {
                        value = jitter.inter(inter_rank++, info.pair_ord);
                    }
                    const ChunkAddress leaf{0, x / leaf_dims.x, y / leaf_dims.y, z / leaf_dims.z};
                    leaf_records[leaf].push_back(EdgeContribution{
                        make_edge_key(info.cu, info.cv),
                        AffinityStat{static_cast<u128>(value), 1}});
                }
    }

    // Per-leaf node tables: cells overlapping the leaf plus endpoints of
    // attributed records (a straddling partner can lie entirely outside).
    GenerateResult result;
    result.intra_pairs = intra_pairs;
    result.inter_pairs = inter_pairs;
    result.node_count = grid.cell_count();
    result.edge_count = static_cast<u64>(grid.x.cells() - 1) * grid.y.cells() * grid.z.cells() +
                        static_cast<u64>(grid.x.cells()) * (grid.y.cells() - 1) * grid.z.cells() +
                        static_cast<u64>(grid.x.cells()) * grid.y.cells() * (grid.z.cells() - 1);

    StoreManifest manifest;
    manifest.dims = spec.dims;
    manifest.leaf_dims = spec.leaf_dims;
    manifest.seed = spec.seed;
    manifest.node_count = result.node_count;
    manifest.edge_count = result.edge_count;

    auto cell_from_id = [&](SegmentId id) {
        const u64 linear = id - 1;
        const u32 ix = static_cast<u32>(linear % grid.x.cells());
        const u32 iy = static_cast<u32>(linear / grid.x.cells() % grid.y.cells());
        const u32 iz = static_cast<u32>(linear / grid.x.cells() / grid.y.cells());
        return grid.box_of(ix, iy, iz);
    };

    for (const ChunkAddress& leaf : layout.leaves_under(layout.root())) {
        auto records_it = leaf_records.find(leaf);
        static const std::vector<EdgeContribution> kEmpty;
        const std::vector<EdgeContribution>& records =
            records_it == leaf_records.end() ? kEmpty : records_it->second;

        const ChunkDescriptor desc = layout.descriptor(leaf);
        std::set<SegmentId> node_ids;
        const u32 cx0 = grid.x.cell_of[desc.bounds.lo.x], cx1 = grid.x.cell_of[desc.bounds.hi.x - 1];
        const u32 cy0 = grid.y.cell_of[desc.bounds.lo.y], cy1 = grid.y.cell_of[desc.bounds.hi.y - 1];
        const u32 cz0 = grid.z.cell_of[desc.bounds.lo.z], cz1 = grid.z.cell_of[desc.bounds.hi.z - 1];
        for (u32 iz = cz0; iz <= cz1; ++iz)
            for (u32 iy = cy0; iy <= cy1; ++iy)
                for (u32 ix = cx0; ix <= cx1; ++ix) node_ids.insert(grid.id_of(ix, iy, iz));
        for (const EdgeContribution& rec : records) {
            node_ids.insert(rec.key.lo);
            node_ids.insert(rec.key.hi);
        }

        LeafPayload payload;
        payload.nodes.reserve(node_ids.size());
        ExtentMap extents;
        for (SegmentId id : node_ids) {
            const Box box = cell_from_id(id);
            payload.nodes.push_back(NodeExtent{id, box});
            extents.emplace(id, box);
        }
        payload.boundary = boundary_set(desc, extents);
        payload.records = records;
        std::sort(payload.records.begin(), payload.records.end(),
                  [](const EdgeContribution& a, const EdgeContribution& b) {
                      if (a.key != b.key) return a.key < b.key;
                      return a.stat.sum < b.stat.sum;
                  });

        LeafSummary summary;
        store.write_leaf(leaf, payload, &summary);
        manifest.leaves.emplace(address_path(leaf), summary);
        manifest.record_count += summary.records;
        result.record_count += summary.records;
        ++result.leaf_count;
    }

    // Ground truth for every cell.
    std::vector<std::pair<SegmentId, u64>> truth;
    truth.reserve(result.node_count);
    std::unordered_set<u64> distinct_objects;
    for (u32 iz = 0; iz < grid.z.cells(); ++iz)
        for (u32 iy = 0; iy < grid.y.cells(); ++iy)
            for (u32 ix = 0; ix < grid.x.cells(); ++ix) {
                const u64 object = objects.object_of(ix, iy, iz);
                truth.emplace_back(grid.id_of(ix, iy, iz), object);
                distinct_objects.insert(object);
            }
    result.object_count = distinct_objects.size();
    store.write_truth(truth);

    manifest.generator = "synthetic/v1";
    store.write_manifest(manifest);
    return result;
}

TruthScore score_against_truth(const std::vector<std::pair<SegmentId, SegmentId>>& partition,
                               const std::vector<std::pair<SegmentId, u64>>& truth) {
    std::unordered_map<SegmentId, u64> object_of(truth.begin(), truth.end());
    std::map<std::pair<SegmentId, u64>, u64> contingency;
    std::unordered_map<SegmentId, u64> segment_sizes;
    std::unordered_map<u64, u64> object_sizes;
    u64 n = 0;
    for (const auto& [id, rep] : partition) {
        auto it = object_of.find(id);
        if (it == object_of.end())
            throw std::invalid_argument("partition references a segment without ground truth");
        ++contingency[{rep, it->second}];
        ++segment_sizes[rep];
        ++object_sizes[it->second];
        ++n;
    }
    if (n != truth.size()) throw std::invalid_argument("partition does not cover all supervoxels");

    std::unordered_map<SegmentId, u64> objects_per_segment;
    std::unordered_map<u64, u64> segments_per_object;
    for (const auto& [key, count] : contingency) {
        ++objects_per_segment[key.first];
        ++segments_per_object[key.second];
    }
    TruthScore score;
    for (const auto& [object, segments] : segments_per_object)
        if (segments > 1) ++score.split_objects;
    for (const auto& [segment, objects] : objects_per_segment)
        if (objects > 1) ++score.merged_segments;

    auto choose2 = [](u64 k) { return static_cast<u128>(k) * (k - 1) / 2; };
    u128 pairs_same_both = 0, pairs_same_segment = 0, pairs_same_object = 0;
    for (const auto& [key, count] : contingency) pairs_same_both += choose2(count);
    for (const auto& [rep, count] : segment_sizes) pairs_same_segment += choose2(count);
    for (const auto& [object, count] : object_sizes) pairs_same_object += choose2(count);
    const u128 total_pairs = choose2(n);
    if (total_pairs > 0) {
        const u128 disagreements = pairs_same_segment + pairs_same_object - 2 * pairs_same_both;
        score.rand_index =
            1.0 - static_cast<double>(static_cast<u64>(disagreements)) /
                      static_cast<double>(static_cast<u64>(total_pairs));
    }
    return score;
}

}  // namespace ragglom
