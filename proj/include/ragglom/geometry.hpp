// Octree addressing over a pre-chunked voxel lattice.
//
// The dataset is tiled by leaf chunks; level-L chunks cover 2^L leaves per
// axis, clipped to the dataset. The root is the unique address whose chunk
// covers the whole leaf grid. Addresses serialize as "L/x_y_z" path
// components inside a chunk store.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ragglom/affinity.hpp"

namespace ragglom {

using u32 = std::uint32_t;

struct Vec3 {
    u32 x = 0, y = 0, z = 0;

    friend auto operator<=>(const Vec3&, const Vec3&) = default;
};

// Half-open box in global fine-lattice (voxel) units.
struct Box {
    Vec3 lo;
    Vec3 hi;

    friend auto operator<=>(const Box&, const Box&) = default;

    bool contains(const Box& inner) const {
        return lo.x <= inner.lo.x && lo.y <= inner.lo.y && lo.z <= inner.lo.z &&
               inner.hi.x <= hi.x && inner.hi.y <= hi.y && inner.hi.z <= hi.z;
    }
};

Box box_union(const Box& a, const Box& b);

// Closed-touch disjointness: boxes that merely abut are not disjoint. A node
// flush against a chunk face from outside still participates in the chunk's
// edge list, so it must pass the containment precondition.
bool strictly_disjoint(const Box& a, const Box& b);

struct ChunkAddress {
    u32 level = 0;  // 0 = leaf
    u32 x = 0, y = 0, z = 0;

    friend auto operator<=>(const ChunkAddress&, const ChunkAddress&) = default;
};

// "L/x_y_z"
std::string address_path(const ChunkAddress& addr);
std::optional<ChunkAddress> parse_address_path(const std::string& text);

struct ChunkDescriptor {
    ChunkAddress address;
    Box bounds;          // clipped to the dataset
    Box dataset_bounds;
};

class DatasetLayout {
public:
    DatasetLayout() = default;

    // leaf_dims must divide dims on every axis.
    static DatasetLayout create(Vec3 dims, Vec3 leaf_dims);

    Vec3 dims() const { return dims_; }
    Vec3 leaf_dims() const { return leaf_dims_; }
    Vec3 leaf_grid() const { return leaf_grid_; }
    u32 root_level() const { return root_level_; }
    ChunkAddress root() const { return ChunkAddress{root_level_, 0, 0, 0}; }

    // Grid extent (in chunks) at a level.
    Vec3 grid_at(u32 level) const;
    bool exists(const ChunkAddress& addr) const;

    ChunkDescriptor descriptor(const ChunkAddress& addr) const;

    ChunkAddress parent(const ChunkAddress& addr) const;
    // Existing children, in address order. Empty for leaves.
    std::vector<ChunkAddress> children(const ChunkAddress& addr) const;
    // Existing leaves covered by the chunk, in address order.
    std::vector<ChunkAddress> leaves_under(const ChunkAddress& addr) const;
    // Every existing address, level-major (leaves first), address order
    // within one level.
    std::vector<ChunkAddress> all_addresses() const;

private:
    Vec3 dims_;
    Vec3 leaf_dims_;
    Vec3 leaf_grid_;
    u32 root_level_ = 0;
};

}  // namespace ragglom
