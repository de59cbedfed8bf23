#include "ragglom/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <stdexcept>

namespace ragglom {

Box box_union(const Box& a, const Box& b) {
    return Box{Vec3{std::min(a.lo.x, b.lo.x), std::min(a.lo.y, b.lo.y), std::min(a.lo.z, b.lo.z)},
               Vec3{std::max(a.hi.x, b.hi.x), std::max(a.hi.y, b.hi.y), std::max(a.hi.z, b.hi.z)}};
}

bool strictly_disjoint(const Box& a, const Box& b) {
    return a.hi.x < b.lo.x || b.hi.x < a.lo.x || a.hi.y < b.lo.y || b.hi.y < a.lo.y ||
           a.hi.z < b.lo.z || b.hi.z < a.lo.z;
}

std::string address_path(const ChunkAddress& addr) {
    return std::to_string(addr.level) + "/" + std::to_string(addr.x) + "_" +
           std::to_string(addr.y) + "_" + std::to_string(addr.z);
}

namespace {

bool parse_u32(std::string_view text, u32& out) {
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

}  // namespace

std::optional<ChunkAddress> parse_address_path(const std::string& text) {
    const auto slash = text.find('/');
    if (slash == std::string::npos) return std::nullopt;
    const auto u1 = text.find('_', slash + 1);
    if (u1 == std::string::npos) return std::nullopt;
    const auto u2 = text.find('_', u1 + 1);
    if (u2 == std::string::npos) return std::nullopt;
    ChunkAddress addr;
    std::string_view view = text;
    if (!parse_u32(view.substr(0, slash), addr.level)) return std::nullopt;
    if (!parse_u32(view.substr(slash + 1, u1 - slash - 1), addr.x)) return std::nullopt;
    if (!parse_u32(view.substr(u1 + 1, u2 - u1 - 1), addr.y)) return std::nullopt;
    if (!parse_u32(view.substr(u2 + 1), addr.z)) return std::nullopt;
    return addr;
}

DatasetLayout DatasetLayout::create(Vec3 dims, Vec3 leaf_dims) {
    if (dims.x == 0 || dims.y == 0 || dims.z == 0)
        throw std::invalid_argument("dataset dims must be positive");
    if (leaf_dims.x == 0 || leaf_dims.y == 0 || leaf_dims.z == 0)
        throw std::invalid_argument("leaf dims must be positive");
    if (dims.x % leaf_dims.x != 0 || dims.y % leaf_dims.y != 0 || dims.z % leaf_dims.z != 0)
        throw std::invalid_argument("leaf dims must divide dataset dims");
    DatasetLayout layout;
    layout.dims_ = dims;
    layout.leaf_dims_ = leaf_dims;
    layout.leaf_grid_ = Vec3{dims.x / leaf_dims.x, dims.y / leaf_dims.y, dims.z / leaf_dims.z};
    const u32 max_extent =
        std::max({layout.leaf_grid_.x, layout.leaf_grid_.y, layout.leaf_grid_.z});
    u32 level = 0;
    while ((1u << level) < max_extent) ++level;
    layout.root_level_ = level;
    return layout;
}

Vec3 DatasetLayout::grid_at(u32 level) const {
    const u64 span = u64{1} << level;
    auto ceil_div = [span](u32 n) { return static_cast<u32>((n + span - 1) / span); };
    return Vec3{ceil_div(leaf_grid_.x), ceil_div(leaf_grid_.y), ceil_div(leaf_grid_.z)};
}

bool DatasetLayout::exists(const ChunkAddress& addr) const {
    if (addr.level > root_level_) return false;
    const Vec3 grid = grid_at(addr.level);
    return addr.x < grid.x && addr.y < grid.y && addr.z < grid.z;
}

ChunkDescriptor DatasetLayout::descriptor(const ChunkAddress& addr) const {
    if (!exists(addr)) throw std::invalid_argument("chunk address out of range: " + address_path(addr));
    const u64 span = u64{1} << addr.level;
    auto lo = [&](u32 c, u32 leaf) { return static_cast<u32>(std::min<u64>(c * span * leaf, ~u32{0})); };
    auto hi = [&](u32 c, u32 leaf, u32 dim) {
        return static_cast<u32>(std::min<u64>((c + 1) * span * leaf, dim));
    };
    Box bounds{Vec3{lo(addr.x, leaf_dims_.x), lo(addr.y, leaf_dims_.y), lo(addr.z, leaf_dims_.z)},
               Vec3{hi(addr.x, leaf_dims_.x, dims_.x), hi(addr.y, leaf_dims_.y, dims_.y),
                    hi(addr.z, leaf_dims_.z, dims_.z)}};
    return ChunkDescriptor{addr, bounds, Box{Vec3{0, 0, 0}, dims_}};
}

ChunkAddress DatasetLayout::parent(const ChunkAddress& addr) const {
    if (addr.level >= root_level_) throw std::invalid_argument("root has no parent");
    return ChunkAddress{addr.level + 1, addr.x >> 1, addr.y >> 1, addr.z >> 1};
}

std::vector<ChunkAddress> DatasetLayout::children(const ChunkAddress& addr) const {
    std::vector<ChunkAddress> out;
    if (addr.level == 0) return out;
    for (u32 dx = 0; dx < 2; ++dx) {
        for (u32 dy = 0; dy < 2; ++dy) {
            for (u32 dz = 0; dz < 2; ++dz) {
                const ChunkAddress child{addr.level - 1, addr.x * 2 + dx, addr.y * 2 + dy,
                                         addr.z * 2 + dz};
                if (exists(child)) out.push_back(child);
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<ChunkAddress> DatasetLayout::leaves_under(const ChunkAddress& addr) const {
    const u64 span = u64{1} << addr.level;
    std::vector<ChunkAddress> out;
    const u64 x0 = addr.x * span, y0 = addr.y * span, z0 = addr.z * span;
    const u64 x1 = std::min<u64>(x0 + span, leaf_grid_.x);
    const u64 y1 = std::min<u64>(y0 + span, leaf_grid_.y);
    const u64 z1 = std::min<u64>(z0 + span, leaf_grid_.z);
    for (u64 x = x0; x < x1; ++x)
        for (u64 y = y0; y < y1; ++y)
            for (u64 z = z0; z < z1; ++z)
                out.push_back(ChunkAddress{0, static_cast<u32>(x), static_cast<u32>(y),
                                           static_cast<u32>(z)});
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<ChunkAddress> DatasetLayout::all_addresses() const {
    std::vector<ChunkAddress> out;
    for (u32 level = 0; level <= root_level_; ++level) {
        const Vec3 grid = grid_at(level);
        for (u32 x = 0; x < grid.x; ++x)
            for (u32 y = 0; y < grid.y; ++y)
                for (u32 z = 0; z < grid.z; ++z) out.push_back(ChunkAddress{level, x, y, z});
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace ragglom
