#include "ragglom/store.hpp"

#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace ragglom {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// CRC-64 (ECMA-182 polynomial, reflected, as used by xz).

namespace {

constexpr u64 kCrcPoly = 0xC96C5795D7870F42ULL;

const std::array<u64, 256>& crc_table() {
    static const std::array<u64, 256> table = [] {
        std::array<u64, 256> t{};
        for (u64 i = 0; i < 256; ++i) {
            u64 crc = i;
            for (int bit = 0; bit < 8; ++bit) crc = (crc >> 1) ^ (crc & 1 ? kCrcPoly : 0);
            t[i] = crc;
        }
        return t;
    }();
    return table;
}

}  // namespace

u64 crc64(const void* data, std::size_t size, u64 seed) {
    const auto& table = crc_table();
    u64 crc = ~seed;
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) crc = table[(crc ^ bytes[i]) & 0xff] ^ (crc >> 8);
    return ~crc;
}

// ---------------------------------------------------------------------------
// Little-endian buffer encoding.

namespace {

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32le(u32 v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u64le(u64 v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u128le(u128 v) {
        u64le(static_cast<u64>(v));
        u64le(static_cast<u64>(v >> 64));
    }
    void magic(const char* m) { buf_.append(m, 4); }
    void stat(const AffinityStat& s) {
        u128le(s.sum);
        u64le(s.count);
    }
    void box(const Box& b) {
        u32le(b.lo.x); u32le(b.lo.y); u32le(b.lo.z);
        u32le(b.hi.x); u32le(b.hi.y); u32le(b.hi.z);
    }

    const std::string& bytes() const { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    Reader(const std::string& data, const std::string& what) : data_(data), what_(what) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    u32 u32le() {
        const auto* p = take(4);
        u32 v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
        return v;
    }
    u64 u64le() {
        const auto* p = take(8);
        u64 v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
        return v;
    }
    u128 u128le() {
        const u64 lo = u64le();
        const u64 hi = u64le();
        return (static_cast<u128>(hi) << 64) | lo;
    }
    void expect_magic(const char* m) {
        const auto* p = take(4);
        if (std::memcmp(p, m, 4) != 0) throw CorruptStoreError(what_ + ": bad magic");
    }
    AffinityStat stat() {
        AffinityStat s;
        s.sum = u128le();
        s.count = u64le();
        return s;
    }
    Box box() {
        Box b;
        b.lo.x = u32le(); b.lo.y = u32le(); b.lo.z = u32le();
        b.hi.x = u32le(); b.hi.y = u32le(); b.hi.z = u32le();
        return b;
    }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    const char* take(std::size_t n) {
        if (pos_ + n > data_.size()) throw CorruptStoreError(what_ + ": truncated");
        const char* p = data_.data() + pos_;
        pos_ += n;
        return p;
    }

    const std::string& data_;
    std::string what_;
    std::size_t pos_ = 0;
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingEntryError("cannot open " + path.string());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (!in.good() && !in.eof()) throw CorruptStoreError("read failed: " + path.string());
    return data;
}

// Atomic publish: the content becomes visible under `path` all at once.
void write_atomic(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw StoreError("cannot create " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out.good()) throw StoreError("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string leaf_key(const ChunkAddress& addr) { return address_path(addr); }

}  // namespace

// ---------------------------------------------------------------------------
// Manifest.

u64 StoreManifest::subtree_edges(const DatasetLayout& layout, const ChunkAddress& addr) const {
    u64 total = 0;
    for (const ChunkAddress& leaf : layout.leaves_under(addr)) {
        auto it = leaves.find(leaf_key(leaf));
        if (it != leaves.end()) total += it->second.edges;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Dendrogram files.

void write_dendrogram_file(const fs::path& path, const DendrogramFile& file) {
    Writer w;
    w.magic("RAGD");
    w.u32le(1);
    w.u8(static_cast<std::uint8_t>(file.kind));
    w.u64le(file.threshold.value);
    for (const DendrogramRow& row : file.rows) {
        w.u64le(row.survivor);
        w.u64le(row.absorbed);
        w.stat(row.stat);
    }
    write_atomic(path, w.bytes());
}

DendrogramFile read_dendrogram_file(const fs::path& path) {
    const std::string data = slurp(path);
    Reader r(data, path.string());
    r.expect_magic("RAGD");
    if (r.u32le() != 1) throw CorruptStoreError(path.string() + ": unsupported version");
    DendrogramFile file;
    const std::uint8_t kind = r.u8();
    if (kind > 1) throw CorruptStoreError(path.string() + ": bad linkage kind");
    file.kind = static_cast<LinkageKind>(kind);
    file.threshold.value = r.u64le();
    if (r.remaining() % 40 != 0) throw CorruptStoreError(path.string() + ": bad row section");
    file.rows.reserve(r.remaining() / 40);
    while (r.remaining() > 0) {
        DendrogramRow row;
        row.survivor = r.u64le();
        row.absorbed = r.u64le();
        row.stat = r.stat();
        file.rows.push_back(row);
    }
    return file;
}

// ---------------------------------------------------------------------------
// Flat segmentation files.

void write_flat_segmentation(const fs::path& path,
                             const std::vector<std::pair<SegmentId, SegmentId>>& rows) {
    Writer w;
    w.magic("RAGP");
    w.u32le(1);
    for (const auto& [id, rep] : rows) {
        w.u64le(id);
        w.u64le(rep);
    }
    write_atomic(path, w.bytes());
}

std::vector<std::pair<SegmentId, SegmentId>> read_flat_segmentation(const fs::path& path) {
    const std::string data = slurp(path);
    Reader r(data, path.string());
    r.expect_magic("RAGP");
    if (r.u32le() != 1) throw CorruptStoreError(path.string() + ": unsupported version");
    if (r.remaining() % 16 != 0) throw CorruptStoreError(path.string() + ": bad row section");
    std::vector<std::pair<SegmentId, SegmentId>> rows;
    rows.reserve(r.remaining() / 16);
    while (r.remaining() > 0) {
        const SegmentId id = r.u64le();
        const SegmentId rep = r.u64le();
        rows.emplace_back(id, rep);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// ChunkStore.

ChunkStore::ChunkStore(fs::path root, bool create) : root_(std::move(root)) {
    if (create) {
        fs::create_directories(root_ / "leaves" / "0");
        fs::create_directories(root_ / "out");
    } else if (!fs::is_directory(root_)) {
        throw StoreError("store does not exist: " + root_.string());
    }
}

fs::path ChunkStore::leaf_path(const ChunkAddress& addr) const {
    return root_ / "leaves" / address_path(addr) += ".rag";
}
fs::path ChunkStore::dend_path(const ChunkAddress& addr) const {
    return root_ / "out" / address_path(addr) += ".dend";
}
fs::path ChunkStore::frozen_path(const ChunkAddress& addr) const {
    return root_ / "out" / address_path(addr) += ".frozen";
}
fs::path ChunkStore::ok_path(const ChunkAddress& addr) const {
    return root_ / "out" / address_path(addr) += ".ok";
}
fs::path ChunkStore::claim_path(const ChunkAddress& addr) const {
    return root_ / "out" / address_path(addr) += ".claim";
}
fs::path ChunkStore::fail_path(const ChunkAddress& addr) const {
    return root_ / "out" / address_path(addr) += ".fail";
}

bool ChunkStore::has_manifest() const { return fs::exists(root_ / "manifest.json"); }

void ChunkStore::write_manifest(const StoreManifest& manifest) {
    json j;
    j["format"] = "ragglom-store";
    j["version"] = 1;
    j["dims"] = {manifest.dims.x, manifest.dims.y, manifest.dims.z};
    j["leaf_dims"] = {manifest.leaf_dims.x, manifest.leaf_dims.y, manifest.leaf_dims.z};
    j["seed"] = manifest.seed;
    j["node_count"] = manifest.node_count;
    j["edge_count"] = manifest.edge_count;
    j["record_count"] = manifest.record_count;
    j["generator"] = manifest.generator;
    json leaves = json::object();
    for (const auto& [key, s] : manifest.leaves) {
        leaves[key] = {{"nodes", s.nodes}, {"edges", s.edges}, {"records", s.records},
                       {"crc64", s.crc}};
    }
    j["leaves"] = std::move(leaves);
    write_atomic(root_ / "manifest.json", j.dump(2) + "\n");
}

StoreManifest ChunkStore::read_manifest() const {
    const std::string data = slurp(root_ / "manifest.json");
    json j;
    try {
        j = json::parse(data);
    } catch (const json::exception& e) {
        throw CorruptStoreError("manifest.json: " + std::string(e.what()));
    }
    try {
        StoreManifest m;
        m.dims = Vec3{j["dims"][0], j["dims"][1], j["dims"][2]};
        m.leaf_dims = Vec3{j["leaf_dims"][0], j["leaf_dims"][1], j["leaf_dims"][2]};
        m.seed = j["seed"];
        m.node_count = j["node_count"];
        m.edge_count = j["edge_count"];
        m.record_count = j["record_count"];
        m.generator = j.value("generator", "");
        for (const auto& [key, s] : j["leaves"].items()) {
            LeafSummary summary;
            summary.nodes = s["nodes"];
            summary.edges = s["edges"];
            summary.records = s["records"];
            summary.crc = s["crc64"];
            m.leaves.emplace(key, summary);
        }
        return m;
    } catch (const json::exception& e) {
        throw CorruptStoreError("manifest.json: " + std::string(e.what()));
    }
}

void ChunkStore::write_leaf(const ChunkAddress& addr, const LeafPayload& payload,
                            LeafSummary* summary) {
    Writer w;
    w.magic("RAGL");
    w.u32le(1);
    w.u64le(payload.nodes.size());
    w.u64le(payload.boundary.size());
    w.u64le(payload.records.size());
    for (const NodeExtent& node : payload.nodes) {
        w.u64le(node.id);
        w.box(node.box);
    }
    for (SegmentId id : payload.boundary) w.u64le(id);
    for (const EdgeContribution& rec : payload.records) {
        w.u64le(rec.key.lo);
        w.u64le(rec.key.hi);
        w.stat(rec.stat);
    }
    write_atomic(leaf_path(addr), w.bytes());
    if (summary) {
        summary->nodes = payload.nodes.size();
        summary->records = payload.records.size();
        u64 edges = 0;
        EdgeKey prev{0, 0};
        for (const EdgeContribution& rec : payload.records) {
            if (rec.key != prev) ++edges;
            prev = rec.key;
        }
        summary->edges = edges;
        summary->crc = crc64(w.bytes().data(), w.bytes().size());
    }
}

LeafLoad ChunkStore::read_leaf(const ChunkAddress& addr, LinkageKind kind,
                               const StoreManifest* manifest) const {
    const fs::path path = leaf_path(addr);
    const std::string data = slurp(path);
    if (manifest) {
        auto it = manifest->leaves.find(leaf_key(addr));
        if (it != manifest->leaves.end() && it->second.crc != crc64(data.data(), data.size()))
            throw CorruptStoreError(path.string() + ": checksum mismatch");
    }
    Reader r(data, path.string());
    r.expect_magic("RAGL");
    if (r.u32le() != 1) throw CorruptStoreError(path.string() + ": unsupported version");
    const u64 node_count = r.u64le();
    const u64 boundary_count = r.u64le();
    const u64 record_count = r.u64le();
    LeafLoad load{RegionGraph{kind}, {}, {}, record_count};
    load.extents.reserve(node_count);
    for (u64 i = 0; i < node_count; ++i) {
        const SegmentId id = r.u64le();
        const Box box = r.box();
        load.graph.add_node(id);
        load.extents.emplace(id, box);
    }
    load.boundary.reserve(boundary_count);
    for (u64 i = 0; i < boundary_count; ++i) load.boundary.push_back(r.u64le());
    for (u64 i = 0; i < record_count; ++i) {
        EdgeKey key;
        key.lo = r.u64le();
        key.hi = r.u64le();
        const AffinityStat stat = r.stat();
        load.graph.add_edge(key, stat);
    }
    if (r.remaining() != 0) throw CorruptStoreError(path.string() + ": trailing bytes");
    return load;
}

std::vector<SegmentId> ChunkStore::read_leaf_nodes(const ChunkAddress& addr) const {
    const fs::path path = leaf_path(addr);
    const std::string data = slurp(path);
    Reader r(data, path.string());
    r.expect_magic("RAGL");
    if (r.u32le() != 1) throw CorruptStoreError(path.string() + ": unsupported version");
    const u64 node_count = r.u64le();
    r.u64le();
    r.u64le();
    std::vector<SegmentId> ids;
    ids.reserve(node_count);
    for (u64 i = 0; i < node_count; ++i) {
        ids.push_back(r.u64le());
        r.box();
    }
    return ids;
}

bool ChunkStore::output_committed(const ChunkAddress& addr) const {
    return fs::exists(ok_path(addr));
}

void ChunkStore::commit_task_output(const ChunkAddress& addr, const TaskOutput& output) {
    Writer dend;
    dend.magic("RAGD");
    dend.u32le(1);
    dend.u8(static_cast<std::uint8_t>(output.kind));
    dend.u64le(output.threshold.value);
    for (const DendrogramRow& row : output.rows) {
        dend.u64le(row.survivor);
        dend.u64le(row.absorbed);
        dend.stat(row.stat);
    }

    Writer frozen;
    frozen.magic("RAGF");
    frozen.u32le(1);
    frozen.u8(static_cast<std::uint8_t>(output.kind));
    frozen.u64le(output.threshold.value);
    frozen.u64le(output.frozen_nodes.size());
    frozen.u64le(output.frozen_edges.size());
    for (const NodeExtent& node : output.frozen_nodes) {
        frozen.u64le(node.id);
        frozen.box(node.box);
    }
    for (const auto& [key, stat] : output.frozen_edges) {
        frozen.u64le(key.lo);
        frozen.u64le(key.hi);
        frozen.stat(stat);
    }

    write_atomic(dend_path(addr), dend.bytes());
    write_atomic(frozen_path(addr), frozen.bytes());

    json ok;
    ok["dend"] = {{"size", dend.bytes().size()},
                  {"crc64", crc64(dend.bytes().data(), dend.bytes().size())}};
    ok["frozen"] = {{"size", frozen.bytes().size()},
                    {"crc64", crc64(frozen.bytes().data(), frozen.bytes().size())}};
    ok["stats"] = {{"input_edges", output.stats.input_edges},
                   {"merges", output.stats.merges},
                   {"discarded_edges", output.stats.discarded_edges},
                   {"frozen_edges", output.stats.frozen_edges},
                   {"peak_live_edges", output.stats.peak_live_edges},
                   {"wall_ms", output.stats.wall_ms},
                   {"rss_kb", output.stats.rss_kb}};
    write_atomic(ok_path(addr), ok.dump() + "\n");
}

namespace {

json read_ok(const fs::path& path) {
    const std::string data = slurp(path);
    try {
        return json::parse(data);
    } catch (const json::exception& e) {
        throw CorruptStoreError(path.string() + ": " + e.what());
    }
}

void verify_entry(const json& ok, const char* entry, const std::string& data,
                  const fs::path& path) {
    const u64 size = ok[entry]["size"];
    const u64 crc = ok[entry]["crc64"];
    if (data.size() != size || crc64(data.data(), data.size()) != crc)
        throw CorruptStoreError(path.string() + ": checksum mismatch");
}

}  // namespace

FrozenLoad ChunkStore::read_frozen(const ChunkAddress& addr) const {
    if (!output_committed(addr))
        throw MissingEntryError("output not committed: " + address_path(addr));
    const fs::path path = frozen_path(addr);
    const std::string data = slurp(path);
    verify_entry(read_ok(ok_path(addr)), "frozen", data, path);
    Reader r(data, path.string());
    r.expect_magic("RAGF");
    if (r.u32le() != 1) throw CorruptStoreError(path.string() + ": unsupported version");
    FrozenLoad load;
    const std::uint8_t kind = r.u8();
    if (kind > 1) throw CorruptStoreError(path.string() + ": bad linkage kind");
    load.kind = static_cast<LinkageKind>(kind);
    load.threshold.value = r.u64le();
    const u64 node_count = r.u64le();
    const u64 edge_count = r.u64le();
    load.nodes.reserve(node_count);
    for (u64 i = 0; i < node_count; ++i) {
        NodeExtent node;
        node.id = r.u64le();
        node.box = r.box();
        load.nodes.push_back(node);
    }
    load.edges.reserve(edge_count);
    for (u64 i = 0; i < edge_count; ++i) {
        EdgeKey key;
        key.lo = r.u64le();
        key.hi = r.u64le();
        load.edges.emplace_back(key, r.stat());
    }
    if (r.remaining() != 0) throw CorruptStoreError(path.string() + ": trailing bytes");
    return load;
}

DendrogramFile ChunkStore::read_dend_fragment(const ChunkAddress& addr) const {
    if (!output_committed(addr))
        throw MissingEntryError("output not committed: " + address_path(addr));
    const fs::path path = dend_path(addr);
    const std::string data = slurp(path);
    verify_entry(read_ok(ok_path(addr)), "dend", data, path);
    return read_dendrogram_file(path);
}

TaskStats ChunkStore::read_task_stats(const ChunkAddress& addr) const {
    if (!output_committed(addr))
        throw MissingEntryError("output not committed: " + address_path(addr));
    const json ok = read_ok(ok_path(addr));
    try {
        const json& s = ok["stats"];
        TaskStats stats;
        stats.input_edges = s["input_edges"];
        stats.merges = s["merges"];
        stats.discarded_edges = s["discarded_edges"];
        stats.frozen_edges = s["frozen_edges"];
        stats.peak_live_edges = s["peak_live_edges"];
        stats.wall_ms = s["wall_ms"];
        stats.rss_kb = s["rss_kb"];
        return stats;
    } catch (const json::exception& e) {
        throw CorruptStoreError(ok_path(addr).string() + ": " + e.what());
    }
}

void ChunkStore::write_truth(const std::vector<std::pair<SegmentId, u64>>& rows) {
    Writer w;
    w.magic("RAGT");
    w.u32le(1);
    for (const auto& [id, object] : rows) {
        w.u64le(id);
        w.u64le(object);
    }
    write_atomic(root_ / "truth.bin", w.bytes());
}

std::vector<std::pair<SegmentId, u64>> ChunkStore::read_truth() const {
    const fs::path path = root_ / "truth.bin";
    const std::string data = slurp(path);
    Reader r(data, path.string());
    r.expect_magic("RAGT");
    if (r.u32le() != 1) throw CorruptStoreError(path.string() + ": unsupported version");
    if (r.remaining() % 16 != 0) throw CorruptStoreError(path.string() + ": bad row section");
    std::vector<std::pair<SegmentId, u64>> rows;
    rows.reserve(r.remaining() / 16);
    while (r.remaining() > 0) {
        const SegmentId id = r.u64le();
        const u64 object = r.u64le();
        rows.emplace_back(id, object);
    }
    return rows;
}

}  // namespace ragglom
