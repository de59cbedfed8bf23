// ragglom — distributed hierarchical agglomeration of region adjacency
// graphs over a file-based chunk store.
//
// Exit codes: 0 success (verify: EQUAL or PARTITION_EQUAL), 1 verify found
// differing dendrograms, 2 usage or configuration error, 3 missing or
// corrupt data, 10 run interrupted by --max-tasks.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <iostream>
#include <map>
#include <set>
#include <unordered_map>

#include "CLI11.hpp"
#include "json.hpp"
#include "ragglom/datagen.hpp"
#include "ragglom/executor.hpp"
#include "ragglom/octree.hpp"

namespace {

using namespace ragglom;
using nlohmann::json;

constexpr int kExitDifferent = 1;
constexpr int kExitUsage = 2;
constexpr int kExitCorrupt = 3;
constexpr int kExitInterrupted = 10;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string u128_str(u128 v) {
    if (v == 0) return "0";
    std::string out;
    while (v > 0) {
        out.push_back(static_cast<char>('0' + static_cast<unsigned>(v % 10)));
        v /= 10;
    }
    std::reverse(out.begin(), out.end());
    return out;
}

Vec3 parse_vec3(const std::string& text, const std::string& flag) {
    Vec3 v;
    unsigned x = 0, y = 0, z = 0;
    char extra = 0;
    if (std::sscanf(text.c_str(), "%u,%u,%u%c", &x, &y, &z, &extra) != 3)
        throw UsageError(flag + ": expected X,Y,Z");
    v = Vec3{x, y, z};
    return v;
}

FixedAffinity parse_threshold(const std::string& text) {
    auto value = parse_affinity(text);
    if (!value)
        throw UsageError("--threshold: expected a decimal in [0,1] with at most 6 decimal places");
    return *value;
}

LinkageKind parse_kind(const std::string& text) {
    auto kind = parse_linkage(text);
    if (!kind) throw UsageError("--kind: expected 'mean' or 'max'");
    return *kind;
}

struct StoreContext {
    ChunkStore store;
    StoreManifest manifest;
    DatasetLayout layout;
};

StoreContext open_store(const std::string& path) {
    ChunkStore store{std::filesystem::path(path)};
    StoreManifest manifest = store.read_manifest();
    DatasetLayout layout = DatasetLayout::create(manifest.dims, manifest.leaf_dims);
    return StoreContext{std::move(store), std::move(manifest), layout};
}

void warn_sparsity(u64 nodes, u64 edges) {
    if (nodes > 0 && edges > 10 * nodes)
        std::cerr << "warning: graph is unusually dense (" << edges << " edges for " << nodes
                  << " nodes; expected |E| <= 10|V|)\n";
}

// ---------------------------------------------------------------------------
// generate

int cmd_generate(const std::string& out, const std::string& dims_text,
                 const std::string& leaf_text, u64 seed, u32 cell_min, u32 cell_max,
                 const std::string& objects_text, const std::string& object_cells_text,
                 u64 intra_base, u64 intra_width, u64 inter_base, u64 inter_width,
                 const std::string& jitter_text, bool json_out) {
    SyntheticSpec spec;
    spec.dims = parse_vec3(dims_text, "--dims");
    spec.leaf_dims = parse_vec3(leaf_text, "--leaf");
    spec.seed = seed;
    spec.cell_min = cell_min;
    spec.cell_max = cell_max == 0 ? cell_min : cell_max;
    spec.object_cells = parse_vec3(object_cells_text, "--object-cells");
    if (objects_text == "lines") spec.object_mode = ObjectMode::Lines;
    else if (objects_text == "blocks") spec.object_mode = ObjectMode::Blocks;
    else if (objects_text == "leaf-interior") spec.object_mode = ObjectMode::LeafInterior;
    else throw UsageError("--objects: expected lines|blocks|leaf-interior");
    if (jitter_text == "global") spec.jitter = JitterMode::GlobalUnique;
    else if (jitter_text == "object") spec.jitter = JitterMode::ObjectUnique;
    else if (jitter_text == "hash") spec.jitter = JitterMode::Hashed;
    else throw UsageError("--jitter: expected global|object|hash");
    spec.intra_base = intra_base;
    spec.intra_width = intra_width;
    spec.inter_base = inter_base;
    spec.inter_width = inter_width;

    ChunkStore store{std::filesystem::path(out), /*create=*/true};
    GenerateResult result;
    try {
        result = generate(spec, store);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    warn_sparsity(result.node_count, result.edge_count);
    if (json_out) {
        json j{{"command", "generate"},   {"store", out},
               {"seed", seed},            {"nodes", result.node_count},
               {"edges", result.edge_count}, {"records", result.record_count},
               {"leaves", result.leaf_count}, {"objects", result.object_count},
               {"intra_pairs", result.intra_pairs}, {"inter_pairs", result.inter_pairs}};
        std::cout << j.dump() << "\n";
    } else {
        std::cout << "store " << out << ": " << result.node_count << " supervoxels, "
                  << result.edge_count << " interfaces, " << result.record_count
                  << " contributions, " << result.leaf_count << " leaves, "
                  << result.object_count << " planted objects\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// run (single global pass)

int cmd_run(const std::string& store_path, const std::string& kind_text,
            const std::string& threshold_text, const std::string& out, bool json_out) {
    const LinkageKind kind = parse_kind(kind_text);
    const FixedAffinity threshold = parse_threshold(threshold_text);
    StoreContext ctx = open_store(store_path);

    const auto start = std::chrono::steady_clock::now();
    RegionGraph graph(kind);
    for (const ChunkAddress& leaf : ctx.layout.leaves_under(ctx.layout.root())) {
        LeafLoad load = ctx.store.read_leaf(leaf, kind, &ctx.manifest);
        combine_edges(graph, load.graph);
    }
    const u64 nodes = graph.node_count();
    const u64 edges = graph.edge_count();
    warn_sparsity(nodes, edges);

    AgglomerateStats stats;
    Dendrogram rows = agglomerate_generic(graph, threshold, nullptr, &stats);
    write_dendrogram_file(out, DendrogramFile{kind, threshold, rows});
    const u64 wall_ms = static_cast<u64>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                             std::chrono::steady_clock::now() - start)
                                             .count());
    if (json_out) {
        json j{{"command", "run"},          {"store", store_path},
               {"kind", kind_text},         {"threshold", threshold_text},
               {"nodes", nodes},            {"edges", edges},
               {"merges", rows.size()},     {"residual_edges", graph.edge_count()},
               {"wall_ms", wall_ms},        {"peak_rss_kb", current_peak_rss_kb()},
               {"dendrogram", out}};
        std::cout << j.dump() << "\n";
    } else {
        std::cout << "run kind=" << kind_text << " threshold=" << threshold_text
                  << " store=" << store_path << "\n";
        std::cout << "  nodes=" << nodes << " edges=" << edges << " merges=" << rows.size()
                  << " residual_edges=" << graph.edge_count() << " wall_ms=" << wall_ms
                  << " peak_rss_kb=" << current_peak_rss_kb() << "\n";
        std::cout << "  dendrogram written to " << out << " (" << rows.size() << " rows)\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// run-dist

void print_report(const RunReport& report, bool json_out, const std::string& command) {
    if (json_out) {
        json config{{"command", command},
                    {"store", report.store_path},
                    {"kind", report.kind_text},
                    {"threshold", report.threshold_text},
                    {"workers", report.workers},
                    {"leaf_threshold", report.leaf_threshold}};
        std::cout << config.dump() << "\n";
        for (const LevelReport& level : report.levels) {
            json j{{"level", level.level},
                   {"tasks", level.tasks},
                   {"merges", level.merges},
                   {"frozen_edges", level.frozen_edges},
                   {"max_input_edges", level.max_input_edges},
                   {"max_frozen_edges", level.max_frozen_edges},
                   {"max_peak_live_edges", level.max_peak_live_edges},
                   {"wall_ms", level.wall_ms}};
            std::cout << j.dump() << "\n";
        }
        json summary{{"total_tasks", report.total_tasks},
                     {"executed_tasks", report.executed_tasks},
                     {"skipped_tasks", report.skipped_tasks},
                     {"total_merges", report.total_merges},
                     {"wall_ms", report.wall_ms},
                     {"peak_rss_kb", report.peak_rss_kb},
                     {"completed", report.completed}};
        std::cout << summary.dump() << "\n";
        return;
    }
    std::cout << command << " kind=" << report.kind_text << " threshold=" << report.threshold_text
              << " store=" << report.store_path << " workers=" << report.workers
              << " leaf_threshold=" << report.leaf_threshold << "\n";
    for (const LevelReport& level : report.levels) {
        const double fraction =
            report.total_merges == 0
                ? 0.0
                : static_cast<double>(level.merges) / static_cast<double>(report.total_merges);
        std::cout << "  level " << level.level << ": tasks=" << level.tasks
                  << " merges=" << level.merges << " (" << fraction * 100.0 << "%)"
                  << " max_input_edges=" << level.max_input_edges
                  << " max_frozen_edges=" << level.max_frozen_edges
                  << " wall_ms=" << level.wall_ms << "\n";
    }
    std::cout << "  total: tasks=" << report.total_tasks << " executed=" << report.executed_tasks
              << " skipped=" << report.skipped_tasks << " merges=" << report.total_merges
              << " wall_ms=" << report.wall_ms << " peak_rss_kb=" << report.peak_rss_kb
              << " completed=" << (report.completed ? "true" : "false") << "\n";
}

int spawn_workers(const StoreContext& ctx, const RunOptions& opts, u64 processes,
                  const std::string& store_path) {
    std::vector<pid_t> pids;
    for (u64 i = 0; i < processes; ++i) {
        const pid_t pid = fork();
        if (pid < 0) throw StoreError("fork failed");
        if (pid == 0) {
            std::vector<std::string> args{
                "/proc/self/exe", "worker",
                "--store", store_path,
                "--kind", opts.kind_text,
                "--threshold", opts.threshold_text,
                "--leaf-threshold", std::to_string(opts.leaf_threshold),
                "--max-tasks", std::to_string(opts.max_tasks)};
            std::vector<char*> argv;
            for (std::string& arg : args) argv.push_back(arg.data());
            argv.push_back(nullptr);
            execv("/proc/self/exe", argv.data());
            _exit(127);
        }
        pids.push_back(pid);
    }
    int worst = 0;
    for (pid_t pid : pids) {
        int status = 0;
        waitpid(pid, &status, 0);
        const int code = WIFEXITED(status) ? WEXITSTATUS(status) : 3;
        worst = std::max(worst, code);
    }
    (void)ctx;
    return worst;
}

int cmd_run_dist(const std::string& store_path, const std::string& kind_text,
                 const std::string& threshold_text, const std::string& out, u64 workers,
                 u64 leaf_threshold, u64 max_tasks, u64 processes, bool json_out) {
    RunOptions opts;
    opts.kind = parse_kind(kind_text);
    opts.threshold = parse_threshold(threshold_text);
    opts.kind_text = kind_text;
    opts.threshold_text = threshold_text;
    opts.workers = workers;
    opts.leaf_threshold = leaf_threshold;
    opts.max_tasks = max_tasks;

    StoreContext ctx = open_store(store_path);
    RunReport report;
    if (processes > 0) {
        const auto start = std::chrono::steady_clock::now();
        const int code = spawn_workers(ctx, opts, processes, store_path);
        if (code != 0 && code != kExitInterrupted)
            throw StoreError("worker process failed with exit code " + std::to_string(code));
        report = collect_report(ctx.store, ctx.layout, ctx.manifest, opts);
        report.wall_ms = static_cast<u64>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                              std::chrono::steady_clock::now() - start)
                                              .count());
    } else {
        report = run_distributed(ctx.store, ctx.layout, ctx.manifest, opts);
    }

    if (report.completed) {
        const TaskPlan plan = build_task_plan(ctx.layout, ctx.manifest, opts.leaf_threshold);
        Dendrogram rows = assemble_dendrogram(ctx.store, plan, opts.kind, opts.threshold);
        write_dendrogram_file(out, DendrogramFile{opts.kind, opts.threshold, rows});
    }
    print_report(report, json_out, "run-dist");
    if (!report.completed) {
        std::cerr << "run interrupted before completion; rerun to resume\n";
        return kExitInterrupted;
    }
    return 0;
}

int cmd_worker(const std::string& store_path, const std::string& kind_text,
               const std::string& threshold_text, u64 leaf_threshold, u64 max_tasks) {
    RunOptions opts;
    opts.kind = parse_kind(kind_text);
    opts.threshold = parse_threshold(threshold_text);
    opts.kind_text = kind_text;
    opts.threshold_text = threshold_text;
    opts.leaf_threshold = leaf_threshold;
    opts.max_tasks = max_tasks;
    StoreContext ctx = open_store(store_path);
    return worker_process_loop(ctx.store, ctx.layout, ctx.manifest, opts);
}

// ---------------------------------------------------------------------------
// flatten

class MinRepPartition {
public:
    void ensure(SegmentId id) { parent_.try_emplace(id, id); }

    bool contains(SegmentId id) const { return parent_.contains(id); }

    SegmentId find(SegmentId id) {
        SegmentId root = id;
        while (parent_.at(root) != root) root = parent_.at(root);
        while (parent_.at(id) != root) {
            SegmentId next = parent_.at(id);
            parent_.at(id) = root;
            id = next;
        }
        return root;
    }

    void unite(SegmentId a, SegmentId b) {
        const SegmentId ra = find(a), rb = find(b);
        if (ra != rb) parent_.at(std::max(ra, rb)) = std::min(ra, rb);
    }

    // Representative = smallest id in the component (union by min above).
    SegmentId representative(SegmentId id) { return find(id); }

private:
    std::unordered_map<SegmentId, SegmentId> parent_;
};

int cmd_flatten(const std::string& dend_path, const std::string& store_path,
                const std::string& out, const std::string& threshold_text) {
    const DendrogramFile dend = read_dendrogram_file(dend_path);
    const FixedAffinity threshold =
        threshold_text.empty() ? dend.threshold : parse_threshold(threshold_text);

    StoreContext ctx = open_store(store_path);
    MinRepPartition partition;
    for (const ChunkAddress& leaf : ctx.layout.leaves_under(ctx.layout.root())) {
        for (SegmentId id : ctx.store.read_leaf_nodes(leaf)) partition.ensure(id);
    }
    for (const DendrogramRow& row : dend.rows) {
        if (!partition.contains(row.survivor) || !partition.contains(row.absorbed))
            throw CorruptStoreError("dendrogram row references an unknown supervoxel id");
        if (!value_at_least(dend.kind, row.stat, threshold)) continue;
        partition.unite(row.survivor, row.absorbed);
    }

    std::vector<std::pair<SegmentId, SegmentId>> rows;
    for (const ChunkAddress& leaf : ctx.layout.leaves_under(ctx.layout.root())) {
        for (SegmentId id : ctx.store.read_leaf_nodes(leaf)) {
            rows.emplace_back(id, 0);  // fill below; ids may repeat across leaves
        }
    }
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    for (auto& [id, rep] : rows) rep = partition.representative(id);
    write_flat_segmentation(out, rows);
    std::cout << "flat segmentation: " << rows.size() << " supervoxels -> " << out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// verify

json row_json(const DendrogramRow& row) {
    return json{{"survivor", row.survivor},
                {"absorbed", row.absorbed},
                {"sum", u128_str(row.stat.sum)},
                {"count", row.stat.count}};
}

void print_row(const DendrogramRow& row, const char* side) {
    std::cout << "  " << side << " (" << row.survivor << "," << row.absorbed
              << ") sum=" << u128_str(row.stat.sum) << " count=" << row.stat.count << "\n";
}

int cmd_verify(const std::string& a_path, const std::string& b_path, bool json_out) {
    const DendrogramFile a = read_dendrogram_file(a_path);
    const DendrogramFile b = read_dendrogram_file(b_path);
    if (a.kind != b.kind || a.threshold != b.threshold)
        throw UsageError("verify: dendrogram headers disagree on linkage kind or threshold");

    auto row_less = [](const DendrogramRow& x, const DendrogramRow& y) {
        if (x.survivor != y.survivor) return x.survivor < y.survivor;
        if (x.absorbed != y.absorbed) return x.absorbed < y.absorbed;
        if (x.stat.sum != y.stat.sum) return x.stat.sum < y.stat.sum;
        return x.stat.count < y.stat.count;
    };
    Dendrogram rows_a = a.rows, rows_b = b.rows;
    std::sort(rows_a.begin(), rows_a.end(), row_less);
    std::sort(rows_b.begin(), rows_b.end(), row_less);

    if (rows_a == rows_b) {
        if (json_out) std::cout << json{{"result", "EQUAL"}, {"rows", rows_a.size()}}.dump() << "\n";
        else std::cout << "EQUAL (" << rows_a.size() << " rows)\n";
        return 0;
    }

    // PARTITION_EQUAL covers dendrograms that reach the same flat partition
    // through different merge structures. A merge pair present in both files
    // with conflicting statistics is a genuine divergence, not a
    // restructuring, so it stays DIFFERENT.
    MinRepPartition pa, pb;
    std::set<SegmentId> universe;
    for (const Dendrogram* rows : {&rows_a, &rows_b}) {
        for (const DendrogramRow& row : *rows) {
            pa.ensure(row.survivor);
            pa.ensure(row.absorbed);
            pb.ensure(row.survivor);
            pb.ensure(row.absorbed);
            universe.insert(row.survivor);
            universe.insert(row.absorbed);
        }
    }
    std::map<std::pair<SegmentId, SegmentId>, AffinityStat> pair_stats;
    for (const DendrogramRow& row : rows_a) {
        pa.unite(row.survivor, row.absorbed);
        pair_stats.emplace(std::pair{row.survivor, row.absorbed}, row.stat);
    }
    bool partitions_equal = true;
    for (const DendrogramRow& row : rows_b) {
        pb.unite(row.survivor, row.absorbed);
        auto it = pair_stats.find({row.survivor, row.absorbed});
        if (it != pair_stats.end() && !(it->second == row.stat)) partitions_equal = false;
    }
    if (partitions_equal) {
        for (SegmentId id : universe) {
            if (pa.representative(id) != pb.representative(id)) {
                partitions_equal = false;
                break;
            }
        }
    }

    // Sample the multiset symmetric difference.
    std::vector<DendrogramRow> only_a, only_b;
    std::size_t i = 0, j = 0;
    while ((i < rows_a.size() || j < rows_b.size()) && only_a.size() + only_b.size() < 10) {
        if (i == rows_a.size()) only_b.push_back(rows_b[j++]);
        else if (j == rows_b.size()) only_a.push_back(rows_a[i++]);
        else if (row_less(rows_a[i], rows_b[j])) only_a.push_back(rows_a[i++]);
        else if (row_less(rows_b[j], rows_a[i])) only_b.push_back(rows_b[j++]);
        else { ++i; ++j; }
    }

    const char* verdict = partitions_equal ? "PARTITION_EQUAL" : "DIFFERENT";
    if (json_out) {
        json j_out{{"result", verdict}};
        json diff = json::array();
        for (const DendrogramRow& row : only_a) diff.push_back(json{{"only_in", "a"}, {"row", row_json(row)}});
        for (const DendrogramRow& row : only_b) diff.push_back(json{{"only_in", "b"}, {"row", row_json(row)}});
        j_out["diff_sample"] = std::move(diff);
        std::cout << j_out.dump() << "\n";
    } else {
        std::cout << verdict << "\n";
        for (const DendrogramRow& row : only_a) print_row(row, "only in a:");
        for (const DendrogramRow& row : only_b) print_row(row, "only in b:");
    }
    return partitions_equal ? 0 : kExitDifferent;
}

// ---------------------------------------------------------------------------
// stats

int cmd_stats(const std::string& store_path, u64 leaf_threshold, bool json_out) {
    StoreContext ctx = open_store(store_path);
    RunOptions opts;
    opts.leaf_threshold = leaf_threshold;
    opts.kind_text = "-";
    opts.threshold_text = "-";
    const RunReport report = collect_report(ctx.store, ctx.layout, ctx.manifest, opts);
    print_report(report, json_out, "stats");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"distributed hierarchical agglomeration on region adjacency graphs"};
    app.require_subcommand(1);

    std::string store_path, out_path, dend_a, dend_b, dend_path;
    std::string dims_text, leaf_text = "16,16,16", kind_text = "mean", threshold_text = "0.3";
    std::string objects_text = "lines", object_cells_text = "4,1,1", jitter_text = "global";
    std::string flatten_threshold;
    u64 seed = 0, workers = 1, leaf_threshold = 4'000'000, max_tasks = 0, processes = 0;
    u64 intra_base = 700'000, intra_width = 300'000, inter_base = 0, inter_width = 300'000;
    u32 cell_min = 1, cell_max = 0;
    bool json_out = false;

    auto add_store = [&](CLI::App* cmd) {
        cmd->add_option("--store", store_path, "chunk store path")
            ->envname("RAGGLOM_STORE")
            ->required();
    };

    CLI::App* generate = app.add_subcommand("generate", "generate a synthetic pre-chunked dataset");
    generate->add_option("--out", out_path, "store directory to create")->required();
    generate->add_option("--dims", dims_text, "fine lattice dims X,Y,Z")->required();
    generate->add_option("--leaf", leaf_text, "leaf chunk dims X,Y,Z");
    generate->add_option("--seed", seed, "generation seed");
    generate->add_option("--cell-min", cell_min, "min supervoxel run length per axis");
    generate->add_option("--cell-max", cell_max, "max supervoxel run length per axis");
    generate->add_option("--objects", objects_text, "object mode: lines|blocks|leaf-interior");
    generate->add_option("--object-cells", object_cells_text, "object size in cells A,B,C");
    generate->add_option("--intra-base", intra_base, "intra-object affinity band base");
    generate->add_option("--intra-width", intra_width, "intra-object affinity band width");
    generate->add_option("--inter-base", inter_base, "inter-object affinity band base");
    generate->add_option("--inter-width", inter_width, "inter-object affinity band width");
    generate->add_option("--jitter", jitter_text, "jitter mode: global|object|hash");
    generate->add_flag("--json", json_out, "machine-readable output");

    CLI::App* run = app.add_subcommand("run", "single global agglomeration pass");
    add_store(run);
    run->add_option("--kind", kind_text, "linkage kind: mean|max");
    run->add_option("--threshold", threshold_text, "stop threshold, decimal in [0,1]");
    run->add_option("--out", out_path, "dendrogram output file")->required();
    run->add_flag("--json", json_out, "machine-readable output");

    CLI::App* run_dist = app.add_subcommand("run-dist", "distributed octree agglomeration");
    add_store(run_dist);
    run_dist->add_option("--kind", kind_text, "linkage kind: mean|max");
    run_dist->add_option("--threshold", threshold_text, "stop threshold, decimal in [0,1]");
    run_dist->add_option("--out", out_path, "dendrogram output file")->required();
    run_dist->add_option("--workers", workers, "in-process worker threads");
    run_dist->add_option("--leaf-threshold", leaf_threshold,
                         "collapse subtrees holding at most this many edges (0 = never)");
    run_dist->add_option("--max-tasks", max_tasks, "stop after this many task commits");
    run_dist->add_option("--processes", processes, "use OS worker processes instead of threads");
    run_dist->add_flag("--json", json_out, "machine-readable output");

    CLI::App* worker = app.add_subcommand("worker", "internal: multi-process worker loop");
    add_store(worker);
    worker->add_option("--kind", kind_text, "");
    worker->add_option("--threshold", threshold_text, "");
    worker->add_option("--leaf-threshold", leaf_threshold, "");
    worker->add_option("--max-tasks", max_tasks, "");

    CLI::App* flatten = app.add_subcommand("flatten", "flat segmentation from a dendrogram");
    flatten->add_option("--dend", dend_path, "dendrogram file")->required();
    add_store(flatten);
    flatten->add_option("--out", out_path, "segmentation map output file")->required();
    flatten->add_option("--threshold", flatten_threshold,
                        "re-truncate at a higher threshold (default: header threshold)");

    CLI::App* verify = app.add_subcommand("verify", "compare two dendrograms");
    verify->add_option("a", dend_a, "first dendrogram")->required();
    verify->add_option("b", dend_b, "second dendrogram")->required();
    verify->add_flag("--json", json_out, "machine-readable output");

    CLI::App* stats = app.add_subcommand("stats", "per-level statistics of a distributed run");
    add_store(stats);
    stats->add_option("--leaf-threshold", leaf_threshold, "leaf threshold the run used");
    stats->add_flag("--json", json_out, "machine-readable output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (generate->parsed())
            return cmd_generate(out_path, dims_text, leaf_text, seed, cell_min, cell_max,
                                objects_text, object_cells_text, intra_base, intra_width,
                                inter_base, inter_width, jitter_text, json_out);
        if (run->parsed()) return cmd_run(store_path, kind_text, threshold_text, out_path, json_out);
        if (run_dist->parsed())
            return cmd_run_dist(store_path, kind_text, threshold_text, out_path, workers,
                                leaf_threshold, max_tasks, processes, json_out);
        if (worker->parsed())
            return cmd_worker(store_path, kind_text, threshold_text, leaf_threshold, max_tasks);
        if (flatten->parsed())
            return cmd_flatten(dend_path, store_path, out_path, flatten_threshold);
        if (verify->parsed()) return cmd_verify(dend_a, dend_b, json_out);
        if (stats->parsed()) return cmd_stats(store_path, leaf_threshold, json_out);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const CorruptStoreError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCorrupt;
    } catch (const MissingEntryError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCorrupt;
    } catch (const StoreError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCorrupt;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCorrupt;
    }
    return kExitUsage;
}
