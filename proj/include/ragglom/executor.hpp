// Dependency-respecting execution of a chunk task plan.
//
// The reference executor is an in-process worker pool: a task becomes ready
// once all of its children's outputs are committed, every commit is atomic,
// and committed outputs are never recomputed, which makes interrupted runs
// resumable. A multi-process mode runs the same protocol across OS
// processes that coordinate purely through the store (exclusive claim
// files plus the commit markers).

#pragma once

#include <string>
#include <vector>

#include "ragglom/octree.hpp"

namespace ragglom {

struct RunOptions {
    LinkageKind kind = LinkageKind::Mean;
    FixedAffinity threshold;
    u64 leaf_threshold = 4'000'000;
    u64 workers = 1;
    u64 max_tasks = 0;      // stop scheduling after this many commits (0 = no limit)
    u64 max_attempts = 3;   // per-task attempts before the run is aborted
    // config echo for the report
    std::string kind_text;
    std::string threshold_text;
};

struct LevelReport {
    u32 level = 0;
    u64 tasks = 0;
    u64 merges = 0;
    u64 frozen_edges = 0;
    u64 max_input_edges = 0;
    u64 max_frozen_edges = 0;
    u64 max_peak_live_edges = 0;
    u64 wall_ms = 0;
};

struct RunReport {
    std::vector<LevelReport> levels;
    u64 total_tasks = 0;
    u64 executed_tasks = 0;
    u64 skipped_tasks = 0;   // found already committed (resume)
    u64 total_merges = 0;
    u64 wall_ms = 0;
    u64 peak_rss_kb = 0;
    bool completed = false;  // root output committed
    std::string kind_text;
    std::string threshold_text;
    std::string store_path;
    u64 workers = 0;
    u64 leaf_threshold = 0;
};

// Peak resident set size of the calling process, in KiB.
u64 current_peak_rss_kb();

// Executes every pending task of the plan with an in-process worker pool.
// Tasks whose outputs are already committed are skipped. A task that keeps
// failing aborts the run with the underlying error. When opts.max_tasks is
// hit the run stops early with report.completed == false.
RunReport run_distributed(ChunkStore& store, const DatasetLayout& layout,
                          const StoreManifest& manifest, const RunOptions& opts);

// Single worker process loop for the multi-process mode: claims ready tasks
// via exclusive claim files, executes and commits them, and exits once the
// root is committed (or a poison marker appears). Returns a process exit
// code (0 on success).
int worker_process_loop(ChunkStore& store, const DatasetLayout& layout,
                        const StoreManifest& manifest, const RunOptions& opts);

// Aggregates committed task stats into a report (used after multi-process
// runs and by the stats command).
RunReport collect_report(const ChunkStore& store, const DatasetLayout& layout,
                         const StoreManifest& manifest, const RunOptions& opts);

// Concatenates the per-chunk dendrogram fragments in canonical order
// (level-major, address order within a level) into one dendrogram. Fails if
// any fragment was produced under a different linkage kind or threshold.
Dendrogram assemble_dendrogram(const ChunkStore& store, const TaskPlan& plan, LinkageKind kind,
                               FixedAffinity threshold, std::vector<u32>* row_levels = nullptr);

}  // namespace ragglom
