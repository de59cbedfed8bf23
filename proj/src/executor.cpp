#include "ragglom/executor.hpp"

#include <sys/resource.h>
#include <unistd.h>

#include <chrono>
#include <condition_variable>
#include <csignal>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

namespace ragglom {

namespace fs = std::filesystem;

u64 current_peak_rss_kb() {
    rusage usage{};
    getrusage(RUSAGE_SELF, &usage);
    return static_cast<u64>(usage.ru_maxrss);
}

namespace {

u64 now_ms() {
    using namespace std::chrono;
    return static_cast<u64>(duration_cast<milliseconds>(steady_clock::now().time_since_epoch())
                                .count());
}

TaskOutput run_task(ChunkStore& store, const DatasetLayout& layout, const StoreManifest& manifest,
                    const TaskSpec& task, const RunOptions& opts) {
    const u64 start = now_ms();
    TaskOutput output = execute_chunk_task(store, layout, manifest, task, opts.kind,
                                           opts.threshold, store_frozen_source(store));
    output.stats.wall_ms = now_ms() - start;
    output.stats.rss_kb = current_peak_rss_kb();
    return output;
}

void fold_stats(RunReport& report, std::map<u32, LevelReport>& levels, u32 level,
                const TaskStats& stats) {
    LevelReport& entry = levels[level];
    entry.level = level;
    entry.tasks += 1;
    entry.merges += stats.merges;
    entry.frozen_edges += stats.frozen_edges;
    entry.max_input_edges = std::max(entry.max_input_edges, stats.input_edges);
    entry.max_frozen_edges = std::max(entry.max_frozen_edges, stats.frozen_edges);
    entry.max_peak_live_edges = std::max(entry.max_peak_live_edges, stats.peak_live_edges);
    entry.wall_ms += stats.wall_ms;
    report.total_merges += stats.merges;
}

RunReport finish_report(RunReport report, std::map<u32, LevelReport> levels) {
    for (auto& [level, entry] : levels) report.levels.push_back(entry);
    report.peak_rss_kb = current_peak_rss_kb();
    return report;
}

}  // namespace

RunReport run_distributed(ChunkStore& store, const DatasetLayout& layout,
                          const StoreManifest& manifest, const RunOptions& opts) {
    const TaskPlan plan = build_task_plan(layout, manifest, opts.leaf_threshold);
    const u64 run_start = now_ms();

    RunReport report;
    report.total_tasks = plan.tasks.size();
    report.kind_text = opts.kind_text;
    report.threshold_text = opts.threshold_text;
    report.store_path = store.root().string();
    report.workers = opts.workers;
    report.leaf_threshold = opts.leaf_threshold;

    // Scheduler state, guarded by one mutex. Dependencies follow the plan's
    // child lists; the plan is level-major so indices of children are lower.
    std::map<ChunkAddress, std::size_t> index_of;
    for (std::size_t i = 0; i < plan.tasks.size(); ++i) index_of[plan.tasks[i].addr] = i;

    std::vector<std::size_t> pending_children(plan.tasks.size(), 0);
    std::vector<std::vector<std::size_t>> dependents(plan.tasks.size());
    std::vector<bool> done(plan.tasks.size(), false);
    std::deque<std::size_t> ready;
    std::map<u32, LevelReport> levels;

    for (std::size_t i = 0; i < plan.tasks.size(); ++i) {
        for (const ChunkAddress& child : plan.tasks[i].children) {
            const std::size_t c = index_of.at(child);
            ++pending_children[i];
            dependents[c].push_back(i);
        }
    }

    std::mutex mutex;
    std::condition_variable cv;
    u64 committed_this_run = 0;
    bool stop = false;
    std::exception_ptr failure;
    std::size_t inflight = 0;

    {
        std::unique_lock lock(mutex);
        // Resume support: previously committed tasks are final.
        for (std::size_t i = 0; i < plan.tasks.size(); ++i) {
            if (store.output_committed(plan.tasks[i].addr)) {
                done[i] = true;
                ++report.skipped_tasks;
                fold_stats(report, levels, plan.tasks[i].addr.level,
                           store.read_task_stats(plan.tasks[i].addr));
            }
        }
        for (std::size_t i = 0; i < plan.tasks.size(); ++i) {
            if (done[i]) {
                for (std::size_t dep : dependents[i]) --pending_children[dep];
            }
        }
        for (std::size_t i = 0; i < plan.tasks.size(); ++i) {
            if (!done[i] && pending_children[i] == 0) ready.push_back(i);
        }
    }

    auto worker = [&] {
        std::unique_lock lock(mutex);
        while (true) {
            cv.wait(lock, [&] { return stop || !ready.empty(); });
            if (stop) return;
            if (opts.max_tasks > 0 && committed_this_run >= opts.max_tasks) {
                stop = true;
                cv.notify_all();
                return;
            }
            const std::size_t i = ready.front();
            ready.pop_front();
            ++inflight;
            lock.unlock();

            TaskOutput output;
            std::exception_ptr error;
            for (u64 attempt = 1; attempt <= opts.max_attempts; ++attempt) {
                try {
                    error = nullptr;
                    output = run_task(store, layout, manifest, plan.tasks[i], opts);
                    break;
                } catch (...) {
                    error = std::current_exception();
                }
            }
            if (!error) {
                store.commit_task_output(plan.tasks[i].addr, output);
            }

            lock.lock();
            --inflight;
            if (error) {
                failure = error;
                stop = true;
                cv.notify_all();
                return;
            }
            done[i] = true;
            ++committed_this_run;
            fold_stats(report, levels, plan.tasks[i].addr.level, output.stats);
            for (std::size_t dep : dependents[i]) {
                if (--pending_children[dep] == 0) ready.push_back(dep);
            }
            if (opts.max_tasks > 0 && committed_this_run >= opts.max_tasks) stop = true;
            if (done[plan.tasks.size() - 1]) stop = true;
            cv.notify_all();
        }
    };

    const u64 worker_count = std::max<u64>(1, opts.workers);
    std::vector<std::thread> threads;
    threads.reserve(worker_count);
    for (u64 i = 0; i < worker_count; ++i) threads.emplace_back(worker);
    {
        std::unique_lock lock(mutex);
        cv.wait(lock, [&] { return (stop && inflight == 0) || done[plan.tasks.size() - 1]; });
        stop = true;
        cv.notify_all();
    }
    for (std::thread& t : threads) t.join();

    if (failure) std::rethrow_exception(failure);

    report.executed_tasks = committed_this_run;
    report.completed = store.output_committed(plan.root().addr);
    report.wall_ms = now_ms() - run_start;
    return finish_report(std::move(report), std::move(levels));
}

// ---------------------------------------------------------------------------
// Multi-process worker.

namespace {

bool pid_alive(long pid) { return kill(static_cast<pid_t>(pid), 0) == 0 || errno != ESRCH; }

// Attempt to take the exclusive claim for a task. Removes claims left by
// dead workers.
bool try_claim(const fs::path& claim, long self_pid) {
    std::error_code ec;
    fs::create_directories(claim.parent_path(), ec);
    std::FILE* f = std::fopen(claim.c_str(), "wx");
    if (f != nullptr) {
        std::fprintf(f, "%ld\n", self_pid);
        std::fclose(f);
        return true;
    }
    std::ifstream existing(claim);
    long pid = 0;
    if (existing >> pid && pid > 0 && !pid_alive(pid)) {
        fs::remove(claim, ec);
    }
    return false;
}

u64 count_failures(const fs::path& fail) {
    std::ifstream in(fail);
    u64 lines = 0;
    std::string line;
    while (std::getline(in, line)) ++lines;
    return lines;
}

void record_failure(const fs::path& fail, const std::string& what) {
    std::ofstream out(fail, std::ios::app);
    out << what << "\n";
}

}  // namespace

int worker_process_loop(ChunkStore& store, const DatasetLayout& layout,
                        const StoreManifest& manifest, const RunOptions& opts) {
    const TaskPlan plan = build_task_plan(layout, manifest, opts.leaf_threshold);
    const fs::path poison = store.root() / "out" / "poison";
    const long self_pid = static_cast<long>(getpid());
    u64 committed = 0;

    while (true) {
        if (fs::exists(poison)) return 3;
        if (store.output_committed(plan.root().addr)) return 0;
        if (opts.max_tasks > 0 && committed >= opts.max_tasks) return 10;

        bool progressed = false;
        for (const TaskSpec& task : plan.tasks) {
            if (store.output_committed(task.addr)) continue;
            bool children_done = true;
            for (const ChunkAddress& child : task.children) {
                if (!store.output_committed(child)) {
                    children_done = false;
                    break;
                }
            }
            if (!children_done) continue;
            if (!try_claim(store.claim_path(task.addr), self_pid)) continue;
            try {
                const TaskOutput output = run_task(store, layout, manifest, task, opts);
                store.commit_task_output(task.addr, output);
                ++committed;
                progressed = true;
            } catch (const std::exception& e) {
                record_failure(store.fail_path(task.addr), e.what());
                if (count_failures(store.fail_path(task.addr)) >= opts.max_attempts) {
                    std::ofstream out(poison);
                    out << address_path(task.addr) << ": " << e.what() << "\n";
                    std::error_code ec;
                    fs::remove(store.claim_path(task.addr), ec);
                    return 3;
                }
            }
            std::error_code ec;
            fs::remove(store.claim_path(task.addr), ec);
            if (opts.max_tasks > 0 && committed >= opts.max_tasks) return 10;
        }
        if (!progressed) {
            // Another worker may still be computing a dependency.
            std::this_thread::sleep_for(std::chrono::milliseconds(25));
        }
    }
}

RunReport collect_report(const ChunkStore& store, const DatasetLayout& layout,
                         const StoreManifest& manifest, const RunOptions& opts) {
    const TaskPlan plan = build_task_plan(layout, manifest, opts.leaf_threshold);
    RunReport report;
    report.total_tasks = plan.tasks.size();
    report.kind_text = opts.kind_text;
    report.threshold_text = opts.threshold_text;
    report.store_path = store.root().string();
    report.workers = opts.workers;
    report.leaf_threshold = opts.leaf_threshold;
    std::map<u32, LevelReport> levels;
    for (const TaskSpec& task : plan.tasks) {
        if (!store.output_committed(task.addr)) continue;
        ++report.executed_tasks;
        fold_stats(report, levels, task.addr.level, store.read_task_stats(task.addr));
    }
    report.completed = store.output_committed(plan.root().addr);
    return finish_report(std::move(report), std::move(levels));
}

Dendrogram assemble_dendrogram(const ChunkStore& store, const TaskPlan& plan, LinkageKind kind,
                               FixedAffinity threshold, std::vector<u32>* row_levels) {
    Dendrogram rows;
    if (row_levels) row_levels->clear();
    for (const TaskSpec& task : plan.tasks) {
        DendrogramFile fragment = store.read_dend_fragment(task.addr);
        if (fragment.kind != kind || !(fragment.threshold == threshold))
            throw CorruptStoreError("fragment " + address_path(task.addr) +
                                    " was produced by a different run configuration");
        if (row_levels)
            row_levels->insert(row_levels->end(), fragment.rows.size(), task.addr.level);
        rows.insert(rows.end(), fragment.rows.begin(), fragment.rows.end());
    }
    return rows;
}

}  // namespace ragglom
