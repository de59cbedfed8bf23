#include "doctest.h"
#include "support.hpp"

#include <fstream>

#include "ragglom/datagen.hpp"
#include "ragglom/executor.hpp"

using namespace ragglom;
using testsup::ScratchDir;

namespace {

struct Fixture {
    ScratchDir scratch{"exec"};
    StoreManifest manifest;
    DatasetLayout layout;

    explicit Fixture(u64 seed) {
        ChunkStore store(scratch.path, true);
        SyntheticSpec spec;
        spec.dims = Vec3{8, 8, 8};
        spec.leaf_dims = Vec3{2, 2, 2};
        spec.seed = seed;
        spec.object_cells = Vec3{3, 1, 1};
        generate(spec, store);
        manifest = store.read_manifest();
        layout = DatasetLayout::create(manifest.dims, manifest.leaf_dims);
    }

    ChunkStore store() { return ChunkStore(scratch.path); }

    RunOptions options(u64 workers) const {
        RunOptions opts;
        opts.kind = LinkageKind::Mean;
        opts.threshold = FixedAffinity{300'000};
        opts.kind_text = "mean";
        opts.threshold_text = "0.3";
        opts.workers = workers;
        opts.leaf_threshold = 0;
        return opts;
    }

    void clear_outputs() { std::filesystem::remove_all(scratch.path / "out"); }

    std::string output_bytes() {
        ChunkStore s = store();
        const TaskPlan plan = build_task_plan(layout, manifest, 0);
        std::string bytes;
        for (const TaskSpec& task : plan.tasks) {
            for (const auto& path : {s.dend_path(task.addr), s.frozen_path(task.addr)}) {
                std::ifstream in(path, std::ios::binary);
                bytes.append((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
            }
        }
        return bytes;
    }
};

}  // namespace

TEST_SUITE_BEGIN("executor");

TEST_CASE("worker count does not change any committed byte") {
    Fixture fixture(21);
    ChunkStore store = fixture.store();

    RunReport serial = run_distributed(store, fixture.layout, fixture.manifest,
                                       fixture.options(1));
    CHECK(serial.completed);
    CHECK(serial.executed_tasks == serial.total_tasks);
    const std::string serial_bytes = fixture.output_bytes();

    fixture.clear_outputs();
    RunReport parallel = run_distributed(store, fixture.layout, fixture.manifest,
                                         fixture.options(8));
    CHECK(parallel.completed);
    CHECK(fixture.output_bytes() == serial_bytes);
    CHECK(parallel.total_merges == serial.total_merges);

    // The executor's outputs match the sequential reference runner's rows.
    const RecursiveResult reference = agglomerate_recursive(
        store, fixture.layout, fixture.manifest, LinkageKind::Mean, FixedAffinity{300'000}, 0);
    const TaskPlan plan = build_task_plan(fixture.layout, fixture.manifest, 0);
    std::vector<u32> levels;
    const Dendrogram assembled =
        assemble_dendrogram(store, plan, LinkageKind::Mean, FixedAffinity{300'000}, &levels);
    CHECK(assembled == reference.rows);
    CHECK(levels == reference.row_levels);
}

TEST_CASE("interrupted runs resume to identical bytes") {
    Fixture fixture(22);
    ChunkStore store = fixture.store();

    RunReport full = run_distributed(store, fixture.layout, fixture.manifest, fixture.options(2));
    CHECK(full.completed);
    const std::string expected = fixture.output_bytes();

    fixture.clear_outputs();
    RunOptions limited = fixture.options(2);
    limited.max_tasks = 7;
    RunReport partial = run_distributed(store, fixture.layout, fixture.manifest, limited);
    CHECK(!partial.completed);
    CHECK(partial.executed_tasks >= 7);  // in-flight tasks may still commit

    RunReport resumed = run_distributed(store, fixture.layout, fixture.manifest,
                                        fixture.options(2));
    CHECK(resumed.completed);
    CHECK(resumed.skipped_tasks >= 7);
    CHECK(resumed.executed_tasks + resumed.skipped_tasks == resumed.total_tasks);
    CHECK(fixture.output_bytes() == expected);
}

TEST_CASE("a corrupted dependency aborts the run after retries") {
    Fixture fixture(23);
    ChunkStore store = fixture.store();

    RunOptions leaf_only = fixture.options(1);
    leaf_only.max_tasks = 64;  // exactly the leaves
    RunReport leaves = run_distributed(store, fixture.layout, fixture.manifest, leaf_only);
    CHECK(!leaves.completed);

    // Destroy one committed leaf output; its parent cannot assemble.
    const TaskPlan plan = build_task_plan(fixture.layout, fixture.manifest, 0);
    const ChunkAddress victim = plan.tasks.front().addr;
    {
        std::ofstream out(store.frozen_path(victim), std::ios::binary | std::ios::trunc);
        out << "garbage";
    }
    CHECK_THROWS_AS(
        run_distributed(store, fixture.layout, fixture.manifest, fixture.options(2)),
        CorruptStoreError);
}

TEST_CASE("multi-process workers coordinate through claim files") {
    Fixture fixture(24);

    auto run_workers = [&](int count) {
        std::vector<pid_t> pids;
        for (int i = 0; i < count; ++i) {
            const pid_t pid = fork();
            REQUIRE(pid >= 0);
            if (pid == 0) {
                ChunkStore store(fixture.scratch.path);
                const int code = worker_process_loop(store, fixture.layout, fixture.manifest,
                                                     fixture.options(1));
                _exit(code);
            }
            pids.push_back(pid);
        }
        for (pid_t pid : pids) {
            int status = 0;
            waitpid(pid, &status, 0);
            CHECK(WIFEXITED(status));
            CHECK(WEXITSTATUS(status) == 0);
        }
    };

    ChunkStore store = fixture.store();
    run_distributed(store, fixture.layout, fixture.manifest, fixture.options(1));
    const std::string expected = fixture.output_bytes();

    fixture.clear_outputs();
    run_workers(3);
    CHECK(fixture.output_bytes() == expected);
    const RunReport report = collect_report(store, fixture.layout, fixture.manifest,
                                            fixture.options(3));
    CHECK(report.completed);
    CHECK(report.executed_tasks == report.total_tasks);

    // No stale claims left behind.
    const TaskPlan plan = build_task_plan(fixture.layout, fixture.manifest, 0);
    for (const TaskSpec& task : plan.tasks)
        CHECK(!std::filesystem::exists(store.claim_path(task.addr)));
}

TEST_CASE("outputs from a different run configuration are rejected") {
    Fixture fixture(26);
    ChunkStore store = fixture.store();
    run_distributed(store, fixture.layout, fixture.manifest, fixture.options(2));
    const TaskPlan plan = build_task_plan(fixture.layout, fixture.manifest, 0);
    CHECK_THROWS_AS(assemble_dendrogram(store, plan, LinkageKind::Max, FixedAffinity{300'000}),
                    CorruptStoreError);
    // A stitch task must refuse children produced under another kind.
    std::filesystem::remove(store.ok_path(plan.root().addr));
    RunOptions max_opts = fixture.options(1);
    max_opts.kind = LinkageKind::Max;
    max_opts.kind_text = "max";
    CHECK_THROWS_AS(run_distributed(store, fixture.layout, fixture.manifest, max_opts),
                    CorruptStoreError);
}

TEST_CASE("level reports aggregate task stats") {
    Fixture fixture(25);
    ChunkStore store = fixture.store();
    const RunReport report = run_distributed(store, fixture.layout, fixture.manifest,
                                             fixture.options(4));
    REQUIRE(report.levels.size() == 3);
    CHECK(report.levels[0].level == 0);
    CHECK(report.levels[0].tasks == 64);
    CHECK(report.levels[1].tasks == 8);
    CHECK(report.levels[2].tasks == 1);
    CHECK(report.levels[2].max_frozen_edges == 0);  // root frozen graph is empty
    u64 merges = 0;
    for (const LevelReport& level : report.levels) merges += level.merges;
    CHECK(merges == report.total_merges);
    CHECK(report.peak_rss_kb > 0);
}

TEST_SUITE_END();
