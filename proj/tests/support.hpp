// Shared test utilities: independent oracles, random graph generation,
// scratch stores and CLI process helpers.

#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ragglom/agglomerate.hpp"
#include "ragglom/region_graph.hpp"

namespace testsup {

using namespace ragglom;
using BigInt = boost::multiprecision::cpp_int;

inline BigInt big(u128 v) {
    return (BigInt(static_cast<u64>(v >> 64)) << 64) | BigInt(static_cast<u64>(v));
}

// Independent exact-rational comparison of two statistics' values under a
// linkage kind, sidestepping the library's limb arithmetic entirely.
inline int oracle_compare(LinkageKind kind, const AffinityStat& x, const AffinityStat& y) {
    BigInt lhs, rhs;
    if (kind == LinkageKind::Mean) {
        lhs = big(x.sum) * BigInt(y.count);
        rhs = big(y.sum) * BigInt(x.count);
    } else {
        lhs = big(x.sum);
        rhs = big(y.sum);
    }
    if (lhs < rhs) return -1;
    if (lhs > rhs) return 1;
    return 0;
}

// Exact value-as-rational equality key (normalized fraction).
inline std::pair<BigInt, BigInt> oracle_value(LinkageKind kind, const AffinityStat& s) {
    if (kind == LinkageKind::Max) return {big(s.sum), 1};
    BigInt num = big(s.sum), den = s.count;
    BigInt g = boost::multiprecision::gcd(num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
    return {num, den};
}

// Random tie-free region graphs: every edge gets a stat whose exact value is
// distinct from all others in the graph.
struct RandomGraphSpec {
    std::size_t nodes = 50;
    std::size_t edges = 120;
    u64 max_count = 4;
    u64 seed = 1;
};

inline RegionGraph random_graph(LinkageKind kind, const RandomGraphSpec& spec) {
    std::mt19937_64 rng(spec.seed);
    RegionGraph graph(kind);
    std::set<EdgeKey> used_keys;
    std::set<std::pair<BigInt, BigInt>> used_values;
    for (std::size_t i = 1; i <= spec.nodes; ++i) graph.add_node(i);
    std::size_t added = 0;
    while (added < spec.edges) {
        const SegmentId a = rng() % spec.nodes + 1;
        const SegmentId b = rng() % spec.nodes + 1;
        if (a == b) continue;
        const EdgeKey key = make_edge_key(a, b);
        if (!used_keys.insert(key).second) continue;
        AffinityStat stat;
        do {
            const u64 count = rng() % spec.max_count + 1;
            stat = kind == LinkageKind::Mean
                       ? AffinityStat{rng() % (FixedAffinity::kScale * count + 1), count}
                       : AffinityStat{rng() % (FixedAffinity::kScale + 1), count};
        } while (!used_values.insert(oracle_value(kind, stat)).second);
        graph.add_edge(key, stat);
        ++added;
    }
    return graph;
}

inline AffinityStat random_stat(std::mt19937_64& rng, u64 max_count = 100) {
    const u64 count = rng() % max_count + 1;
    const u64 value = rng() % (FixedAffinity::kScale + 1);
    // Mean-form stat with sum <= value*count so the value stays in range.
    return AffinityStat{static_cast<u128>(value) * count, count};
}

// Deep copy helper (RegionGraph is copyable; spelled out for intent).
inline RegionGraph clone(const RegionGraph& g) { return g; }

struct ScratchDir {
    std::filesystem::path path;

    explicit ScratchDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("ragglom_" + tag + "_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        std::filesystem::create_directories(path);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    std::string str(const std::string& name = "") const {
        return name.empty() ? path.string() : (path / name).string();
    }

private:
    static int& counter() {
        static int c = 0;
        return c;
    }
};

struct CommandResult {
    int exit_code = -1;
    std::string output;  // stdout only
};

inline std::string ragglom_bin() {
    const char* env = std::getenv("RAGGLOM_BIN");
    return env != nullptr ? env : "./ragglom";
}

inline CommandResult run_command(const std::string& command) {
    CommandResult result;
    std::FILE* pipe = popen((command + " 2>/dev/null").c_str(), "r");
    if (pipe == nullptr) return result;
    char buffer[4096];
    while (std::fgets(buffer, sizeof buffer, pipe) != nullptr) result.output += buffer;
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

inline CommandResult run_tool(const std::string& args) {
    return run_command(ragglom_bin() + " " + args);
}

}  // namespace testsup
