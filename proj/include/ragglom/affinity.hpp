// Linkage statistics for region-adjacency-graph agglomeration.
//
// Affinities are fixed-point integers (1.0 == 1'000'000). An interface
// between two clusters is summarized by an AffinityStat, which is exact,
// deterministically comparable and associatively combinable. Because all
// arithmetic is integer arithmetic, combining partial interface statistics
// in any order (parallel-edge merges during clustering, or stitching of
// chunked partial edges) produces identical results.

#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ragglom {

using u64 = std::uint64_t;
using u128 = unsigned __int128;
static_assert(sizeof(u128) == 16, "128-bit integer support required");

// Affinity in [0,1] scaled by 10^6. Integer order == affinity order;
// no rounding ever happens after ingestion.
struct FixedAffinity {
    static constexpr u64 kScale = 1'000'000;

    u64 value = 0;

    friend auto operator<=>(const FixedAffinity&, const FixedAffinity&) = default;
};

// Parses a decimal in [0,1] with at most six fractional digits to an exact
// FixedAffinity. Returns nullopt on malformed input, out-of-range values or
// more precision than the fixed-point grid can represent.
std::optional<FixedAffinity> parse_affinity(std::string_view text);

// Renders as a decimal with exactly six fractional digits.
std::string format_affinity(FixedAffinity a);

enum class LinkageKind : std::uint8_t {
    Mean = 0,
    Max = 1,
};

const char* linkage_name(LinkageKind kind);
std::optional<LinkageKind> parse_linkage(std::string_view name);

// Interface statistic of one cluster pair.
//
// Mean linkage: value is sum/count as an exact rational.
// Max linkage: value is `sum` itself (the maximum contribution seen);
// count is carried so the serialized layout is uniform across kinds.
struct AffinityStat {
    u128 sum = 0;
    u64 count = 0;

    bool operator==(const AffinityStat& o) const { return sum == o.sum && count == o.count; }
};

// n contributions of affinity a. n must be >= 1.
AffinityStat make_stat(LinkageKind kind, FixedAffinity a, u64 n);

// Aggregates two interface statistics. Commutative and associative for
// both kinds; serves parallel-edge merging and cross-chunk stitching alike.
AffinityStat combine(LinkageKind kind, const AffinityStat& x, const AffinityStat& y);

// Exact order of the represented affinity values. Mean statistics are
// compared by cross multiplication carried out in 192-bit arithmetic, so
// the result is exact for any representable inputs.
std::strong_ordering compare(LinkageKind kind, const AffinityStat& x, const AffinityStat& y);

// value(x) >= t, exactly.
bool value_at_least(LinkageKind kind, const AffinityStat& x, FixedAffinity t);

// Rounded-down value for reporting and file headers; never used for ordering.
FixedAffinity value_rounded(LinkageKind kind, const AffinityStat& x);

// For a cluster triple with pairwise interfaces a_ij, a_ik, a_jk, checks the
// no-reversal property: if (i,j) is the strongest pair, then the interface of
// the merged cluster i∪j towards k does not exceed max(a_ik, a_jk).
// Holds unconditionally for mean and max linkage.
bool check_reducibility(LinkageKind kind, const AffinityStat& a_ij, const AffinityStat& a_ik,
                        const AffinityStat& a_jk);

}  // namespace ragglom
