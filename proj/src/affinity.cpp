#include "ragglom/affinity.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <stdexcept>

namespace ragglom {

namespace {

// 192-bit product of a 128-bit and a 64-bit unsigned integer, as three
// 64-bit limbs (little-endian). Wide enough for any sum*count cross product.
struct U192 {
    std::array<u64, 3> limb{};

    friend auto operator<=>(const U192& a, const U192& b) {
        for (int i = 2; i >= 0; --i) {
            if (a.limb[i] != b.limb[i]) return a.limb[i] <=> b.limb[i];
        }
        return std::strong_ordering::equal;
    }
};

U192 mul_128_64(u128 a, u64 b) {
    const u64 lo = static_cast<u64>(a);
    const u64 hi = static_cast<u64>(a >> 64);
    const u128 p0 = static_cast<u128>(lo) * b;
    const u128 p1 = static_cast<u128>(hi) * b;
    U192 r;
    r.limb[0] = static_cast<u64>(p0);
    const u128 mid = (p0 >> 64) + static_cast<u64>(p1);
    r.limb[1] = static_cast<u64>(mid);
    r.limb[2] = static_cast<u64>(p1 >> 64) + static_cast<u64>(mid >> 64);
    return r;
}

}  // namespace

std::optional<FixedAffinity> parse_affinity(std::string_view text) {
    if (text.empty()) return std::nullopt;
    const auto dot = text.find('.');
    std::string_view whole = text.substr(0, dot);
    std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
    if (whole.empty() && frac.empty()) return std::nullopt;
    if (frac.size() > 6) return std::nullopt;  // refuse silent quantization
    u64 value = 0;
    for (char c : whole) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
        value = value * 10 + static_cast<u64>(c - '0');
        if (value > 1) return std::nullopt;
    }
    value *= FixedAffinity::kScale;
    u64 frac_value = 0;
    u64 frac_scale = FixedAffinity::kScale;
    for (char c : frac) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
        frac_scale /= 10;
        frac_value += static_cast<u64>(c - '0') * frac_scale;
    }
    value += frac_value;
    if (value > FixedAffinity::kScale) return std::nullopt;
    return FixedAffinity{value};
}

std::string format_affinity(FixedAffinity a) {
    std::string out = std::to_string(a.value / FixedAffinity::kScale);
    out += '.';
    std::string frac = std::to_string(a.value % FixedAffinity::kScale);
    out += std::string(6 - frac.size(), '0');
    out += frac;
    return out;
}

const char* linkage_name(LinkageKind kind) {
    return kind == LinkageKind::Mean ? "mean" : "max";
}

std::optional<LinkageKind> parse_linkage(std::string_view name) {
    if (name == "mean") return LinkageKind::Mean;
    if (name == "max") return LinkageKind::Max;
    return std::nullopt;
}

AffinityStat make_stat(LinkageKind kind, FixedAffinity a, u64 n) {
    if (n == 0) throw std::invalid_argument("make_stat: contact count must be >= 1");
    if (a.value > FixedAffinity::kScale) throw std::invalid_argument("make_stat: affinity out of range");
    if (kind == LinkageKind::Mean) return AffinityStat{static_cast<u128>(a.value) * n, n};
    return AffinityStat{a.value, n};
}

AffinityStat combine(LinkageKind kind, const AffinityStat& x, const AffinityStat& y) {
    if (kind == LinkageKind::Mean) return AffinityStat{x.sum + y.sum, x.count + y.count};
    return AffinityStat{std::max(x.sum, y.sum), x.count + y.count};
}

std::strong_ordering compare(LinkageKind kind, const AffinityStat& x, const AffinityStat& y) {
    if (kind == LinkageKind::Mean) return mul_128_64(x.sum, y.count) <=> mul_128_64(y.sum, x.count);
    return x.sum <=> y.sum;
}

bool value_at_least(LinkageKind kind, const AffinityStat& x, FixedAffinity t) {
    if (kind == LinkageKind::Mean) return x.sum >= static_cast<u128>(t.value) * x.count;
    return x.sum >= t.value;
}

FixedAffinity value_rounded(LinkageKind kind, const AffinityStat& x) {
    if (kind == LinkageKind::Mean) return FixedAffinity{static_cast<u64>(x.sum / x.count)};
    return FixedAffinity{static_cast<u64>(x.sum)};
}

bool check_reducibility(LinkageKind kind, const AffinityStat& a_ij, const AffinityStat& a_ik,
                        const AffinityStat& a_jk) {
    const AffinityStat& strongest =
        compare(kind, a_ik, a_jk) >= 0 ? a_ik : a_jk;
    if (compare(kind, a_ij, strongest) < 0) return true;  // vacuous
    const AffinityStat merged = combine(kind, a_ik, a_jk);
    return compare(kind, merged, strongest) <= 0;
}

}  // namespace ragglom
