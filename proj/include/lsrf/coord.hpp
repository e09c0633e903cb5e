#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "lsrf/error.hpp"

namespace lsrf {

/// Integer lattice index (t1 = row, t2 = column). Lexicographic order on
/// (t1, t2) is the causal order used throughout: a point's "past" is the
/// set of its strict lexicographic predecessors.
struct Coord {
    int t1 = 0;
    int t2 = 0;

    friend constexpr auto operator<=>(const Coord&, const Coord&) = default;

    constexpr Coord operator+(const Coord& o) const { return {t1 + o.t1, t2 + o.t2}; }
    constexpr Coord operator-(const Coord& o) const { return {t1 - o.t1, t2 - o.t2}; }
};

inline std::string to_string(const Coord& c) {
    return "(" + std::to_string(c.t1) + "," + std::to_string(c.t2) + ")";
}

/// Three-way lexicographic comparison: first on t1, ties broken on t2.
constexpr std::strong_ordering lex_compare(const Coord& a, const Coord& b) {
    return a <=> b;
}

constexpr bool in_bounds(const Coord& c, const Coord& bounds) {
    return c.t1 >= 0 && c.t1 < bounds.t1 && c.t2 >= 0 && c.t2 < bounds.t2;
}

/// The causal past of `center` inside the grid [0,n1) x [0,n2): every grid
/// point strictly lexicographically below the center (all rows above it,
/// plus the same-row points to its left), in ascending lex order.
struct NshpRegion {
    Coord center;
    Coord bounds;
    std::vector<Coord> coords;

    std::size_t size() const { return coords.size(); }
    bool empty() const { return coords.empty(); }

    bool contains(const Coord& c) const {
        return in_bounds(c, bounds) && c < center;
    }

    /// Position of `c` in the lex ordering, valid only when contains(c).
    std::size_t index_of(const Coord& c) const {
        return static_cast<std::size_t>(c.t1) * bounds.t2 + c.t2;
    }
};

inline NshpRegion nshp_region(const Coord& center, const Coord& bounds) {
    if (!in_bounds(center, bounds)) {
        throw BoundsError("nshp_region: center " + to_string(center) +
                          " outside bounds " + to_string(bounds));
    }
    NshpRegion region{center, bounds, {}};
    region.coords.reserve(static_cast<std::size_t>(center.t1) * bounds.t2 + center.t2);
    for (int r = 0; r < center.t1; ++r) {
        for (int c = 0; c < bounds.t2; ++c) {
            region.coords.push_back({r, c});
        }
    }
    for (int c = 0; c < center.t2; ++c) {
        region.coords.push_back({center.t1, c});
    }
    return region;
}

/// Region of support H_{p,q} of a causal 2-D AR model: row lags 1..p over
/// columns -q..q, plus same-row lags (0, 1..q). Lex-sorted, never contains
/// the origin.
struct RosLagSet {
    int p = 0;
    int q = 0;
    std::vector<Coord> lags;

    std::size_t size() const { return lags.size(); }
};

inline RosLagSet ros_lags(int p, int q) {
    if (p < 0 || q < 0) {
        throw DomainError("ros_lags: negative order");
    }
    if (p == 0 && q == 0) {
        throw EmptyModelError("ros_lags: p = q = 0 gives an empty model");
    }
    RosLagSet ros{p, q, {}};
    ros.lags.reserve(static_cast<std::size_t>(p) * (2 * q + 1) + q);
    for (int k = 1; k <= q; ++k) {
        ros.lags.push_back({0, k});
    }
    for (int j = 1; j <= p; ++j) {
        for (int k = -q; k <= q; ++k) {
            ros.lags.push_back({j, k});
        }
    }
    return ros;
}

/// True iff every lag lies in the closed causal half-plane
/// {j >= 1} u {j = 0, k >= 1}.
inline bool check_causal(const RosLagSet& ros) {
    for (const Coord& lag : ros.lags) {
        const bool ok = lag.t1 >= 1 || (lag.t1 == 0 && lag.t2 >= 1);
        if (!ok) return false;
    }
    return true;
}

}  // namespace lsrf
