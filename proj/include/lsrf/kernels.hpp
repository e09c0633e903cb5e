#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "lsrf/coord.hpp"
#include "lsrf/error.hpp"

namespace lsrf {

enum class FitMode { Fitted, Predictive };

/// Spatial smoothing bandwidth, in grid-index units. The 2-D Gaussian
/// kernel has per-axis standard deviation b and no cross term.
struct KernelSpec {
    double b;

    explicit KernelSpec(double b_) : b(b_) {
        if (!(b > 0.0)) throw DomainError("KernelSpec: bandwidth must be > 0");
    }
};

/// Unnormalized 2-D Gaussian kernel at integer lag d: exp(-|d|^2 / (2 b^2)).
inline double gauss2d(const Coord& d, double b) {
    if (!(b > 0.0)) throw DomainError("gauss2d: bandwidth must be > 0");
    const double sq = static_cast<double>(d.t1) * d.t1 + static_cast<double>(d.t2) * d.t2;
    return std::exp(-sq / (2.0 * b * b));
}

/// Kernel values over integer lags memoized by squared distance. Exact:
/// the table entry is the same std::exp the direct call would produce.
class GaussLagTable {
public:
    GaussLagTable(double b, int max_abs_d1, int max_abs_d2) : b_(b) {
        if (!(b > 0.0)) throw DomainError("GaussLagTable: bandwidth must be > 0");
        const std::size_t max_sq = static_cast<std::size_t>(max_abs_d1) * max_abs_d1 +
                                   static_cast<std::size_t>(max_abs_d2) * max_abs_d2;
        table_.resize(max_sq + 1);
        const double inv = -1.0 / (2.0 * b * b);
        for (std::size_t s = 0; s <= max_sq; ++s) {
            table_[s] = std::exp(inv * static_cast<double>(s));
        }
    }

    double b() const { return b_; }

    double operator()(const Coord& d) const {
        const std::size_t sq = static_cast<std::size_t>(d.t1) * d.t1 +
                               static_cast<std::size_t>(d.t2) * d.t2;
        return table_[sq];
    }

private:
    double b_;
    std::vector<double> table_;
};

/// Weights attached to an ordered support, evaluated at one target point.
/// NW weights are nonnegative and sum to one; LL weights are signed and
/// left unnormalized (consumers divide by sum + n^-2).
struct WeightVector {
    Coord target;
    std::vector<Coord> support;
    std::vector<double> weights;
    FitMode mode = FitMode::Fitted;
};

inline WeightVector nw_weights(std::span<const Coord> support, const Coord& target, double b) {
    if (support.empty()) throw InsufficientDataError("nw_weights: empty support");
    WeightVector w{target, {support.begin(), support.end()}, {}, FitMode::Fitted};
    w.weights.resize(support.size());
    double total = 0.0;
    for (std::size_t i = 0; i < support.size(); ++i) {
        w.weights[i] = gauss2d(target - support[i], b);
        total += w.weights[i];
    }
    for (double& x : w.weights) x /= total;
    return w;
}

/// Kernel-weighted design moments of the lags a_j = s_j - target.
struct LlMoments {
    double s00 = 0.0;  // sum K
    double s10 = 0.0;  // sum K a1
    double s01 = 0.0;  // sum K a2
    double s20 = 0.0;  // sum K a1^2
    double s02 = 0.0;  // sum K a2^2
    double s11 = 0.0;  // sum K a1 a2
};

template <class KernelFn>
inline LlMoments ll_moments(std::span<const Coord> support, const Coord& target, KernelFn kernel) {
    LlMoments m;
    for (const Coord& s : support) {
        const Coord d = s - target;
        const double k = kernel(d);
        const double a1 = d.t1;
        const double a2 = d.t2;
        m.s00 += k;
        m.s10 += k * a1;
        m.s01 += k * a2;
        m.s20 += k * a1 * a1;
        m.s02 += k * a2 * a2;
        m.s11 += k * a1 * a2;
    }
    return m;
}

/// The local-linear bracket multiplying K_j for a support point with lag
/// (a1, a2); w_j = K_j * ll_bracket(m, a1, a2).
inline double ll_bracket(const LlMoments& m, double a1, double a2) {
    return m.s20 * m.s02 - m.s11 * m.s11
         - a1 * (m.s10 * m.s02 - m.s01 * m.s11)
         + a2 * (m.s10 * m.s11 - m.s20 * m.s01);
}

/// True when the support cannot pin down a plane: fewer than 3 points, or
/// kernel-weighted coordinate spread numerically collinear (smallest
/// eigenvalue of the centered second-moment matrix < 1e-10 x largest).
inline bool ll_degenerate(const LlMoments& m, std::size_t support_size) {
    if (support_size < 3) return true;
    if (!(m.s00 > 0.0)) return true;
    const double mx = m.s10 / m.s00;
    const double my = m.s01 / m.s00;
    const double cxx = m.s20 / m.s00 - mx * mx;
    const double cyy = m.s02 / m.s00 - my * my;
    const double cxy = m.s11 / m.s00 - mx * my;
    const double tr = cxx + cyy;
    const double det = cxx * cyy - cxy * cxy;
    const double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * det));
    const double lo = 0.5 * (tr - disc);
    const double hi = 0.5 * (tr + disc);
    return !(hi > 0.0) || lo < 1e-10 * hi;
}

template <class KernelFn>
inline void ll_weight_values(std::span<const Coord> support, const Coord& target,
                             KernelFn kernel, std::span<double> out) {
    const LlMoments m = ll_moments(support, target, kernel);
    for (std::size_t j = 0; j < support.size(); ++j) {
        const Coord d = support[j] - target;
        out[j] = kernel(d) * ll_bracket(m, static_cast<double>(d.t1), static_cast<double>(d.t2));
    }
}

inline WeightVector ll_weights(std::span<const Coord> support, const Coord& target, double b) {
    if (support.empty()) throw InsufficientDataError("ll_weights: empty support");
    WeightVector w{target, {support.begin(), support.end()}, {}, FitMode::Fitted};
    w.weights.resize(support.size());
    ll_weight_values(support, target, [b](const Coord& d) { return gauss2d(d, b); },
                     std::span<double>(w.weights));
    return w;
}

}  // namespace lsrf
