#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "lsrf/field.hpp"
#include "lsrf/kernels.hpp"

namespace lsrf {

enum class Smoother { NW, LL };

/// One-sided mean/scale estimates along the lex ordering of a region.
/// Position k uses the first k support points (Fitted) or k-1
/// (Predictive, delete-1). Positions before `valid_from` had no usable
/// support and must be skipped by consumers.
struct TrendFit {
    std::vector<double> mu;
    std::vector<double> sigma;
    Smoother smoother = Smoother::NW;
    FitMode mode = FitMode::Fitted;
    double b = 0.0;
    std::size_t valid_from = 0;
    double sigma_floor = 0.0;
    int ll_fallbacks = 0;  // positions where a degenerate LL design fell back to NW
};

struct ResidualField {
    std::vector<double> w;
    FitMode mode = FitMode::Fitted;
    std::size_t valid_from = 0;
};

namespace detail {

inline std::vector<double> gather(const FieldGrid& field, std::span<const Coord> coords) {
    std::vector<double> y(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) y[i] = field.at(coords[i]);
    return y;
}

inline double sigma_floor_for(std::span<const double> y) {
    if (y.empty()) return 1e-8;
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(y.size()));
    return 1e-8 * (sd > 0.0 ? sd : 1.0);
}

/// Mean and second-moment smooth of (y, y^2) at `target` over `support`,
/// shared by the per-position trend loop and the next-point prediction.
/// Returns false when the LL design was degenerate and NW was used.
inline bool smooth_at(std::span<const Coord> support, std::span<const double> y,
                      const Coord& target, const GaussLagTable& kern, Smoother sm,
                      double n_reg, double& mu, double& m2) {
    bool ll_ok = true;
    if (sm == Smoother::LL) {
        const LlMoments mo = ll_moments(support, target, kern);
        if (ll_degenerate(mo, support.size())) {
            ll_ok = false;
        } else {
            double sw = 0.0, swy = 0.0, swy2 = 0.0;
            for (std::size_t i = 0; i < support.size(); ++i) {
                const Coord d = support[i] - target;
                const double w = kern(d) * ll_bracket(mo, d.t1, d.t2);
                sw += w;
                swy += w * y[i];
                swy2 += w * y[i] * y[i];
            }
            const double denom = sw + 1.0 / (n_reg * n_reg);
            mu = swy / denom;
            m2 = swy2 / denom;
            return true;
        }
    }
    double sk = 0.0, sky = 0.0, sky2 = 0.0;
    for (std::size_t i = 0; i < support.size(); ++i) {
        const double k = kern(target - support[i]);
        sk += k;
        sky += k * y[i];
        sky2 += k * y[i] * y[i];
    }
    mu = sky / sk;
    m2 = sky2 / sk;
    return ll_ok;
}

}  // namespace detail

/// One-sided NW or LL fit of mu(t) and sigma(t) at every position of the
/// region ordering. With `heteroscedastic` false, sigma is identically 1.
inline TrendFit fit_trend(const FieldGrid& field, const NshpRegion& region, KernelSpec spec,
                          Smoother smoother, FitMode mode, bool heteroscedastic,
                          int k_min = 4) {
    const std::span<const Coord> coords(region.coords);
    const std::size_t n = coords.size();
    const std::vector<double> y = detail::gather(field, coords);

    TrendFit fit;
    fit.mu.assign(n, 0.0);
    fit.sigma.assign(n, 1.0);
    fit.smoother = smoother;
    fit.mode = mode;
    fit.b = spec.b;
    fit.valid_from = mode == FitMode::Predictive
                         ? std::min(static_cast<std::size_t>(k_min), n)
                         : 0;
    fit.sigma_floor = detail::sigma_floor_for(y);

    const GaussLagTable kern(spec.b, region.bounds.t1, region.bounds.t2);
    const double n_reg = static_cast<double>(std::max<std::size_t>(n, 1));

    for (std::size_t idx = 0; idx < n; ++idx) {
        const std::size_t t = mode == FitMode::Fitted ? idx + 1 : idx;
        if (t == 0) continue;  // no support; stays at (0, 1), below valid_from
        double mu = 0.0, m2 = 0.0;
        const bool ll_ok = detail::smooth_at(coords.subspan(0, t),
                                             std::span<const double>(y).subspan(0, t),
                                             coords[idx], kern, smoother, n_reg, mu, m2);
        if (!ll_ok) ++fit.ll_fallbacks;
        fit.mu[idx] = mu;
        if (heteroscedastic) {
            const double var = m2 - mu * mu;
            fit.sigma[idx] = std::sqrt(std::max(var, fit.sigma_floor * fit.sigma_floor));
        }
    }
    return fit;
}

/// Mean/scale estimate at a not-yet-observed point, using the full region
/// as one-sided support (the fitted and predictive variants coincide
/// there).
struct TrendAt {
    double mu = 0.0;
    double sigma = 1.0;
    bool ll_fell_back = false;
};

inline TrendAt predict_trend_at(const FieldGrid& field, const NshpRegion& region,
                                const Coord& target, KernelSpec spec, Smoother smoother,
                                bool heteroscedastic, double sigma_floor = 0.0) {
    if (region.empty()) throw InsufficientDataError("predict_trend_at: empty region");
    const std::span<const Coord> coords(region.coords);
    const std::vector<double> y = detail::gather(field, coords);
    const GaussLagTable kern(spec.b, region.bounds.t1, region.bounds.t2);

    TrendAt out;
    double mu = 0.0, m2 = 0.0;
    const bool ll_ok = detail::smooth_at(coords, y, target, kern, smoother,
                                         static_cast<double>(coords.size()), mu, m2);
    out.ll_fell_back = !ll_ok;
    out.mu = mu;
    if (heteroscedastic) {
        const double floor = sigma_floor > 0.0 ? sigma_floor : detail::sigma_floor_for(y);
        out.sigma = std::sqrt(std::max(m2 - mu * mu, floor * floor));
    }
    return out;
}

/// Studentized residuals w_k = (Y_k - mu_k) / sigma_k along the ordering;
/// positions before the fit's warm-up are zeroed.
inline ResidualField residuals(const FieldGrid& field, const NshpRegion& region,
                               const TrendFit& fit) {
    if (fit.mu.size() != region.size()) {
        throw DomainError("residuals: fit does not cover the region ordering");
    }
    ResidualField rf;
    rf.w.assign(region.size(), 0.0);
    rf.mode = fit.mode;
    rf.valid_from = fit.valid_from;
    for (std::size_t idx = fit.valid_from; idx < region.size(); ++idx) {
        rf.w[idx] = (field.at(region.coords[idx]) - fit.mu[idx]) / fit.sigma[idx];
    }
    return rf;
}

}  // namespace lsrf
