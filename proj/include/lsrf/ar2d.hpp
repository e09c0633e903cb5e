#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "lsrf/coord.hpp"
#include "lsrf/error.hpp"
#include "lsrf/trend.hpp"

namespace lsrf {

enum class OrderCriterion { AIC, BIC };

/// Causal 2-D AR(p,q) model on the NSHP region of support.
struct ArModel2D {
    RosLagSet ros;
    std::vector<double> beta;  // aligned with ros.lags
    double sigma2 = 0.0;       // innovation variance
};

/// Autocovariances gamma(k,l) over |k| <= khw, |l| <= lhw, with the
/// symmetry gamma(k,l) = gamma(-k,-l).
struct AutocovTable {
    int khw = 0;
    int lhw = 0;
    std::vector<double> g;

    double at(int k, int l) const {
        if (std::abs(k) > khw || std::abs(l) > lhw) {
            throw DomainError("AutocovTable: lag (" + std::to_string(k) + "," +
                              std::to_string(l) + ") outside halfwidths");
        }
        return g[static_cast<std::size_t>(k + khw) * (2 * lhw + 1) + (l + lhw)];
    }

    double& ref(int k, int l) {
        return g[static_cast<std::size_t>(k + khw) * (2 * lhw + 1) + (l + lhw)];
    }

    static AutocovTable zeros(int khw, int lhw) {
        AutocovTable t;
        t.khw = khw;
        t.lhw = lhw;
        t.g.assign(static_cast<std::size_t>(2 * khw + 1) * (2 * lhw + 1), 0.0);
        return t;
    }
};

/// Model-implied covariance (correlation form) over a lex ordering,
/// positive definite up to the recorded diagonal jitter.
struct CovMatrix {
    Eigen::MatrixXd mat;
    std::vector<Coord> ordering;
    double jitter = 0.0;
};

/// Lower-triangular Cholesky factor plus the jitter that was needed.
struct CholFactor {
    Eigen::MatrixXd lower;
    double jitter = 0.0;
};

// ---------------------------------------------------------------------------
// sample autocovariance

inline AutocovTable sample_autocov(const ResidualField& w, const NshpRegion& region,
                                   int khw, int lhw) {
    if (khw < 0 || lhw < 0) throw DomainError("sample_autocov: negative halfwidth");
    const std::size_t n_valid =
        region.size() > w.valid_from ? region.size() - w.valid_from : 0;
    const std::size_t needed =
        static_cast<std::size_t>(khw + 1) * (2 * lhw + 1) + 10;
    if (n_valid < needed) {
        throw InsufficientDataError("sample_autocov: region too small (" +
                                    std::to_string(n_valid) + " valid, need " +
                                    std::to_string(needed) + ")");
    }

    double mean = 0.0;
    for (std::size_t i = w.valid_from; i < region.size(); ++i) mean += w.w[i];
    mean /= static_cast<double>(n_valid);

    AutocovTable t = AutocovTable::zeros(khw, lhw);
    const double inv_n = 1.0 / static_cast<double>(n_valid);
    for (int k = 0; k <= khw; ++k) {
        const int lmin = k == 0 ? 0 : -lhw;
        for (int l = lmin; l <= lhw; ++l) {
            const Coord lag{k, l};
            double acc = 0.0;
            for (std::size_t i = w.valid_from; i < region.size(); ++i) {
                const Coord other = region.coords[i] - lag;
                if (!region.contains(other)) continue;
                const std::size_t j = region.index_of(other);
                if (j < w.valid_from) continue;
                acc += (w.w[i] - mean) * (w.w[j] - mean);
            }
            const double val = acc * inv_n;
            t.ref(k, l) = val;
            t.ref(-k, -l) = val;
        }
    }
    return t;
}

// ---------------------------------------------------------------------------
// Yule-Walker fit and order selection

namespace detail {

inline std::size_t valid_count(const ResidualField& w) {
    return w.w.size() > w.valid_from ? w.w.size() - w.valid_from : 0;
}

}  // namespace detail

/// Solves the 2-D Yule-Walker system over the given region of support.
/// A nearly singular moment matrix is retried once with a small ridge.
inline ArModel2D fit_yule_walker(const ResidualField& w, const NshpRegion& region,
                                 const RosLagSet& ros) {
    const AutocovTable t = sample_autocov(w, region, ros.p, 2 * ros.q);
    const double g00 = t.at(0, 0);
    const int m = static_cast<int>(ros.size());

    Eigen::MatrixXd a(m, m);
    Eigen::VectorXd rhs(m);
    for (int r = 0; r < m; ++r) {
        rhs(r) = t.at(ros.lags[r].t1, ros.lags[r].t2);
        for (int c = 0; c < m; ++c) {
            const Coord d = ros.lags[r] - ros.lags[c];
            a(r, c) = t.at(d.t1, d.t2);
        }
    }

    const double scale = std::max(std::abs(g00), std::numeric_limits<double>::min());
    Eigen::VectorXd beta = a.ldlt().solve(rhs);
    double resid = (a * beta - rhs).cwiseAbs().maxCoeff();
    if (!beta.allFinite() || resid > 1e-8 * scale) {
        Eigen::MatrixXd ridged = a;
        ridged.diagonal().array() += 1e-8 * g00;
        beta = ridged.ldlt().solve(rhs);
        resid = (ridged * beta - rhs).cwiseAbs().maxCoeff();
        if (!beta.allFinite() || resid > 1e-6 * scale) {
            throw FitError("fit_yule_walker: singular moment matrix");
        }
    }

    double sigma2 = g00 - beta.dot(rhs);
    sigma2 = std::max(sigma2, 1e-10 * g00);
    if (!(sigma2 > 0.0)) {
        throw FitError("fit_yule_walker: nonpositive innovation variance");
    }

    ArModel2D model{ros, std::vector<double>(beta.data(), beta.data() + m), sigma2};
    return model;
}

struct OrderSelection {
    int p = 0;
    int q = 0;
    ArModel2D model;
    double score = std::numeric_limits<double>::infinity();
};

inline OrderSelection select_order(const ResidualField& w, const NshpRegion& region,
                                   int p_max, int q_max, OrderCriterion criterion) {
    if (p_max < 0 || q_max < 0 || (p_max == 0 && q_max == 0)) {
        throw EmptyModelError("select_order: no admissible (p,q)");
    }
    const double n = static_cast<double>(detail::valid_count(w));
    const double penalty = criterion == OrderCriterion::AIC ? 2.0 : std::log(n);

    OrderSelection best;
    bool any = false;
    std::string last_err = "no candidate fit";
    for (int p = 0; p <= p_max; ++p) {
        for (int q = 0; q <= q_max; ++q) {
            if (p == 0 && q == 0) continue;
            ArModel2D model;
            try {
                model = fit_yule_walker(w, region, ros_lags(p, q));
            } catch (const Error& e) {
                last_err = e.what();
                continue;
            }
            const double nlags = static_cast<double>(model.ros.size());
            const double score = n * std::log(model.sigma2) + penalty * nlags;
            const bool better =
                !any || score < best.score ||
                (score == best.score &&
                 (model.ros.size() < best.model.ros.size() ||
                  (model.ros.size() == best.model.ros.size() && p < best.p)));
            if (better) {
                best = OrderSelection{p, q, std::move(model), score};
                any = true;
            }
        }
    }
    if (!any) throw FitError("select_order: all candidate fits failed: " + last_err);
    return best;
}

/// One-step AR prediction sum(beta_jk * w[target - (j,k)]).
inline double predict_next(const ArModel2D& model, const ResidualField& w,
                           const NshpRegion& region, const Coord& target) {
    double acc = 0.0;
    for (std::size_t i = 0; i < model.ros.size(); ++i) {
        const Coord c = target - model.ros.lags[i];
        if (!region.contains(c)) {
            throw BoundsError("predict_next: lagged value at " + to_string(c) +
                              " not observed");
        }
        acc += model.beta[i] * w.w[region.index_of(c)];
    }
    return acc;
}

// ---------------------------------------------------------------------------
// model-implied autocovariance via the spectral density

namespace detail {

inline void fft2_inplace(std::vector<std::complex<double>>& a, int m, bool inverse) {
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> line(m), out(m);
    for (int r = 0; r < m; ++r) {
        std::copy(a.begin() + static_cast<std::ptrdiff_t>(r) * m,
                  a.begin() + static_cast<std::ptrdiff_t>(r + 1) * m, line.begin());
        if (inverse) fft.inv(out, line); else fft.fwd(out, line);
        std::copy(out.begin(), out.end(), a.begin() + static_cast<std::ptrdiff_t>(r) * m);
    }
    for (int c = 0; c < m; ++c) {
        for (int r = 0; r < m; ++r) line[r] = a[static_cast<std::size_t>(r) * m + c];
        if (inverse) fft.inv(out, line); else fft.fwd(out, line);
        for (int r = 0; r < m; ++r) a[static_cast<std::size_t>(r) * m + c] = out[r];
    }
}

}  // namespace detail

/// Autocovariances implied by a stable AR model, for |k| <= khw and
/// |l| <= lhw: the spectral density sigma2 / |1 - sum beta e^{-i(j w1 + k w2)}|^2
/// is evaluated on an M x M grid (M a power of two >= 8 max(khw, lhw))
/// and inverted by 2-D FFT.
inline AutocovTable model_autocov(const ArModel2D& model, int khw, int lhw) {
    if (!(model.sigma2 > 0.0)) throw DomainError("model_autocov: sigma2 must be > 0");
    int extent = std::max(khw, lhw);
    for (const Coord& lag : model.ros.lags) {
        extent = std::max({extent, std::abs(lag.t1), std::abs(lag.t2)});
    }
    int m = 64;
    while (m < 8 * std::max(extent, 1)) m <<= 1;

    std::vector<std::complex<double>> grid(static_cast<std::size_t>(m) * m,
                                           std::complex<double>(0.0, 0.0));
    grid[0] = 1.0;
    for (std::size_t i = 0; i < model.ros.size(); ++i) {
        const int r = ((model.ros.lags[i].t1 % m) + m) % m;
        const int c = ((model.ros.lags[i].t2 % m) + m) % m;
        grid[static_cast<std::size_t>(r) * m + c] -= model.beta[i];
    }
    detail::fft2_inplace(grid, m, false);

    double fmin = std::numeric_limits<double>::infinity();
    double fsum = 0.0;
    for (auto& v : grid) {
        const double a2 = std::norm(v);
        const double f = model.sigma2 / a2;
        if (!std::isfinite(f)) {
            throw InstabilityError("model_autocov: nonfinite spectral density");
        }
        fmin = std::min(fmin, f);
        fsum += f;
        v = f;
    }
    const double fmean = fsum / static_cast<double>(grid.size());
    if (!(fmin > 1e-8 * fmean)) {
        throw InstabilityError("model_autocov: spectral density too close to zero");
    }

    detail::fft2_inplace(grid, m, true);

    double max_imag = 0.0;
    for (const auto& v : grid) max_imag = std::max(max_imag, std::abs(v.imag()));
    const double g00 = grid[0].real();
    if (!(max_imag <= 1e-10 * std::max(std::abs(g00), 1.0))) {
        throw InstabilityError("model_autocov: imaginary residue in FFT inversion");
    }

    AutocovTable t = AutocovTable::zeros(khw, lhw);
    for (int k = -khw; k <= khw; ++k) {
        for (int l = -lhw; l <= lhw; ++l) {
            const int r = ((k % m) + m) % m;
            const int c = ((l % m) + m) % m;
            const int rm = (((-k) % m) + m) % m;
            const int cm = (((-l) % m) + m) % m;
            t.ref(k, l) = 0.5 * (grid[static_cast<std::size_t>(r) * m + c].real() +
                                 grid[static_cast<std::size_t>(rm) * m + cm].real());
        }
    }
    return t;
}

// ---------------------------------------------------------------------------
// covariance matrices over an ordering

namespace detail {

inline void coord_spans(std::span<const Coord> pts, int& d1, int& d2) {
    int min1 = 0, max1 = 0, min2 = 0, max2 = 0;
    bool first = true;
    for (const Coord& c : pts) {
        if (first) {
            min1 = max1 = c.t1;
            min2 = max2 = c.t2;
            first = false;
        } else {
            min1 = std::min(min1, c.t1);
            max1 = std::max(max1, c.t1);
            min2 = std::min(min2, c.t2);
            max2 = std::max(max2, c.t2);
        }
    }
    d1 = max1 - min1;
    d2 = max2 - min2;
}

/// Correlation table gamma(.)/gamma(0,0) wide enough for every pairwise
/// lag among `pts`.
inline AutocovTable model_corr_table(const ArModel2D& model, std::span<const Coord> pts) {
    int d1 = 0, d2 = 0;
    coord_spans(pts, d1, d2);
    AutocovTable t = model_autocov(model, d1, d2);
    const double g00 = t.at(0, 0);
    if (!(g00 > 0.0)) throw InstabilityError("model_corr_table: gamma(0,0) <= 0");
    for (double& v : t.g) v /= g00;
    return t;
}

inline void fill_corr_matrix(const AutocovTable& corr, std::span<const Coord> ordering,
                             Eigen::MatrixXd& out) {
    const int n = static_cast<int>(ordering.size());
    out.resize(n, n);
    for (int i = 0; i < n; ++i) {
        out(i, i) = 1.0;
        for (int j = 0; j < i; ++j) {
            const Coord d = ordering[i] - ordering[j];
            const double v = corr.at(d.t1, d.t2);
            out(i, j) = v;
            out(j, i) = v;
        }
    }
}

/// In-place Cholesky with escalating diagonal jitter; `fill` rebuilds the
/// matrix for each retry.
inline CholFactor chol_with_jitter(const std::function<void(Eigen::MatrixXd&)>& fill) {
    CholFactor f;
    double delta = 0.0;
    for (;;) {
        fill(f.lower);
        if (delta > 0.0) f.lower.diagonal().array() += delta;
        Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(f.lower);
        if (llt.info() == Eigen::Success) {
            f.lower.triangularView<Eigen::StrictlyUpper>().setZero();
            f.jitter = delta;
            return f;
        }
        delta = delta == 0.0 ? 1e-10 : 2.0 * delta;
        if (delta > 1e-4) {
            throw NotPositiveDefiniteError(
                "cholesky: jitter cap exceeded (delta > 1e-4)");
        }
    }
}

}  // namespace detail

inline CholFactor chol_factor(const ArModel2D& model, std::span<const Coord> ordering) {
    const AutocovTable corr = detail::model_corr_table(model, ordering);
    return detail::chol_with_jitter([&](Eigen::MatrixXd& out) {
        detail::fill_corr_matrix(corr, ordering, out);
    });
}

inline CholFactor chol_factor(const Eigen::MatrixXd& mat) {
    return detail::chol_with_jitter([&](Eigen::MatrixXd& out) { out = mat; });
}

/// Model-implied correlation matrix over the ordering, diagonal jittered
/// just enough for the Cholesky factorization to succeed.
inline CovMatrix build_cov_matrix(const ArModel2D& model, std::span<const Coord> ordering) {
    const AutocovTable corr = detail::model_corr_table(model, ordering);
    CovMatrix cov;
    cov.ordering.assign(ordering.begin(), ordering.end());
    detail::fill_corr_matrix(corr, ordering, cov.mat);
    const CholFactor f = detail::chol_with_jitter([&](Eigen::MatrixXd& out) {
        detail::fill_corr_matrix(corr, ordering, out);
    });
    cov.jitter = f.jitter;
    if (f.jitter > 0.0) cov.mat.diagonal().array() += f.jitter;
    return cov;
}

inline Eigen::VectorXd last_row(const CholFactor& f) {
    return f.lower.row(f.lower.rows() - 1);
}

/// Last row of the Cholesky factor of the one-step extension
/// [[G, cross], [cross', diag]] of an already factored matrix G.
inline Eigen::VectorXd extend_last_row(const CholFactor& f, const Eigen::VectorXd& cross,
                                       double diag) {
    const Eigen::Index n = f.lower.rows();
    if (cross.size() != n) throw DomainError("extend_last_row: size mismatch");
    Eigen::VectorXd out(n + 1);
    out.head(n) = f.lower.triangularView<Eigen::Lower>().solve(cross);
    const double rest = diag + f.jitter - out.head(n).squaredNorm();
    if (!(rest > 0.0)) {
        throw NotPositiveDefiniteError("extend_last_row: extension not positive definite");
    }
    out(n) = std::sqrt(rest);
    return out;
}

// ---------------------------------------------------------------------------
// flat text serialization

inline std::string to_text(const ArModel2D& model) {
    std::ostringstream out;
    out.precision(17);
    out << "ar2d " << model.ros.p << " " << model.ros.q << "\n";
    for (std::size_t i = 0; i < model.ros.size(); ++i) {
        out << model.ros.lags[i].t1 << " " << model.ros.lags[i].t2 << " "
            << model.beta[i] << "\n";
    }
    out << "sigma2 " << model.sigma2 << "\n";
    return out.str();
}

inline ArModel2D parse_ar_model(const std::string& text) {
    std::istringstream in(text);
    std::string tag;
    int p = 0, q = 0;
    if (!(in >> tag >> p >> q) || tag != "ar2d") {
        throw IoError("parse_ar_model: bad header");
    }
    ArModel2D model{ros_lags(p, q), {}, 0.0};
    model.beta.resize(model.ros.size());
    for (std::size_t i = 0; i < model.ros.size(); ++i) {
        int j = 0, k = 0;
        double b = 0.0;
        if (!(in >> j >> k >> b) || Coord{j, k} != model.ros.lags[i]) {
            throw IoError("parse_ar_model: lag list mismatch");
        }
        model.beta[i] = b;
    }
    if (!(in >> tag >> model.sigma2) || tag != "sigma2" || !(model.sigma2 > 0.0)) {
        throw IoError("parse_ar_model: bad sigma2");
    }
    return model;
}

}  // namespace lsrf
