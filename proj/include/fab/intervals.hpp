#pragma once

// Interval procedures: direct (z and t), Bayes, empirical Bayes, FAB z and
// FAB t, plus the analytic credible-interval coverage curve and the expected
// width-ratio curve.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "domain.hpp"
#include "estimation.hpp"
#include "numerics/quadrature.hpp"
#include "numerics/roots.hpp"
#include "numerics/special.hpp"

namespace fab {

// ---------------------------------------------------------------------------
// Spending function g and its inverse

// g(w) = Phi^-1(alpha w) - Phi^-1(alpha (1 - w)); strictly increasing on
// [0, 1] with g(1/2) = 0 and infinite limits at the ends.
inline double g(double omega, double alpha) {
    if (!(omega >= 0.0 && omega <= 1.0)) throw std::invalid_argument("g: omega outside [0,1]");
    if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("g: alpha outside (0,0.5)");
    return num::norm_quantile(alpha * omega) - num::norm_quantile(alpha * (1.0 - omega));
}

inline double g_inverse(double x, double alpha) {
    if (!(alpha > 0.0 && alpha < 0.5))
        throw std::invalid_argument("g_inverse: alpha outside (0,0.5)");
    if (x == 0.0) return 0.5;
    if (std::isinf(x)) return x > 0.0 ? 1.0 : 0.0;
    constexpr double eps = 1e-15;
    if (g(eps, alpha) >= x) return eps;
    if (g(1.0 - eps, alpha) <= x) return 1.0 - eps;
    num::RootOptions ro;
    ro.x_tol = 1e-14;
    return num::find_root([&](double w) { return g(w, alpha) - x; }, {eps, 1.0 - eps}, ro);
}

// ---------------------------------------------------------------------------
// Spending-function object

struct SpendingFunction {
    enum class Kind { ConstantHalf, ClosedFormZ, TabulatedT };
    Kind kind = Kind::ConstantHalf;
    double mu = 0.0, tau2 = 1.0, sigma = 1.0, alpha = 0.05;  // ClosedFormZ
    std::vector<double> theta_grid, w_grid;                  // TabulatedT

    static SpendingFunction constant_half() { return SpendingFunction{}; }

    static SpendingFunction closed_form_z(double mu, double tau2, double sigma, double alpha) {
        if (!(tau2 > 0.0) || !(sigma > 0.0))
            throw std::invalid_argument("closed_form_z: tau2 and sigma must be positive");
        SpendingFunction s;
        s.kind = Kind::ClosedFormZ;
        s.mu = mu;
        s.tau2 = tau2;
        s.sigma = sigma;
        s.alpha = alpha;
        return s;
    }

    static SpendingFunction tabulated_t(std::vector<double> theta_grid,
                                        std::vector<double> w_grid, double alpha) {
        if (theta_grid.size() != w_grid.size() || theta_grid.size() < 2)
            throw std::invalid_argument("tabulated_t: grids must match and have >= 2 points");
        for (std::size_t i = 1; i < theta_grid.size(); ++i) {
            if (!(theta_grid[i] > theta_grid[i - 1]))
                throw std::invalid_argument("tabulated_t: theta grid must be strictly increasing");
            if (w_grid[i] < w_grid[i - 1])
                throw std::invalid_argument("tabulated_t: w grid must be nondecreasing");
        }
        for (double w : w_grid)
            if (!(w >= 0.0 && w <= 1.0))
                throw std::invalid_argument("tabulated_t: w values outside [0,1]");
        SpendingFunction s;
        s.kind = Kind::TabulatedT;
        s.theta_grid = std::move(theta_grid);
        s.w_grid = std::move(w_grid);
        s.alpha = alpha;
        return s;
    }

    double operator()(double theta) const {
        switch (kind) {
            case Kind::ConstantHalf:
                return 0.5;
            case Kind::ClosedFormZ:
                return g_inverse(2.0 * sigma * (theta - mu) / tau2, alpha);
            case Kind::TabulatedT: {
                if (theta <= theta_grid.front()) return w_grid.front();
                if (theta >= theta_grid.back()) return w_grid.back();
                auto it = std::upper_bound(theta_grid.begin(), theta_grid.end(), theta);
                std::size_t i = static_cast<std::size_t>(it - theta_grid.begin());
                double t = (theta - theta_grid[i - 1]) / (theta_grid[i] - theta_grid[i - 1]);
                return w_grid[i - 1] + t * (w_grid[i] - w_grid[i - 1]);
            }
        }
        return 0.5;
    }
};

inline SpendingFunction optimal_s_z(double mu, double tau2, double sigma, double alpha) {
    return SpendingFunction::closed_form_z(mu, tau2, sigma, alpha);
}

// ---------------------------------------------------------------------------
// Direct and Bayes intervals

inline Interval direct_interval(double y, double sigma, double alpha) {
    if (!(sigma > 0.0)) throw std::invalid_argument("direct_interval: sigma must be positive");
    double h = sigma * num::norm_quantile(1.0 - 0.5 * alpha);
    return Interval{y - h, y + h, alpha, Method::Direct};
}

inline Interval direct_t_interval(double y, double sigma_hat, int q, double alpha) {
    if (!(sigma_hat > 0.0)) throw std::invalid_argument("direct_t_interval: sigma_hat <= 0");
    if (q < 1) throw std::invalid_argument("direct_t_interval: q must be >= 1");
    double h = sigma_hat * num::t_quantile(1.0 - 0.5 * alpha, q);
    return Interval{y - h, y + h, alpha, Method::Direct};
}

inline NormalPrior bayes_posterior(double y, double sigma2, double mu, double tau2) {
    if (!(sigma2 > 0.0) || !(tau2 > 0.0))
        throw std::invalid_argument("bayes_posterior: variances must be positive");
    if (std::isinf(tau2)) return NormalPrior{y, sigma2};
    double v = sigma2 * tau2 / (sigma2 + tau2);
    double m = (tau2 * y + sigma2 * mu) / (sigma2 + tau2);
    return NormalPrior{m, v};
}

inline Interval bayes_interval(double y, double sigma2, const NormalPrior& prior, double alpha) {
    NormalPrior post = bayes_posterior(y, sigma2, prior.mu, prior.tau2);
    double h = std::sqrt(post.tau2) * num::norm_quantile(1.0 - 0.5 * alpha);
    return Interval{post.mu - h, post.mu + h, alpha, Method::Bayes};
}

// Frequentist coverage of the Bayes credible interval at a fixed deviation
// delta = theta - x'beta:
//   Phi(sigma delta / tau2 + z_{1-a/2} sqrt(1 + sigma^2/tau2))
//     - Phi(sigma delta / tau2 + z_{a/2} sqrt(1 + sigma^2/tau2))
inline double credible_coverage(double delta, double sigma, double tau2, double alpha) {
    if (!(sigma > 0.0) || !(tau2 > 0.0))
        throw std::invalid_argument("credible_coverage: sigma and tau2 must be positive");
    double shift = sigma * delta / tau2;
    double scale = std::sqrt(1.0 + sigma * sigma / tau2);
    double zhi = num::norm_quantile(1.0 - 0.5 * alpha);
    double zlo = num::norm_quantile(0.5 * alpha);
    return num::norm_cdf(shift + zhi * scale) - num::norm_cdf(shift + zlo * scale);
}

// ---------------------------------------------------------------------------
// FAB z-interval

// The endpoints satisfy theta = y + sigma z_{alpha(1-s(theta))} (lower) and
// theta = y + sigma z_{1 - alpha s(theta)} (upper).  The upper equation is
// solved in theta through the tail probabilities,
//   Phi((y - theta)/sigma) = alpha s(theta),
// which stays fully precise when the spending function saturates (both sides
// are small tail masses rather than complements of 1).  The residual is
// strictly decreasing in theta, so a geometric expansion always brackets the
// root.  The lower endpoint follows from the reflection symmetry
// lower(y, mu) = -upper(-y, -mu), which maps its defining equation onto the
// upper one exactly.
namespace detail {

inline double fab_z_upper(double y, double sigma, double mu, double tau2, double alpha) {
    auto resid = [&](double theta) {
        double s = std::isinf(tau2) ? 0.5 : g_inverse(2.0 * sigma * (theta - mu) / tau2, alpha);
        return num::norm_cdf((y - theta) / sigma) - alpha * s;
    };
    // resid(y) = 1/2 - alpha s(y) > 0; expand until the residual turns negative
    double lo = y;
    double step = sigma * num::norm_quantile(1.0 - 0.5 * alpha);
    double hi = y + step;
    while (resid(hi) > 0.0) {
        lo = hi;
        step *= 2.0;
        hi = y + step;
        if (step > 1e12 * sigma)
            throw std::runtime_error("fab_z_interval: upper endpoint bracket failed");
    }
    num::RootOptions ro;
    ro.x_tol = 1e-11 * sigma;
    return num::find_root(resid, {lo, hi}, ro);
}

}  // namespace detail

inline Interval fab_z_interval(double y, double sigma, const NormalPrior& prior, double alpha) {
    if (!(sigma > 0.0)) throw std::invalid_argument("fab_z_interval: sigma must be positive");
    if (!(alpha > 0.0 && alpha < 0.5))
        throw std::invalid_argument("fab_z_interval: alpha outside (0,0.5)");
    prior.validate();
    double upper = detail::fab_z_upper(y, sigma, prior.mu, prior.tau2, alpha);
    double lower = -detail::fab_z_upper(-y, sigma, -prior.mu, prior.tau2, alpha);
    return Interval{lower, upper, alpha, Method::FABz};
}

// Membership test without endpoint root finding — the hot path of the
// coverage simulations.  theta is inside the FAB z-interval iff
// alpha (1 - s(theta)) < Phi((theta - y)/sigma) < 1 - alpha s(theta).
inline bool fab_z_contains(double theta, double y, double sigma, const NormalPrior& prior,
                           double alpha) {
    double w = g_inverse(2.0 * sigma * (theta - prior.mu) / prior.tau2, alpha);
    double u = num::norm_cdf((theta - y) / sigma);
    return u > alpha * (1.0 - w) && u < 1.0 - alpha * w;
}

// ---------------------------------------------------------------------------
// Empirical Bayes intervals

struct EbOptions {
    FitMethod fit_method = FitMethod::REML;
    // Inflate the plug-in conditional variance with the second-order MSE
    // terms for beta- and variance-parameter estimation (g1 + g2 + 2 g3).
    bool second_order = true;
};

inline std::vector<Interval> eb_interval(const AreaTable& table, const LinkingSpec& spec,
                                         double alpha, const EbOptions& opts = {}) {
    table.validate();
    Eigen::MatrixXd X = table.design(spec);
    Eigen::VectorXd D = table.sampling_variances();
    Eigen::MatrixXd W = table.W ? *table.W : Eigen::MatrixXd();
    FitOptions fo;
    fo.method = opts.fit_method;
    FitReport fit = fit_ml(table.y(), X, W, D, spec, fo);
    if (!fit.converged) throw std::runtime_error("eb_interval: full-table fit did not converge");

    Eigen::Matrix2d info_inv = Eigen::Matrix2d::Zero();
    if (opts.second_order) {
        Eigen::Matrix2d info;
        if (spec.spatial()) {
            info = fisher_info(fit.psi.tau2, fit.psi.rho, W, D);
        } else {
            info.setZero();
            info(0, 0) = fisher_info(fit.psi.tau2, 0.0, Eigen::MatrixXd(), D)(0, 0);
            info(1, 1) = 1.0;
        }
        info_inv = info.inverse();
        if (!spec.spatial()) {
            info_inv(0, 1) = info_inv(1, 0) = info_inv(1, 1) = 0.0;
        }
    }

    EbMoments mo = eb_moments(fit.psi, table.y(), X, W, D, spec.spatial(), info_inv);
    double z = num::norm_quantile(1.0 - 0.5 * alpha);
    std::vector<Interval> out;
    out.reserve(table.size());
    for (int j = 0; j < table.size(); ++j) {
        double sd = std::sqrt(opts.second_order ? mo.mse[j] : mo.naive_var[j]);
        out.push_back(Interval{mo.center[j] - z * sd, mo.center[j] + z * sd, alpha, Method::EB});
    }
    return out;
}

// ---------------------------------------------------------------------------
// FAB t-interval

namespace detail {

// Quadrature representation of the joint distribution of (sigma^2, sigma_hat^2)
// induced by 1/sigma^2 ~ Gamma(shape, rate) and q sigma_hat^2 / sigma^2 ~ chi^2_q.
struct TPredictive {
    std::vector<double> sigma2, w_sigma2;
    std::vector<double> ratio, w_ratio;  // sigma_hat^2 / sigma^2 nodes

    TPredictive(const PrecisionPrior& prec, int q, int n_sigma = 24, int n_chi = 12) {
        num::GaussLegendre gs = num::gauss_legendre_01(n_sigma);
        sigma2.resize(n_sigma);
        w_sigma2 = gs.weight;
        for (int i = 0; i < n_sigma; ++i)
            sigma2[i] = 1.0 / num::gamma_quantile(gs.node[i], prec.shape, prec.rate);
        num::GaussLegendre gc = num::gauss_legendre_01(n_chi);
        ratio.resize(n_chi);
        w_ratio = gc.weight;
        for (int k = 0; k < n_chi; ++k)
            ratio[k] = num::chi2_quantile(gc.node[k], q) / static_cast<double>(q);
    }
};

// Prior-predictive probability that the t-acceptance region at spending value
// w contains theta.  Minimizing this over w gives the shortest-on-average
// valid interval (Pratt-type pointwise optimization).
inline double t_acceptance_prob(double w, double theta, const NormalPrior& prior, int q,
                                double alpha, const TPredictive& pred) {
    double tl = num::t_quantile(alpha * (1.0 - w), q);
    double tu = num::t_quantile(1.0 - alpha * w, q);
    double p = 0.0;
    for (std::size_t i = 0; i < pred.sigma2.size(); ++i) {
        double s2 = pred.sigma2[i];
        double sd = std::sqrt(prior.tau2 + s2);
        double inner = 0.0;
        for (std::size_t k = 0; k < pred.ratio.size(); ++k) {
            double shat = std::sqrt(s2 * pred.ratio[k]);
            inner += pred.w_ratio[k] * (num::norm_cdf((theta - shat * tl - prior.mu) / sd) -
                                        num::norm_cdf((theta - shat * tu - prior.mu) / sd));
        }
        p += pred.w_sigma2[i] * inner;
    }
    return p;
}

inline double golden_min_w(const std::function<double(double)>& f, double tol = 1e-6) {
    constexpr double invphi = 0.6180339887498949;
    double a = 1e-9, b = 1.0 - 1e-9;
    double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > tol) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = f(x2);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace detail

inline double optimal_w_t(double theta, const NormalPrior& prior, const PrecisionPrior& prec,
                          int q, double alpha) {
    prior.validate();
    if (q < 1) throw std::invalid_argument("optimal_w_t: q must be >= 1");
    try {
        detail::TPredictive pred(prec, q);
        return detail::golden_min_w([&](double w) {
            return detail::t_acceptance_prob(w, theta, prior, q, alpha, pred);
        });
    } catch (const std::exception&) {
        return 0.5;  // valid but suboptimal fallback
    }
}

// Tabulated optimal spending function for the t-interval: 81 grid points over
// mu +/- 8 max(tau, sigma_hat t_{1-alpha/2,q}), monotone-projected.
inline SpendingFunction tabulate_w_t(const NormalPrior& prior, const PrecisionPrior& prec,
                                     double sigma_hat, int q, double alpha) {
    const int n = 81;
    double span = 8.0 * std::max(std::sqrt(prior.tau2),
                                 sigma_hat * num::t_quantile(1.0 - 0.5 * alpha, q));
    if (!std::isfinite(span) || span <= 0.0) span = 8.0;
    std::vector<double> tg(n), wg(n);
    std::optional<detail::TPredictive> pred;
    try {
        pred.emplace(prec, q);
    } catch (const std::exception&) {
        // fall back to w = 1/2 everywhere: valid, merely suboptimal
    }
    for (int i = 0; i < n; ++i) {
        tg[i] = prior.mu - span + 2.0 * span * i / (n - 1);
        if (!pred) {
            wg[i] = 0.5;
        } else {
            wg[i] = detail::golden_min_w([&](double w) {
                return detail::t_acceptance_prob(w, tg[i], prior, q, alpha, *pred);
            });
        }
    }
    // running-maximum projection keeps the tabulation nondecreasing, which the
    // validity argument requires
    for (int i = 1; i < n; ++i) wg[i] = std::max(wg[i], wg[i - 1]);
    return SpendingFunction::tabulated_t(std::move(tg), std::move(wg), alpha);
}

inline Interval fab_t_interval(double y, double sigma_hat, int q, const NormalPrior& prior,
                               const PrecisionPrior& prec, double alpha) {
    if (!(sigma_hat > 0.0)) throw std::invalid_argument("fab_t_interval: sigma_hat <= 0");
    if (q < 1) throw std::invalid_argument("fab_t_interval: q must be >= 1");
    if (!(alpha > 0.0 && alpha < 0.5))
        throw std::invalid_argument("fab_t_interval: alpha outside (0,0.5)");

    SpendingFunction w = tabulate_w_t(prior, prec, sigma_hat, q, alpha);

    auto f_lower = [&](double theta) {
        return theta - y - sigma_hat * num::t_quantile(alpha * (1.0 - w(theta)), q);
    };
    auto f_upper = [&](double theta) {
        return theta - y - sigma_hat * num::t_quantile(1.0 - alpha * w(theta), q);
    };

    num::RootOptions ro;
    ro.x_tol = 1e-10 * std::max(1.0, sigma_hat);
    double t975 = num::t_quantile(1.0 - 0.5 * alpha, q);

    // f_lower(y) > 0 and f_upper(y) < 0 for alpha < 0.5, so expand outward
    double step = sigma_hat * t975;
    double lo = y - 2.0 * step;
    for (int k = 0; k < 200 && f_lower(lo) > 0.0; ++k) lo -= step * std::pow(1.5, k);
    double lower = num::find_root(f_lower, {lo, y}, ro);

    double hi = y + 2.0 * step;
    for (int k = 0; k < 200 && f_upper(hi) < 0.0; ++k) hi += step * std::pow(1.5, k);
    double upper = num::find_root(f_upper, {y, hi}, ro);

    return Interval{lower, upper, alpha, Method::FABt};
}

// ---------------------------------------------------------------------------
// Expected width ratio of the FAB z-interval vs the direct interval

inline double expected_width_ratio_z(double tau2_over_sigma2, double alpha) {
    if (!(tau2_over_sigma2 > 0.0))
        throw std::invalid_argument("expected_width_ratio_z: ratio must be positive");
    NormalPrior prior{0.0, tau2_over_sigma2};  // sigma = 1, mu = 0 wlog
    double sd = std::sqrt(1.0 + tau2_over_sigma2);
    auto integrand = [&](double y) {
        Interval ci = fab_z_interval(y, 1.0, prior, alpha);
        return ci.width() * num::norm_pdf(y / sd) / sd;
    };
    num::QuadOptions qo;
    qo.tol = 1e-7;
    double ew = num::integrate(integrand, -10.0 * sd, 10.0 * sd, qo);
    return ew / (2.0 * num::norm_quantile(1.0 - 0.5 * alpha));
}

}  // namespace fab
