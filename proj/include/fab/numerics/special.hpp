#pragma once

// Special functions and distribution kernels: normal, Student-t, chi-square
// and gamma CDF/quantile pairs, digamma/trigamma.  Everything here is a pure
// function of its arguments and safe to call from multiple threads.

#include <cmath>
#include <limits>
#include <stdexcept>

#include "roots.hpp"

namespace fab::num {

inline constexpr double inf = std::numeric_limits<double>::infinity();
inline constexpr double nan = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Standard normal

inline double norm_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014326779399461;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double norm_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.7071067811865475244008444);
}

// Quantile of the standard normal.  Acklam's rational approximation refined
// by one Halley step on erfc, giving ~1e-15 absolute accuracy.  p in {0,1}
// maps to the signed infinity sentinel rather than throwing: the spending
// machinery legitimately evaluates quantiles at the ends of [0,1].
inline double norm_quantile(double p) {
    if (std::isnan(p) || p < 0.0 || p > 1.0)
        throw std::domain_error("norm_quantile: p outside [0,1]");
    if (p == 0.0) return -inf;
    if (p == 1.0) return inf;

    static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley refinement against the erfc-based CDF.
    double e = norm_cdf(x) - p;
    double u = e / norm_pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

// ---------------------------------------------------------------------------
// Log-gamma, digamma, trigamma

inline double log_gamma(double x) { return std::lgamma(x); }

inline double digamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("digamma: requires x > 0");
    double result = 0.0;
    while (x < 10.0) {  // recurrence up to the asymptotic region
        result -= 1.0 / x;
        x += 1.0;
    }
    double inv = 1.0 / x, inv2 = inv * inv;
    result += std::log(x) - 0.5 * inv -
              inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 -
                      inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    return result;
}

inline double trigamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("trigamma: requires x > 0");
    double result = 0.0;
    while (x < 10.0) {
        result += 1.0 / (x * x);
        x += 1.0;
    }
    double inv = 1.0 / x, inv2 = inv * inv;
    result += inv * (1.0 + 0.5 * inv +
                     inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 -
                             inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0))))));
    return result;
}

// ---------------------------------------------------------------------------
// Regularized incomplete beta (for the t distribution)

namespace detail {

// Continued fraction for I_x(a,b), modified Lentz.
inline double beta_cf(double a, double b, double x) {
    const double tiny = 1e-300, eps = 1e-15;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace detail

inline double inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double lbeta = log_gamma(a) + log_gamma(b) - log_gamma(a + b);
    double front = std::exp(a * std::log(x) + b * std::log1p(-x) - lbeta);
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * detail::beta_cf(a, b, x) / a;
    return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

// ---------------------------------------------------------------------------
// Student-t

inline double t_cdf(double x, double dof) {
    if (!(dof > 0.0)) throw std::domain_error("t_cdf: requires dof > 0");
    if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
    double p = 0.5 * inc_beta(0.5 * dof, 0.5, dof / (dof + x * x));
    return x > 0.0 ? 1.0 - p : p;
}

inline double t_pdf(double x, double dof) {
    double lc = log_gamma(0.5 * (dof + 1.0)) - log_gamma(0.5 * dof) -
                0.5 * std::log(dof * 3.14159265358979323846);
    return std::exp(lc - 0.5 * (dof + 1.0) * std::log1p(x * x / dof));
}

inline double t_quantile(double p, double dof) {
    if (!(dof > 0.0)) throw std::domain_error("t_quantile: requires dof > 0");
    if (std::isnan(p) || p < 0.0 || p > 1.0)
        throw std::domain_error("t_quantile: p outside [0,1]");
    if (p == 0.0) return -inf;
    if (p == 1.0) return inf;
    if (p == 0.5) return 0.0;
    if (p > 0.5) return -t_quantile(1.0 - p, dof);
    // p in (0, 1/2): bracket the root in x < 0 from a normal-based start,
    // expanding the lower edge geometrically for heavy tails, then solve.
    double hi = 0.0;
    double lo = norm_quantile(p);
    if (dof < 10.0) lo *= std::sqrt(dof / std::max(dof - 2.0, 0.5));
    while (t_cdf(lo, dof) > p) {
        hi = lo;
        lo *= 4.0;
        if (lo < -1e300) break;
    }
    auto f = [p, dof](double x) { return t_cdf(x, dof) - p; };
    RootOptions opts;
    opts.x_tol = 1e-13 * (1.0 + std::fabs(lo));
    return find_root(f, Bracket{lo, hi}, opts);
}

// ---------------------------------------------------------------------------
// Regularized incomplete gamma and the gamma/chi-square quantiles

inline double inc_gamma_p(double a, double x) {
    if (!(a > 0.0)) throw std::domain_error("inc_gamma_p: requires a > 0");
    if (x <= 0.0) return 0.0;
    if (x < a + 1.0) {
        // series
        double ap = a, sum = 1.0 / a, del = sum;
        for (int n = 0; n < 500; ++n) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
        }
        return sum * std::exp(-x + a * std::log(x) - log_gamma(a));
    }
    // continued fraction for Q, Lentz
    const double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16) break;
    }
    return 1.0 - std::exp(-x + a * std::log(x) - log_gamma(a)) * h;
}

// Quantile of Gamma(shape, rate).  Wilson-Hilferty start, safeguarded Newton.
inline double gamma_quantile(double p, double shape, double rate) {
    if (!(shape > 0.0) || !(rate > 0.0))
        throw std::domain_error("gamma_quantile: requires shape, rate > 0");
    if (std::isnan(p) || p < 0.0 || p > 1.0)
        throw std::domain_error("gamma_quantile: p outside [0,1]");
    if (p == 0.0) return 0.0;
    if (p == 1.0) return inf;
    double z = norm_quantile(p);
    double t = 1.0 - 1.0 / (9.0 * shape) + z / (3.0 * std::sqrt(shape));
    double x = shape * t * t * t;  // Wilson-Hilferty, in rate-1 units
    if (!(x > 0.0)) x = shape * std::exp(z / std::sqrt(shape)) * 0.5;
    double lo = 0.0, hi = inf;
    for (int it = 0; it < 100; ++it) {
        double f = inc_gamma_p(shape, x) - p;
        if (f > 0.0) hi = std::min(hi, x); else lo = std::max(lo, x);
        double pdf = std::exp((shape - 1.0) * std::log(x) - x - log_gamma(shape));
        double xn = x - f / std::max(pdf, 1e-300);
        if (!(xn > lo && xn < hi)) xn = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * x;
        if (std::fabs(xn - x) < 1e-14 * (1.0 + std::fabs(xn))) { x = xn; break; }
        x = xn;
    }
    return x / rate;
}

inline double chi2_quantile(double p, double dof) {
    return gamma_quantile(p, 0.5 * dof, 0.5);
}

inline double gamma_cdf(double x, double shape, double rate) {
    return inc_gamma_p(shape, x * rate);
}

}  // namespace fab::num
