#pragma once

// Adaptive quadrature over finite, semi-infinite, and doubly infinite ranges,
// plus fixed Gauss-Legendre rules for smooth inner integrals.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "special.hpp"

namespace fab::num {

struct QuadOptions {
    double tol = 1e-8;      // absolute error target
    int max_depth = 48;
};

class quadrature_error : public std::runtime_error {
  public:
    quadrature_error(const char* msg, double best)
        : std::runtime_error(msg), best_estimate(best) {}
    double best_estimate;
};

namespace detail {

template <class F>
double adaptive_simpson(F& f, double a, double b, double fa, double fm, double fb,
                        double whole, double tol, int depth, bool& ok) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    double delta = left + right - whole;
    if (std::fabs(delta) <= 15.0 * tol || (b - a) < 1e-14 * (std::fabs(a) + std::fabs(b) + 1.0))
        return left + right + delta / 15.0;
    if (depth <= 0) {
        ok = false;
        return left + right + delta / 15.0;
    }
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, ok) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, ok);
}

template <class F>
double integrate_finite(F&& f, double a, double b, QuadOptions opts, bool& ok) {
    double fa = f(a), fm = f(0.5 * (a + b)), fb = f(b);
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(f, a, b, fa, fm, fb, whole, opts.tol, opts.max_depth, ok);
}

}  // namespace detail

// Integrate f over [lo, hi]; either bound may be infinite.  Semi-infinite
// ranges are mapped by x = lo + t/(1-t) (and mirrored), the doubly infinite
// range by x = t/(1-t^2), each onto t in (0,1) / (-1,1).
template <class F>
double integrate(F&& f, double lo, double hi, QuadOptions opts = {}) {
    bool ok = true;
    double value;
    const double e = 1e-12;  // keep transformed endpoints finite
    if (std::isfinite(lo) && std::isfinite(hi)) {
        value = detail::integrate_finite(f, lo, hi, opts, ok);
    } else if (std::isfinite(lo)) {
        auto h = [&](double t) {
            double u = 1.0 - t;
            return f(lo + t / u) / (u * u);
        };
        value = detail::integrate_finite(h, 0.0, 1.0 - e, opts, ok);
    } else if (std::isfinite(hi)) {
        auto h = [&](double t) {
            double u = 1.0 - t;
            return f(hi - t / u) / (u * u);
        };
        value = detail::integrate_finite(h, 0.0, 1.0 - e, opts, ok);
    } else {
        auto h = [&](double t) {
            double u = 1.0 - t * t;
            return f(t / u) * (1.0 + t * t) / (u * u);
        };
        value = detail::integrate_finite(h, -1.0 + e, 1.0 - e, opts, ok);
    }
    if (!ok) throw quadrature_error("integrate: tolerance not reached", value);
    return value;
}

// ---------------------------------------------------------------------------
// Gauss-Legendre nodes/weights on [0,1], by Newton on P_n.

struct GaussLegendre {
    std::vector<double> node;
    std::vector<double> weight;
};

inline GaussLegendre gauss_legendre_01(int n) {
    GaussLegendre r;
    r.node.resize(n);
    r.weight.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            double dx = p0 / pp;
            x -= dx;
            if (std::fabs(dx) < 1e-15) break;
        }
        double w = 2.0 / ((1.0 - x * x) * pp * pp);
        r.node[i] = 0.5 * (1.0 - x);
        r.node[n - 1 - i] = 0.5 * (1.0 + x);
        r.weight[i] = 0.5 * w;
        r.weight[n - 1 - i] = 0.5 * w;
    }
    return r;
}

}  // namespace fab::num
