#pragma once

// Bracketed scalar root finding: a bisection/secant hybrid that keeps the
// guaranteed bracket at every step.  Deterministic given the same inputs,
// which the golden-output tests rely on.

#include <cmath>
#include <stdexcept>

namespace fab::num {

struct Bracket {
    double lo;
    double hi;
};

struct RootOptions {
    double x_tol = 1e-10;   // absolute tolerance on the bracket width
    int max_iter = 200;
};

// Finds x in [bracket.lo, bracket.hi] with f(x) = 0 for monotone-through-zero
// f.  Requires f(lo) and f(hi) of opposite sign (or one of them zero).
template <class F>
double find_root(F&& f, Bracket bracket, RootOptions opts = {}) {
    double a = bracket.lo, b = bracket.hi;
    if (!(a < b)) throw std::invalid_argument("find_root: bracket.lo must be < bracket.hi");
    double fa = f(a), fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if ((fa > 0.0) == (fb > 0.0))
        throw std::invalid_argument("find_root: no sign change over bracket");

    for (int it = 0; it < opts.max_iter; ++it) {
        if (b - a <= opts.x_tol) break;
        // secant proposal, clipped to the interior of the bracket; every
        // other step bisects so the bracket provably shrinks
        double x = a - fa * (b - a) / (fb - fa);
        double margin = 0.01 * (b - a);
        if ((it & 1) || !(x > a + margin && x < b - margin)) x = 0.5 * (a + b);
        double fx = f(x);
        if (fx == 0.0) return x;
        if ((fx > 0.0) == (fa > 0.0)) {
            a = x; fa = fx;
        } else {
            b = x; fb = fx;
        }
    }
    if (b - a > opts.x_tol * 4.0 + 1e-300)
        throw std::runtime_error("find_root: did not converge");
    // return the endpoint with the smaller residual
    return std::fabs(fa) <= std::fabs(fb) ? a : b;
}

}  // namespace fab::num
