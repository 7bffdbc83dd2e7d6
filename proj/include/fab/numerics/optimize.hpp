#pragma once

// Box-constrained maximization of a smooth function with analytic gradient.
// Projected quasi-Newton (BFGS with gradient projection and backtracking),
// adequate for the low-dimensional hyperparameter problems in this library.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace fab::num {

struct OptimizerResult {
    Eigen::VectorXd argmax;
    double value = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct Box {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
};

struct MaximizeOptions {
    double grad_tol = 1e-8;   // on the projected gradient
    int max_iter = 500;
};

// f(x, grad) returns the objective and fills grad; maximization.
inline OptimizerResult maximize_box(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& f,
    Eigen::VectorXd x0, const Box& box, MaximizeOptions opts = {}) {
    const int n = static_cast<int>(x0.size());
    if (box.lower.size() != n || box.upper.size() != n)
        throw std::invalid_argument("maximize_box: bound dimension mismatch");
    for (int i = 0; i < n; ++i)
        if (!(x0[i] > box.lower[i] && x0[i] < box.upper[i]))
            throw std::invalid_argument("maximize_box: x0 must be strictly inside bounds");

    auto clamp = [&](Eigen::VectorXd v) {
        for (int i = 0; i < n; ++i) v[i] = std::min(std::max(v[i], box.lower[i]), box.upper[i]);
        return v;
    };
    auto projected_grad = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
        Eigen::VectorXd pg = g;
        for (int i = 0; i < n; ++i) {
            if (x[i] <= box.lower[i] && g[i] < 0.0) pg[i] = 0.0;
            if (x[i] >= box.upper[i] && g[i] > 0.0) pg[i] = 0.0;
        }
        return pg;
    };

    Eigen::VectorXd x = x0, g(n);
    double fx = f(x, g);
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);  // inverse-Hessian approx

    OptimizerResult res;
    for (int it = 0; it < opts.max_iter; ++it) {
        Eigen::VectorXd pg = projected_grad(x, g);
        res.iterations = it;
        res.gradient_norm = pg.norm();
        if (res.gradient_norm < opts.grad_tol) {
            res.converged = true;
            break;
        }
        Eigen::VectorXd dir = H * g;  // ascent direction
        if (dir.dot(g) <= 0.0) dir = g;

        double step = 1.0;
        Eigen::VectorXd xn;
        double fn = -std::numeric_limits<double>::infinity();
        bool improved = false;
        Eigen::VectorXd gn(n);
        for (int ls = 0; ls < 60; ++ls) {
            xn = clamp(x + step * dir);
            fn = f(xn, gn);
            if (std::isfinite(fn) && fn > fx) { improved = true; break; }
            step *= 0.5;
        }
        if (!improved) {
            // no ascent along the quasi-Newton direction; try steepest ascent
            step = 1.0;
            for (int ls = 0; ls < 60; ++ls) {
                xn = clamp(x + step * pg);
                fn = f(xn, gn);
                if (std::isfinite(fn) && fn > fx) { improved = true; break; }
                step *= 0.5;
            }
            H = Eigen::MatrixXd::Identity(n, n);
        }
        if (!improved) break;  // stationary up to line-search resolution

        Eigen::VectorXd s = xn - x, yv = gn - g;
        double sy = s.dot(yv);
        if (sy < -1e-12 * s.norm() * yv.norm()) {
            // BFGS update for maximization: y = g_new - g_old has s'y < 0
            Eigen::VectorXd ys = -yv;
            double rho = 1.0 / s.dot(ys);
            Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
            H = (I - rho * s * ys.transpose()) * H * (I - rho * ys * s.transpose()) +
                rho * s * s.transpose();
        }
        x = xn;
        fx = fn;
        g = gn;
    }
    res.argmax = x;
    res.value = fx;
    Eigen::VectorXd pg = projected_grad(x, g);
    res.gradient_norm = pg.norm();
    if (res.gradient_norm < opts.grad_tol) res.converged = true;
    return res;
}

}  // namespace fab::num
