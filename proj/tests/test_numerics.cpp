// Numerical kernels: special functions against reference values, root
// finding, quadrature, and the box-constrained maximizer.

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "fab/numerics/optimize.hpp"
#include "fab/numerics/quadrature.hpp"
#include "fab/numerics/roots.hpp"
#include "fab/numerics/special.hpp"

using namespace fab;

TEST_CASE("normal quantile and CDF reference values") {
    CHECK(num::norm_quantile(0.975) == Catch::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(num::norm_quantile(0.01) == Catch::Approx(-2.3263478740408408).epsilon(1e-12));
    CHECK(num::norm_cdf(1.3) == Catch::Approx(0.9031995154143897).epsilon(1e-12));
    CHECK(num::norm_quantile(0.5) == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("normal quantile/CDF round trips at 1e-10") {
    for (double p : {1e-8, 1e-4, 0.01, 0.3, 0.5, 0.7, 0.99, 1.0 - 1e-6}) {
        CHECK(num::norm_cdf(num::norm_quantile(p)) == Catch::Approx(p).epsilon(1e-10));
    }
    for (double x : {-6.0, -2.5, -0.3, 0.0, 0.7, 3.1, 5.5}) {
        CHECK(num::norm_quantile(num::norm_cdf(x)) == Catch::Approx(x).margin(1e-10));
    }
}

TEST_CASE("Student-t quantile and CDF reference values") {
    CHECK(num::t_quantile(0.975, 4) == Catch::Approx(2.7764451051977987).epsilon(1e-10));
    CHECK(num::t_quantile(0.9, 11) == Catch::Approx(1.3634303180205214).epsilon(1e-10));
    CHECK(num::t_cdf(1.1, 7) == Catch::Approx(0.8461418724529555).epsilon(1e-10));
    for (double p : {0.01, 0.2, 0.5, 0.8, 0.999}) {
        for (int q : {1, 3, 10, 60}) {
            CHECK(num::t_cdf(num::t_quantile(p, q), q) == Catch::Approx(p).epsilon(1e-10));
        }
    }
}

TEST_CASE("gamma-family special functions") {
    CHECK(num::log_gamma(4.7) == Catch::Approx(2.736405146315567).epsilon(1e-12));
    CHECK(num::log_gamma(0.3) == Catch::Approx(1.0957979948180756).epsilon(1e-12));
    CHECK(num::digamma(3.2) == Catch::Approx(0.9988388912865998).epsilon(1e-10));
    CHECK(num::digamma(0.7) == Catch::Approx(-1.2200235536979347).epsilon(1e-10));
    CHECK(num::trigamma(1.0) == Catch::Approx(1.6449340668482264).epsilon(1e-10));
    CHECK(num::trigamma(2.5) == Catch::Approx(0.49035775610023486).epsilon(1e-8));
    CHECK(num::inc_beta(2.5, 3.5, 0.4) == Catch::Approx(0.4869041915261176).epsilon(1e-10));
    CHECK(num::inc_gamma_p(3.3, 2.2) == Catch::Approx(0.308579917021256).epsilon(1e-10));
    CHECK(num::gamma_quantile(0.3, 2.5, 1.7) == Catch::Approx(0.8823259213999726).epsilon(1e-10));
    CHECK(num::gamma_cdf(1.2, 2.5, 1.7) == Catch::Approx(0.4620435908164115).epsilon(1e-10));
    CHECK(num::chi2_quantile(0.95, 6) == Catch::Approx(12.591587243743977).epsilon(1e-10));
}

TEST_CASE("digamma/trigamma consistency with finite differences") {
    for (double x : {0.4, 1.7, 6.3, 25.0}) {
        double h = 1e-6 * std::max(1.0, x);
        double fd = (num::log_gamma(x + h) - num::log_gamma(x - h)) / (2.0 * h);
        CHECK(num::digamma(x) == Catch::Approx(fd).epsilon(1e-6));
        double fd2 = (num::digamma(x + h) - num::digamma(x - h)) / (2.0 * h);
        CHECK(num::trigamma(x) == Catch::Approx(fd2).epsilon(1e-6));
    }
}

TEST_CASE("find_root solves simple equations") {
    auto r = num::find_root([](double x) { return x * x - 2.0; }, {0.0, 2.0});
    CHECK(r == Catch::Approx(std::sqrt(2.0)).epsilon(1e-10));
    // flat-then-steep function exercises the forced-bisection path
    auto r2 = num::find_root([](double x) { return std::tanh(50.0 * (x - 0.123)); }, {0.0, 1.0});
    CHECK(r2 == Catch::Approx(0.123).margin(1e-9));
}

TEST_CASE("adaptive quadrature integrates known densities") {
    auto phi = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846); };
    CHECK(num::integrate(phi, -8.0, 8.0) == Catch::Approx(1.0).epsilon(1e-9));
    CHECK(num::integrate([](double x) { return x * x; }, 0.0, 1.0) ==
          Catch::Approx(1.0 / 3.0).epsilon(1e-10));
}

TEST_CASE("Gauss-Legendre nodes integrate polynomials exactly") {
    auto gl = num::gauss_legendre_01(12);
    double s = 0.0, s5 = 0.0;
    for (std::size_t i = 0; i < gl.node.size(); ++i) {
        s += gl.weight[i];
        s5 += gl.weight[i] * std::pow(gl.node[i], 5);
    }
    CHECK(s == Catch::Approx(1.0).epsilon(1e-13));
    CHECK(s5 == Catch::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("maximize_box finds interior and boundary optima") {
    // interior: concave quadratic, maximum at (1, -2)
    auto f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        g.resize(2);
        g[0] = -2.0 * (x[0] - 1.0);
        g[1] = -2.0 * (x[1] + 2.0);
        return -(x[0] - 1.0) * (x[0] - 1.0) - (x[1] + 2.0) * (x[1] + 2.0);
    };
    num::Box box;
    box.lower = Eigen::Vector2d(-5.0, -5.0);
    box.upper = Eigen::Vector2d(5.0, 5.0);
    auto r = num::maximize_box(f, Eigen::Vector2d(4.0, 4.0), box);
    CHECK(r.argmax[0] == Catch::Approx(1.0).margin(1e-6));
    CHECK(r.argmax[1] == Catch::Approx(-2.0).margin(1e-6));

    // boundary: maximum of x0 + x1 on the box corner
    auto f2 = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        g = Eigen::Vector2d(1.0, 1.0);
        return x[0] + x[1];
    };
    auto r2 = num::maximize_box(f2, Eigen::Vector2d(0.0, 0.0), box);
    CHECK(r2.argmax[0] == Catch::Approx(5.0).margin(1e-8));
    CHECK(r2.argmax[1] == Catch::Approx(5.0).margin(1e-8));
}
