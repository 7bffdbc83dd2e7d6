// Interval constructions: spending functions, FAB-z endpoints against frozen
// reference values, Bayes/credible coverage, EB intervals, and the FAB-t path.

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "fab/domain.hpp"
#include "fab/intervals.hpp"
#include "fab/rng.hpp"

using namespace fab;

TEST_CASE("g and g_inverse round trip at 1e-9") {
    const double alpha = 0.05;
    CHECK(g(0.75, alpha) == Catch::Approx(0.4609383859129197).epsilon(1e-10));
    CHECK(g(0.3, alpha) == Catch::Approx(-0.3581797046319628).epsilon(1e-10));
    CHECK(g(0.5, alpha) == Catch::Approx(0.0).margin(1e-14));
    for (double w : {0.01, 0.2, 0.5, 0.8, 0.99}) {
        CHECK(g_inverse(g(w, alpha), alpha) == Catch::Approx(w).margin(1e-9));
    }
    for (double x : {-3.0, -0.4, 0.0, 1.1, 2.5}) {
        CHECK(g(g_inverse(x, alpha), alpha) == Catch::Approx(x).margin(1e-9));
    }
    // monotone increasing
    CHECK(g(0.6, alpha) > g(0.4, alpha));
}

TEST_CASE("direct intervals") {
    Interval ci = direct_interval(1.0, 2.0, 0.05);
    CHECK(ci.lower == Catch::Approx(1.0 - 2.0 * 1.959963984540054).epsilon(1e-12));
    CHECK(ci.upper == Catch::Approx(1.0 + 2.0 * 1.959963984540054).epsilon(1e-12));
    Interval ct = direct_t_interval(0.0, 1.0, 4, 0.05);
    CHECK(ct.upper == Catch::Approx(2.7764451051977987).epsilon(1e-10));
    CHECK(ct.width() > ci.width() / 2.0);  // t is wider than z at sigma 1
}

TEST_CASE("bayes posterior and interval") {
    NormalPrior prior{0.0, 1.0};
    NormalPrior post = bayes_posterior(2.0, 1.0, prior.mu, prior.tau2);
    CHECK(post.mu == Catch::Approx(1.0));
    CHECK(post.tau2 == Catch::Approx(0.5));
    Interval ci = bayes_interval(2.0, 1.0, prior, 0.05);
    CHECK(ci.lower == Catch::Approx(1.0 - 1.959963984540054 * std::sqrt(0.5)).epsilon(1e-10));
}

TEST_CASE("credible_coverage reference values") {
    CHECK(credible_coverage(0.0, 1.0, 1.0, 0.05) ==
          Catch::Approx(0.9944254033192157).epsilon(1e-12));
    CHECK(credible_coverage(1.0, 1.0, 1.0, 0.05) ==
          Catch::Approx(0.961705719175401).epsilon(1e-10));
    CHECK(credible_coverage(2.0, 1.0, 1.0, 0.05) ==
          Catch::Approx(0.7798849066394729).epsilon(1e-10));
    CHECK(credible_coverage(3.0, 1.0, 1.0, 0.05) ==
          Catch::Approx(0.4097483497649189).epsilon(1e-10));
    // symmetric in delta
    CHECK(credible_coverage(-2.0, 1.0, 1.0, 0.05) ==
          Catch::Approx(credible_coverage(2.0, 1.0, 1.0, 0.05)).epsilon(1e-12));
}

TEST_CASE("fab_z_interval frozen reference endpoints") {
    NormalPrior std_prior{0.0, 1.0};
    Interval a = fab_z_interval(0.0, 1.0, std_prior, 0.05);
    CHECK(a.lower == Catch::Approx(-1.6448575211792624).epsilon(1e-9));
    CHECK(a.upper == Catch::Approx(1.6448575211792624).epsilon(1e-9));

    Interval b = fab_z_interval(2.0, 1.0, std_prior, 0.05);
    CHECK(b.lower == Catch::Approx(0.019825447117551).margin(1e-9));
    CHECK(b.upper == Catch::Approx(3.644853626951473).epsilon(1e-9));

    Interval c = fab_z_interval(-1.3, 1.0, NormalPrior{0.4, 2.5}, 0.05);
    CHECK(c.lower == Catch::Approx(-2.9449289759440753).epsilon(1e-8));
    CHECK(c.upper == Catch::Approx(0.5897103019421819).margin(1e-8));

    Interval d = fab_z_interval(3.0, 1.0, NormalPrior{-1.0, 0.3}, 0.05);
    CHECK(d.lower == Catch::Approx(-0.6929472909666474).margin(1e-8));
    CHECK(d.upper == Catch::Approx(4.644853626951473).epsilon(1e-8));

    Interval e = fab_z_interval(0.5, 2.0, NormalPrior{0.5, 0.8}, 0.05);
    CHECK(e.lower == Catch::Approx(-2.7897072539029466).epsilon(1e-8));
    CHECK(e.upper == Catch::Approx(3.7897072539029466).epsilon(1e-8));
}

TEST_CASE("fab_z_interval endpoints satisfy the defining equations at 1e-8") {
    // at the endpoints, theta = y + sigma z_{alpha(1-s)} (lower) and
    // theta = y + sigma z_{1-alpha s} (upper) with s the spending function
    const double alpha = 0.05;
    Rng rng = Rng::stream(5, 0, 0);
    for (int i = 0; i < 25; ++i) {
        double y = 4.0 * rng.normal();
        double sigma = 0.5 + 2.0 * rng.uniform();
        NormalPrior prior{2.0 * rng.normal(), 0.2 + 4.0 * rng.uniform()};
        SpendingFunction s = optimal_s_z(prior.mu, prior.tau2, sigma, alpha);
        Interval ci = fab_z_interval(y, sigma, prior, alpha);
        double sl = s(ci.lower), su = s(ci.upper);
        double lo = y + sigma * num::norm_quantile(alpha * (1.0 - sl));
        double hi = y + sigma * num::norm_quantile(1.0 - alpha * su);
        CHECK(std::fabs(ci.lower - lo) < 1e-8 * sigma);
        CHECK(std::fabs(ci.upper - hi) < 1e-8 * sigma);
        CHECK(ci.lower < ci.upper);
        // membership test agrees with the endpoints
        CHECK(fab_z_contains(0.5 * (ci.lower + ci.upper), y, sigma, prior, alpha));
        CHECK(!fab_z_contains(ci.lower - 1e-4 * sigma, y, sigma, prior, alpha));
        CHECK(!fab_z_contains(ci.upper + 1e-4 * sigma, y, sigma, prior, alpha));
    }
}

TEST_CASE("fab_z_interval equivariance and prior-informativeness limits") {
    NormalPrior prior{0.7, 1.3};
    const double alpha = 0.05;
    Interval base = fab_z_interval(0.2, 1.0, prior, alpha);
    // shift equivariance: move y and mu together
    Interval shifted = fab_z_interval(0.2 + 5.0, 1.0, NormalPrior{prior.mu + 5.0, prior.tau2}, alpha);
    CHECK(shifted.lower == Catch::Approx(base.lower + 5.0).epsilon(1e-9));
    CHECK(shifted.upper == Catch::Approx(base.upper + 5.0).epsilon(1e-9));
    // diffuse prior recovers the direct interval
    Interval diffuse = fab_z_interval(0.2, 1.0, NormalPrior{0.7, 1e8}, alpha);
    Interval direct = direct_interval(0.2, 1.0, alpha);
    CHECK(diffuse.lower == Catch::Approx(direct.lower).margin(1e-3));
    CHECK(diffuse.upper == Catch::Approx(direct.upper).margin(1e-3));
    // a tight prior shrinks width when y is near mu
    Interval tight = fab_z_interval(0.7, 1.0, NormalPrior{0.7, 0.25}, alpha);
    CHECK(tight.width() < direct.width());
}

TEST_CASE("expected_width_ratio_z matches reference quadrature and tends to 1") {
    CHECK(expected_width_ratio_z(0.5, 0.05) == Catch::Approx(0.8639603529573467).margin(2e-4));
    CHECK(expected_width_ratio_z(1.0, 0.05) == Catch::Approx(0.8775706909201368).margin(2e-4));
    CHECK(expected_width_ratio_z(5.0, 0.05) == Catch::Approx(0.9363960190620372).margin(2e-4));
    double r1 = expected_width_ratio_z(100.0, 0.05);
    double r2 = expected_width_ratio_z(10000.0, 0.05);
    CHECK(r1 < r2);
    CHECK(r2 == Catch::Approx(1.0).margin(5e-3));
    CHECK(expected_width_ratio_z(0.5, 0.05) < expected_width_ratio_z(5.0, 0.05));
}

TEST_CASE("eb_interval on an exchangeable table shrinks toward the mean") {
    AreaTable t;
    Rng rng = Rng::stream(77, 0, 0);
    for (int j = 0; j < 30; ++j) {
        AreaDatum a;
        a.id = std::to_string(j);
        a.y = 2.0 * rng.normal();
        a.sigma2 = 1.0;
        t.areas.push_back(a);
    }
    LinkingSpec spec{ModelVariant::Exchangeable};
    auto cis = eb_interval(t, spec, 0.05);
    REQUIRE(cis.size() == 30);
    double direct_w = 2.0 * 1.959963984540054;
    for (const auto& ci : cis) {
        CHECK(ci.width() < direct_w);
        CHECK(ci.lower < ci.upper);
    }
    // naive plug-in variance gives narrower intervals than second-order MSE
    EbOptions naive;
    naive.second_order = false;
    auto cis_naive = eb_interval(t, spec, 0.05, naive);
    CHECK(cis_naive[0].width() < cis[0].width());
}

TEST_CASE("optimal_w_t and fab_t_interval basic behavior") {
    NormalPrior prior{0.0, 1.0};
    PrecisionPrior prec{3.0, 2.0};
    const int q = 8;
    const double alpha = 0.05;
    // at theta = mu the optimal w is 1/2 by symmetry
    CHECK(optimal_w_t(0.0, prior, prec, q, alpha) == Catch::Approx(0.5).margin(5e-3));
    // monotone in theta
    double w_lo = optimal_w_t(-2.0, prior, prec, q, alpha);
    double w_hi = optimal_w_t(2.0, prior, prec, q, alpha);
    CHECK(w_lo < 0.5);
    CHECK(w_hi > 0.5);

    double sigma_hat = 1.1;
    Interval ci = fab_t_interval(0.0, sigma_hat, q, prior, prec, alpha);
    CHECK(ci.lower < 0.0);
    CHECK(ci.upper > 0.0);
    // centered case is narrower than the direct t interval
    Interval dt = direct_t_interval(0.0, sigma_hat, q, alpha);
    CHECK(ci.width() < dt.width());
    // far-off y gives a wider-than-direct interval, as with FAB-z
    Interval far = fab_t_interval(6.0, sigma_hat, q, prior, prec, alpha);
    CHECK(far.width() > dt.width());
}

TEST_CASE("tabulated spending function is monotone and clamped") {
    NormalPrior prior{0.3, 0.9};
    PrecisionPrior prec{2.5, 1.5};
    SpendingFunction s = tabulate_w_t(prior, prec, 1.0, 10, 0.05);
    double prev = -1.0;
    for (double th = -12.0; th <= 12.0; th += 0.25) {
        double v = s(th);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(v >= prev - 1e-12);
        prev = v;
    }
}
