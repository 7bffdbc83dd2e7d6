// Monte Carlo harness: data generation moments, determinism across thread
// counts, and small end-to-end width/coverage studies.

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "fab/simulation.hpp"

using namespace fab;

TEST_CASE("gen_dataset is deterministic and thread-independent") {
    SimSetting s;
    s.tau2 = 0.5;
    s.rho = 0.9;
    s.seed = 42;
    Dataset a = gen_dataset(s, 7);
    Dataset b = gen_dataset(s, 7);
    CHECK((a.y - b.y).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.theta - b.theta).cwiseAbs().maxCoeff() == 0.0);
    Dataset c = gen_dataset(s, 8);
    CHECK((a.y - c.y).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("gen_dataset covariate is sample-standardized") {
    SimSetting s;
    Dataset d = gen_dataset(s, 3);
    double mean = d.X.col(0).mean();
    double var = (d.X.col(0).array() - mean).square().sum() / (s.m - 1);
    CHECK(mean == Catch::Approx(0.0).margin(1e-12));
    CHECK(var == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gen_dataset marginal moments match the linking model") {
    SimSetting s;
    s.tau2 = 0.5;
    s.rho = 0.0;
    s.beta = 2.0;
    const int R = 400;
    double sum = 0.0, sum2 = 0.0, resid2 = 0.0;
    long n = 0;
    for (int r = 0; r < R; ++r) {
        Dataset d = gen_dataset(s, r);
        for (int j = 0; j < s.m; ++j) {
            double dev = d.theta[j] - s.beta * d.X(j, 0);
            sum += dev;
            sum2 += dev * dev;
            double e = d.y[j] - d.theta[j];
            resid2 += e * e;
            ++n;
        }
    }
    CHECK(sum / n == Catch::Approx(0.0).margin(0.02));
    CHECK(sum2 / n == Catch::Approx(s.tau2).epsilon(0.05));
    CHECK(resid2 / n == Catch::Approx(1.0).epsilon(0.03));
}

TEST_CASE("tau2 = 0 produces deterministic theta") {
    SimSetting s;
    s.tau2 = 0.0;
    s.beta = 3.0;
    Dataset d = gen_dataset(s, 0);
    CHECK((d.theta - 3.0 * d.X.col(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("run_width_study results are identical for 1 and 4 threads") {
    SimSetting s;
    s.n_reps = 12;
    LinkingSpec exch{ModelVariant::Exchangeable};
    exch.intercept = false;
    StudyOptions o1, o4;
    o1.threads = 1;
    o4.threads = 4;
    SimResult r1 = run_width_study(s, {exch}, o1);
    SimResult r4 = run_width_study(s, {exch}, o4);
    REQUIRE(r1.procedures.size() == r4.procedures.size());
    for (std::size_t i = 0; i < r1.procedures.size(); ++i) {
        CHECK(r1.procedures[i].mean_width == r4.procedures[i].mean_width);
        CHECK(r1.procedures[i].coverage == r4.procedures[i].coverage);
        CHECK(r1.procedures[i].frac_narrower == r4.procedures[i].frac_narrower);
    }
}

TEST_CASE("width study sanity: FAB narrower on average, coverage near 0.95") {
    SimSetting s;
    s.tau2 = 0.5;
    s.n_reps = 150;
    LinkingSpec exch{ModelVariant::Exchangeable};
    exch.intercept = false;
    SimResult r = run_width_study(s, {exch});
    REQUIRE(r.procedures.size() == 2);
    const ProcSummary& direct = r.procedures[0];
    const ProcSummary& fab = r.procedures[1];
    CHECK(direct.rel_width == Catch::Approx(1.0).margin(1e-12));
    CHECK(fab.rel_width < 0.9);
    CHECK(fab.rel_width > 0.8);
    CHECK(fab.coverage == Catch::Approx(0.95).margin(0.01));
    CHECK(direct.coverage == Catch::Approx(0.95).margin(0.01));
    CHECK(fab.failed_reps == 0);
}

TEST_CASE("coverage_curve bins tally every area and track 0.95 for direct") {
    SimSetting s;
    s.tau2 = 1.0;
    s.n_reps = 300;
    LinkingSpec exch{ModelVariant::Exchangeable};
    exch.intercept = false;
    auto bins = coverage_curve(Method::Direct, exch, s, 0.05, 0.5, 4.0);
    long total = 0;
    for (const auto& b : bins) {
        total += b.n;
        if (b.n > 500) CHECK(b.coverage() == Catch::Approx(0.95).margin(4.0 * b.se()));
    }
    // nearly all draws fall inside |delta| < 4 when tau2 = 1
    CHECK(total > 0.99 * 300 * s.m);
}

TEST_CASE("coverage_curve for Bayes follows the analytic credible coverage") {
    SimSetting s;
    s.tau2 = 1.0;
    s.n_reps = 400;
    LinkingSpec exch{ModelVariant::Exchangeable};
    exch.intercept = false;
    auto bins = coverage_curve(Method::Bayes, exch, s, 0.05, 0.5, 4.0);
    for (const auto& b : bins) {
        if (b.n < 2000) continue;
        double mid = 0.5 * (b.lo + b.hi);
        double analytic = credible_coverage(mid, 1.0, s.tau2, 0.05);
        CHECK(b.coverage() == Catch::Approx(analytic).margin(5.0 * b.se() + 0.01));
    }
}
