// Linking-model covariance, conditional priors, likelihood derivatives, and
// the Fisher-scoring / gamma-hyperparameter fits.

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "fab/domain.hpp"
#include "fab/estimation.hpp"
#include "fab/linking.hpp"
#include "fab/rng.hpp"

using namespace fab;

namespace {

Eigen::MatrixXd lattice_w(int side) {
    Eigen::MatrixXd W = lattice_contiguity(side, side);
    row_standardize(W);
    return W;
}

// fixtures shared by the reference-value tests: 3x3 lattice, tau2=0.7, rho=0.6
struct Fixture {
    Eigen::MatrixXd W = lattice_w(3);
    HyperParams psi;
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(9, 1);
    Eigen::VectorXd D{{0.5, 1.0, 0.8, 1.2, 0.9, 1.1, 0.7, 1.3, 0.6}};
    Eigen::VectorXd y{{0.1, -0.4, 0.8, 0.2, 0.5, -0.2, 0.9, -0.7, 0.3}};
    Fixture() {
        psi.beta = Eigen::VectorXd::Constant(1, 0.3);
        psi.tau2 = 0.7;
        psi.rho = 0.6;
    }
};

}  // namespace

TEST_CASE("sar_covariance reference values on the 3x3 lattice") {
    Fixture f;
    Eigen::MatrixXd G = sar_covariance(f.psi.tau2, f.psi.rho, f.W).G;
    CHECK(G(0, 0) == Catch::Approx(1.0684909284607433).epsilon(1e-10));
    CHECK(G(4, 4) == Catch::Approx(1.3589843750000001).epsilon(1e-10));
    CHECK(G(0, 1) == Catch::Approx(0.6378466393336772).epsilon(1e-10));
    CHECK((G - G.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    // rho = 0 degenerates to tau2 * I
    Eigen::MatrixXd G0 = sar_covariance(0.7, 0.0, f.W).G;
    CHECK((G0 - 0.7 * Eigen::MatrixXd::Identity(9, 9)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("conditional_prior matches the partitioned-covariance reference") {
    Fixture f;
    Eigen::VectorXd theta_hat{{0.1, -0.4, 0.8, 0.2, 0.5, -0.2, 0.9, -0.7}};
    NormalPrior pr = conditional_prior(4, theta_hat, f.psi, f.X, f.W);
    CHECK(pr.mu == Catch::Approx(0.3990825688073394).epsilon(1e-10));
    CHECK(pr.tau2 == Catch::Approx(0.6422018348623856).epsilon(1e-10));

    // rho = 0 shortcut: prior is (x_j' beta, tau2)
    HyperParams iid = f.psi;
    iid.rho = 0.0;
    NormalPrior pr0 = conditional_prior(4, theta_hat, iid, f.X, f.W);
    CHECK(pr0.mu == Catch::Approx(0.3));
    CHECK(pr0.tau2 == Catch::Approx(0.7));
}

TEST_CASE("marginal_conditional_prior matches the partitioned reference") {
    Fixture f;
    Eigen::VectorXd ym(8), Dm(8);
    for (int r = 0, rr = 0; r < 9; ++r) {
        if (r == 4) continue;
        ym[rr] = f.y[r];
        Dm[rr] = f.D[r];
        ++rr;
    }
    NormalPrior pr = marginal_conditional_prior(4, ym, Dm, f.psi, f.X, f.W);
    CHECK(pr.mu == Catch::Approx(-0.0008396802367481304).margin(1e-12));
    CHECK(pr.tau2 == Catch::Approx(0.8544674066899459).epsilon(1e-10));
    // integrating theta_{-j} out inflates the variance vs the plug-in prior
    CHECK(pr.tau2 > 0.6422018348623856);
}

TEST_CASE("eblup and log_likelihood reference values") {
    Fixture f;
    Eigen::VectorXd th = eblup(f.psi, f.y, f.X, f.W, f.D);
    CHECK(th[0] == Catch::Approx(0.12682135241723233).epsilon(1e-10));
    CHECK(th[4] == Catch::Approx(0.24308117067646845).epsilon(1e-10));
    CHECK(th[8] == Catch::Approx(0.19317891274925258).epsilon(1e-10));
    CHECK(log_likelihood(f.psi, f.y, f.X, f.W, f.D) ==
          Catch::Approx(-11.83271026342607).epsilon(1e-10));
}

TEST_CASE("score matches central finite differences on random instances") {
    Eigen::MatrixXd W = lattice_w(4);
    Rng rng = Rng::stream(42, 0, 0);
    for (int inst = 0; inst < 10; ++inst) {
        const int m = 16;
        Eigen::MatrixXd X(m, 2);
        Eigen::VectorXd y(m), D(m);
        for (int j = 0; j < m; ++j) {
            X(j, 0) = 1.0;
            X(j, 1) = rng.normal();
            y[j] = rng.normal() * 2.0;
            D[j] = 0.5 + rng.uniform();
        }
        HyperParams psi;
        psi.beta = Eigen::Vector2d(rng.normal(), rng.normal());
        psi.tau2 = 0.3 + rng.uniform();
        psi.rho = -0.8 + 1.6 * rng.uniform();

        Eigen::Vector2d s = score(psi, y, X, W, D);
        auto ll = [&](double t2, double rh) {
            HyperParams p = psi;
            p.tau2 = t2;
            p.rho = rh;
            return log_likelihood(p, y, X, W, D);
        };
        double h1 = 1e-6 * psi.tau2, h2 = 1e-6;
        double fd_t = (ll(psi.tau2 + h1, psi.rho) - ll(psi.tau2 - h1, psi.rho)) / (2.0 * h1);
        double fd_r = (ll(psi.tau2, psi.rho + h2) - ll(psi.tau2, psi.rho - h2)) / (2.0 * h2);
        CHECK(s[0] == Catch::Approx(fd_t).epsilon(1e-5));
        CHECK(s[1] == Catch::Approx(fd_r).epsilon(1e-5));
    }
}

TEST_CASE("fisher_info is symmetric positive definite") {
    Eigen::MatrixXd W = lattice_w(3);
    Eigen::VectorXd D = Eigen::VectorXd::Ones(9);
    Eigen::Matrix2d I = fisher_info(0.7, 0.5, W, D);
    CHECK(I(0, 1) == Catch::Approx(I(1, 0)).epsilon(1e-12));
    CHECK(I(0, 0) > 0.0);
    CHECK(I.determinant() > 0.0);
}

TEST_CASE("fit_ml matches the closed-form exchangeable ML estimate") {
    // equal sampling variances sigma2 = 1: ML is tau2_hat = max(S/m - 1, 0)
    // with S the squared deviations around the GLS (= OLS) mean
    const int m = 40;
    Rng rng = Rng::stream(9, 0, 0);
    Eigen::VectorXd y(m);
    for (int j = 0; j < m; ++j) y[j] = 0.4 + 1.3 * rng.normal();
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(m, 1);
    Eigen::VectorXd D = Eigen::VectorXd::Ones(m);
    LinkingSpec spec{ModelVariant::Exchangeable};
    FitReport rep = fit_ml(y, X, Eigen::MatrixXd(), D, spec);
    REQUIRE(rep.converged);
    double mean = y.mean();
    double S = (y.array() - mean).square().sum();
    double tau2_closed = std::max(S / m - 1.0, 1e-8);
    CHECK(rep.psi.tau2 == Catch::Approx(tau2_closed).epsilon(1e-6));
    CHECK(rep.psi.beta[0] == Catch::Approx(mean).epsilon(1e-8));
}

TEST_CASE("fit_ml lands exactly on the tau2 floor for underdispersed data") {
    const int m = 30;
    Eigen::VectorXd y(m);
    for (int j = 0; j < m; ++j) y[j] = 0.01 * (j - m / 2.0) / m;  // tiny spread
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(m, 1);
    Eigen::VectorXd D = Eigen::VectorXd::Ones(m);
    LinkingSpec spec{ModelVariant::Exchangeable};
    FitOptions opts;
    FitReport rep = fit_ml(y, X, Eigen::MatrixXd(), D, spec, opts);
    REQUIRE(rep.converged);
    CHECK(rep.psi.tau2 == opts.tau2_floor);
}

TEST_CASE("fit_ml recovers spatial hyperparameters on synthetic data") {
    // moderately large lattice; estimate should land near the truth
    const int side = 14, m = side * side;
    Eigen::MatrixXd W = lattice_w(side);
    const double tau2 = 1.0, rho = 0.6;
    Eigen::MatrixXd G = sar_covariance(tau2, rho, W).G;
    Eigen::LLT<Eigen::MatrixXd> llt(G);
    Eigen::MatrixXd L(llt.matrixL());
    Rng rng = Rng::stream(11, 0, 1);
    Eigen::VectorXd z(m), e(m);
    for (int j = 0; j < m; ++j) z[j] = rng.normal();
    for (int j = 0; j < m; ++j) e[j] = rng.normal();
    Eigen::VectorXd y = L * z + e;
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(m, 1);
    Eigen::VectorXd D = Eigen::VectorXd::Ones(m);
    LinkingSpec spec{ModelVariant::Spatial};
    FitReport rep = fit_ml(y, X, W, D, spec);
    REQUIRE(rep.converged);
    Eigen::Matrix2d info = fisher_info(rep.psi.tau2, rep.psi.rho, W, D);
    Eigen::Matrix2d cov = info.inverse();
    CHECK(std::fabs(rep.psi.tau2 - tau2) < 3.5 * std::sqrt(cov(0, 0)));
    CHECK(std::fabs(rep.psi.rho - rho) < 3.5 * std::sqrt(cov(1, 1)));
}

TEST_CASE("REML inflates tau2 relative to ML") {
    const int m = 25;
    Rng rng = Rng::stream(13, 0, 0);
    Eigen::VectorXd y(m);
    for (int j = 0; j < m; ++j) y[j] = 1.5 * rng.normal();
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(m, 1);
    Eigen::VectorXd D = Eigen::VectorXd::Ones(m);
    LinkingSpec spec{ModelVariant::Exchangeable};
    FitOptions ml, reml;
    reml.method = FitMethod::REML;
    double t_ml = fit_ml(y, X, Eigen::MatrixXd(), D, spec, ml).psi.tau2;
    double t_reml = fit_ml(y, X, Eigen::MatrixXd(), D, spec, reml).psi.tau2;
    CHECK(t_reml > t_ml);
    // closed form: REML tau2_hat = max(S/(m-1) - 1, floor)
    double S = (y.array() - y.mean()).square().sum();
    CHECK(t_reml == Catch::Approx(std::max(S / (m - 1) - 1.0, 1e-8)).epsilon(1e-6));
}

TEST_CASE("gamma hyperparameter gradient and Hessian match finite differences") {
    std::vector<double> w2 = {0.8, 1.3, 0.6, 2.1, 0.9, 1.7, 1.1};
    std::vector<int> n = {5, 8, 4, 12, 6, 9, 7};
    Rng rng = Rng::stream(17, 0, 0);
    for (int inst = 0; inst < 10; ++inst) {
        double a = 0.5 + 4.0 * rng.uniform();
        double b = 0.3 + 3.0 * rng.uniform();
        double da, db;
        detail::gamma_hyper_loglik(a, b, w2, n, &da, &db);
        double ha = 1e-6 * a, hb = 1e-6 * b;
        double fd_a = (detail::gamma_hyper_loglik(a + ha, b, w2, n) -
                       detail::gamma_hyper_loglik(a - ha, b, w2, n)) /
                      (2.0 * ha);
        double fd_b = (detail::gamma_hyper_loglik(a, b + hb, w2, n) -
                       detail::gamma_hyper_loglik(a, b - hb, w2, n)) /
                      (2.0 * hb);
        CHECK(da == Catch::Approx(fd_a).epsilon(1e-5));
        CHECK(db == Catch::Approx(fd_b).epsilon(1e-5));

        double haa, hab, hbb;
        detail::gamma_hyper_hessian(a, b, w2, n, haa, hab, hbb);
        double da_p, db_p, da_m, db_m;
        detail::gamma_hyper_loglik(a + ha, b, w2, n, &da_p, &db_p);
        detail::gamma_hyper_loglik(a - ha, b, w2, n, &da_m, &db_m);
        CHECK(haa == Catch::Approx((da_p - da_m) / (2.0 * ha)).epsilon(1e-5));
        CHECK(hab == Catch::Approx((db_p - db_m) / (2.0 * ha)).epsilon(1e-5));
        detail::gamma_hyper_loglik(a, b + hb, w2, n, &da_p, &db_p);
        detail::gamma_hyper_loglik(a, b - hb, w2, n, &da_m, &db_m);
        CHECK(hbb == Catch::Approx((db_p - db_m) / (2.0 * hb)).epsilon(1e-5));
    }
}

TEST_CASE("fit_gamma_hyper recovers hyperparameters from simulated variances") {
    const int m = 500;
    const double a = 2.5, b = 1.2;
    Rng rng = Rng::stream(23, 0, 0);
    std::vector<double> w2(m);
    std::vector<int> n(m);
    for (int k = 0; k < m; ++k) {
        n[k] = 5 + static_cast<int>(rng.uniform() * 10.0);
        double prec = rng.gamma(a, b);  // 1/omega2 ~ Gamma(a, b)
        double omega2 = 1.0 / prec;
        // unbiased variance estimate: omega2 * chi2_{n-1} / (n-1)
        w2[k] = omega2 * rng.chi2(n[k] - 1) / (n[k] - 1);
    }
    GammaFit fit = fit_gamma_hyper(w2, n);
    REQUIRE(fit.converged);
    CHECK(std::fabs(fit.shape - a) / a < 0.2);
    CHECK(std::fabs(fit.rate - b) / b < 0.2);
}

TEST_CASE("leave_one_out_priors never uses the held-out observation") {
    // perturbing y_j must leave area j's prior unchanged
    const int side = 3, m = 9;
    Eigen::MatrixXd W = lattice_w(side);
    AreaTable t;
    Rng rng = Rng::stream(31, 0, 0);
    for (int j = 0; j < m; ++j) {
        AreaDatum a;
        a.id = std::to_string(j);
        a.y = rng.normal();
        a.sigma2 = 1.0;
        t.areas.push_back(a);
    }
    t.W = W;
    LinkingSpec spec{ModelVariant::Spatial};
    auto p1 = leave_one_out_priors(t, spec);
    t.areas[4].y += 100.0;
    auto p2 = leave_one_out_priors(t, spec);
    REQUIRE(!p1[4].fallback);
    REQUIRE(!p2[4].fallback);
    CHECK(p1[4].normal.mu == Catch::Approx(p2[4].normal.mu).margin(1e-12));
    CHECK(p1[4].normal.tau2 == Catch::Approx(p2[4].normal.tau2).margin(1e-12));
    // other areas see the change
    CHECK(p1[0].normal.mu != Catch::Approx(p2[0].normal.mu).margin(1e-6));
}

TEST_CASE("eb_moments second-order MSE exceeds the naive variance") {
    Fixture f;
    Eigen::Matrix2d info = fisher_info(f.psi.tau2, f.psi.rho, f.W, f.D);
    EbMoments mo = eb_moments(f.psi, f.y, f.X, f.W, f.D, true, info.inverse());
    for (int j = 0; j < 9; ++j) {
        CHECK(mo.naive_var[j] > 0.0);
        CHECK(mo.mse[j] > mo.naive_var[j]);
    }
}
