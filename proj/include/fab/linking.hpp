#pragma once

// SAR linking-model covariance, leave-one-out conditional priors, and the
// plug-in conditional means (EBLUP).

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "domain.hpp"

namespace fab {

struct NormalPrior {
    double mu = 0.0;
    double tau2 = 1.0;

    void validate() const {
        if (!(tau2 > 0.0)) throw std::invalid_argument("NormalPrior: tau2 must be positive");
    }
};

struct SarCovariance {
    Eigen::MatrixXd G;
};

// G = tau2 [(I - rho W)(I - rho W^T)]^{-1}; reduces to tau2 I at rho = 0.
inline SarCovariance sar_covariance(double tau2, double rho, const Eigen::MatrixXd& W) {
    if (!(tau2 > 0.0)) throw std::invalid_argument("sar_covariance: tau2 must be positive");
    if (!(std::fabs(rho) < 1.0)) throw std::invalid_argument("sar_covariance: |rho| must be < 1");
    const int m = static_cast<int>(W.rows());
    if (rho == 0.0) return {tau2 * Eigen::MatrixXd::Identity(m, m)};
    Eigen::MatrixXd S = Eigen::MatrixXd::Identity(m, m) - rho * W;
    Eigen::MatrixXd C = S * S.transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(C);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("sar_covariance: (I - rho W)(I - rho W^T) not positive definite");
    Eigen::MatrixXd G = llt.solve(Eigen::MatrixXd::Identity(m, m)) * tau2;
    // symmetrize away factorization round-off
    G = 0.5 * (G + G.transpose());
    return {std::move(G)};
}

// Conditional prior for area j given plug-in values theta_hat for the other
// areas: the normal conditional of the linking model
//   mu_j   = x_j' beta + G_{j,-j} G_{-j,-j}^{-1} (theta_hat_{-j} - X_{-j} beta)
//   tau2_j = G_{jj} - G_{j,-j} G_{-j,-j}^{-1} G_{-j,j}.
// theta_hat_minus_j must be ordered as the areas with j removed.
inline NormalPrior conditional_prior(int j, const Eigen::VectorXd& theta_hat_minus_j,
                                     const HyperParams& psi, const Eigen::MatrixXd& X,
                                     const Eigen::MatrixXd& W) {
    psi.validate();
    const int m = static_cast<int>(X.rows());
    if (j < 0 || j >= m) throw std::invalid_argument("conditional_prior: area index out of range");
    if (theta_hat_minus_j.size() != m - 1)
        throw std::invalid_argument("conditional_prior: theta_hat_minus_j must have length m-1");

    const double xb_j = X.row(j).dot(psi.beta);
    if (psi.rho == 0.0) return {xb_j, psi.tau2};

    Eigen::MatrixXd G = sar_covariance(psi.tau2, psi.rho, W).G;
    Eigen::MatrixXd Gmm(m - 1, m - 1);
    Eigen::VectorXd gj(m - 1), resid(m - 1);
    for (int r = 0, rr = 0; r < m; ++r) {
        if (r == j) continue;
        gj[rr] = G(j, r);
        resid[rr] = theta_hat_minus_j[rr] - X.row(r).dot(psi.beta);
        for (int c = 0, cc = 0; c < m; ++c) {
            if (c == j) continue;
            Gmm(rr, cc) = G(r, c);
            ++cc;
        }
        ++rr;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Gmm);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0 ||
        ldlt.vectorD().maxCoeff() / ldlt.vectorD().minCoeff() > 1e12)
        throw std::runtime_error("conditional_prior: G_{-j,-j} is near singular");
    Eigen::VectorXd w = ldlt.solve(gj);
    double mu = xb_j + w.dot(resid);
    double tau2 = G(j, j) - w.dot(gj);
    if (!(tau2 > 0.0)) throw std::runtime_error("conditional_prior: nonpositive conditional variance");
    return {mu, tau2};
}

// Conditional prior for area j given the direct estimates of the other
// areas: theta_{-j} is integrated out rather than plugged in, so
//   mu_j   = x_j' beta + G_{j,-j} (G + D)_{-j,-j}^{-1} (y_{-j} - X_{-j} beta)
//   tau2_j = G_{jj} - G_{j,-j} (G + D)_{-j,-j}^{-1} G_{-j,j}.
// y_minus_j and D_minus_j must be ordered as the areas with j removed.
inline NormalPrior marginal_conditional_prior(int j, const Eigen::VectorXd& y_minus_j,
                                              const Eigen::VectorXd& D_minus_j,
                                              const HyperParams& psi, const Eigen::MatrixXd& X,
                                              const Eigen::MatrixXd& W) {
    psi.validate();
    const int m = static_cast<int>(X.rows());
    if (j < 0 || j >= m)
        throw std::invalid_argument("marginal_conditional_prior: area index out of range");
    if (y_minus_j.size() != m - 1 || D_minus_j.size() != m - 1)
        throw std::invalid_argument("marginal_conditional_prior: y/D must have length m-1");

    const double xb_j = X.row(j).dot(psi.beta);
    if (psi.rho == 0.0) return {xb_j, psi.tau2};

    Eigen::MatrixXd G = sar_covariance(psi.tau2, psi.rho, W).G;
    Eigen::MatrixXd Vmm(m - 1, m - 1);
    Eigen::VectorXd gj(m - 1), resid(m - 1);
    for (int r = 0, rr = 0; r < m; ++r) {
        if (r == j) continue;
        gj[rr] = G(j, r);
        resid[rr] = y_minus_j[rr] - X.row(r).dot(psi.beta);
        for (int c = 0, cc = 0; c < m; ++c) {
            if (c == j) continue;
            Vmm(rr, cc) = G(r, c);
            ++cc;
        }
        Vmm(rr, rr) += D_minus_j[rr];
        ++rr;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(Vmm);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("marginal_conditional_prior: V_{-j,-j} not positive definite");
    Eigen::VectorXd w = llt.solve(gj);
    double mu = xb_j + w.dot(resid);
    double tau2 = G(j, j) - w.dot(gj);
    if (!(tau2 > 0.0))
        throw std::runtime_error("marginal_conditional_prior: nonpositive conditional variance");
    return {mu, tau2};
}

// Plug-in conditional means of theta given y:
// theta_hat = X beta_hat + G V^{-1} (y - X beta_hat), V = D + G.
inline Eigen::VectorXd eblup(const HyperParams& psi, const Eigen::VectorXd& y,
                             const Eigen::MatrixXd& X, const Eigen::MatrixXd& W,
                             const Eigen::VectorXd& D) {
    psi.validate();
    const int m = static_cast<int>(y.size());
    Eigen::MatrixXd G = psi.rho == 0.0
                            ? Eigen::MatrixXd(psi.tau2 * Eigen::MatrixXd::Identity(m, m))
                            : sar_covariance(psi.tau2, psi.rho, W).G;
    Eigen::MatrixXd V = G;
    V.diagonal() += D;
    Eigen::LLT<Eigen::MatrixXd> llt(V);
    if (llt.info() != Eigen::Success) throw std::runtime_error("eblup: V not positive definite");
    Eigen::VectorXd r = y - X * psi.beta;
    return X * psi.beta + G * llt.solve(r);
}

}  // namespace fab
