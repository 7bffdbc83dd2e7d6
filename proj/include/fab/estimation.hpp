#pragma once

// Maximum-likelihood estimation of linking-model hyperparameters by Fisher
// scoring, marginal ML for the sampling-variance gamma hyperparameters, and
// the leave-one-out prior construction that feeds the FAB intervals.

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "domain.hpp"
#include "linking.hpp"
#include "numerics/optimize.hpp"
#include "numerics/special.hpp"

namespace fab {

struct PrecisionPrior {
    double shape = 1.0;  // a
    double rate = 1.0;   // rate of the gamma prior on the precision
};

struct FitReport {
    HyperParams psi;
    double loglik = 0.0;
    double score_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    int step_halvings = 0;
};

enum class FitMethod { ML, REML };

struct FitOptions {
    FitMethod method = FitMethod::ML;
    int max_iter = 300;
    double score_tol = 1e-6;
    double rel_ll_tol = 1e-10;
    double tau2_floor = 1e-8;
    double rho_cap = 1.0 - 1e-6;
    int max_halvings = 30;
    std::optional<HyperParams> init;  // warm start
};

namespace detail {

constexpr double log_2pi = 1.8378770664093454836;

// Diagonal-V path shared by the non-spatial variants (rho = 0, V = D + tau2 I).
struct DiagonalEval {
    Eigen::VectorXd beta;
    Eigen::VectorXd resid;
    double loglik = 0.0;
    double s_tau2 = 0.0;
    double info = 0.0;
};

inline DiagonalEval eval_diagonal(double tau2, const Eigen::VectorXd& y,
                                  const Eigen::MatrixXd& X, const Eigen::VectorXd& D,
                                  bool reml) {
    const int m = static_cast<int>(y.size());
    const int p = static_cast<int>(X.cols());
    Eigen::VectorXd v = D.array() + tau2;
    Eigen::VectorXd lam = v.cwiseInverse();
    if (p == 0) {
        // zero-mean linking model: no GLS step, no REML correction
        DiagonalEval e;
        e.beta.resize(0);
        e.resid = y;
        Eigen::VectorXd rl = y.cwiseProduct(lam);
        e.loglik = -0.5 * (m * log_2pi + v.array().log().sum() + y.dot(rl));
        e.s_tau2 = -0.5 * lam.sum() + 0.5 * rl.squaredNorm();
        e.info = 0.5 * lam.squaredNorm();
        return e;
    }
    Eigen::MatrixXd Xl = lam.asDiagonal() * X;
    Eigen::MatrixXd XtVX = X.transpose() * Xl;
    Eigen::LLT<Eigen::MatrixXd> llt(XtVX);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("fit_ml: X'V^-1 X not positive definite (rank-deficient X?)");
    DiagonalEval e;
    e.beta = llt.solve(Xl.transpose() * y);
    e.resid = y - X * e.beta;
    Eigen::VectorXd rl = e.resid.cwiseProduct(lam);
    e.loglik = -0.5 * (m * log_2pi + v.array().log().sum() + e.resid.dot(rl));
    e.s_tau2 = -0.5 * lam.sum() + 0.5 * rl.squaredNorm();
    e.info = 0.5 * lam.squaredNorm();
    if (reml) {
        Eigen::MatrixXd L(llt.matrixL());
        double logdet = 0.0;
        for (int i = 0; i < p; ++i) logdet += 2.0 * std::log(L(i, i));
        e.loglik -= 0.5 * logdet;
        Eigen::MatrixXd Xl2 = lam.asDiagonal() * Xl;           // V^-2 X
        Eigen::MatrixXd K = llt.solve(X.transpose() * Xl2);    // (X'V^-1X)^-1 X'V^-2 X
        e.s_tau2 += 0.5 * K.trace();
        // tr(P^2) = tr(V^-2) - 2 tr(K V^... ) with small-p contractions
        Eigen::MatrixXd Xl3 = lam.asDiagonal() * Xl2;          // V^-3 X
        Eigen::MatrixXd K3 = llt.solve(X.transpose() * Xl3);
        double trP2 = lam.squaredNorm() - 2.0 * K3.trace() + (K * K).trace();
        e.info = 0.5 * trP2;
    }
    return e;
}

// Dense SAR path.  Precomputes the W contractions once and reuses buffers
// across Fisher-scoring iterations; this is the hot loop of the simulation
// harness.
struct SarEval {
    Eigen::VectorXd beta;
    Eigen::VectorXd resid;
    double loglik = 0.0;
    Eigen::Vector2d score = Eigen::Vector2d::Zero();  // (s_tau2, s_rho)
    Eigen::Matrix2d info = Eigen::Matrix2d::Zero();
};

class SarWorkspace {
  public:
    SarWorkspace(const Eigen::MatrixXd& W, const Eigen::MatrixXd& X, const Eigen::VectorXd& D)
        : W_(W), X_(X), D_(D), m_(static_cast<int>(W.rows())) {
        Wsum_ = W + W.transpose();
        WWt_ = W * W.transpose();
        I_ = Eigen::MatrixXd::Identity(m_, m_);
    }

    SarEval eval(double tau2, double rho, const Eigen::VectorXd& y, bool need_derivs,
                 bool reml) const {
        const int p = static_cast<int>(X_.cols());
        Eigen::MatrixXd C = I_ - rho * Wsum_ + (rho * rho) * WWt_;
        Eigen::LLT<Eigen::MatrixXd> lltC(C);
        if (lltC.info() != Eigen::Success)
            throw std::runtime_error("fit_ml: SAR precision not positive definite");
        Eigen::MatrixXd Cinv = lltC.solve(I_);
        double logdetC = 0.0;
        {
            Eigen::MatrixXd L(lltC.matrixL());
            for (int i = 0; i < m_; ++i) logdetC += 2.0 * std::log(L(i, i));
        }
        Eigen::MatrixXd V = tau2 * Cinv;
        V.diagonal() += D_;
        Eigen::LLT<Eigen::MatrixXd> lltV(V);
        if (lltV.info() != Eigen::Success)
            throw std::runtime_error("fit_ml: V not positive definite");
        Eigen::MatrixXd Vinv = lltV.solve(I_);
        double logdetV = 0.0;
        {
            Eigen::MatrixXd L(lltV.matrixL());
            for (int i = 0; i < m_; ++i) logdetV += 2.0 * std::log(L(i, i));
        }

        Eigen::MatrixXd Xv, XtVX;
        Eigen::LLT<Eigen::MatrixXd> lltB;
        if (p > 0) {
            Xv = Vinv * X_;
            XtVX = X_.transpose() * Xv;
            lltB.compute(XtVX);
            if (lltB.info() != Eigen::Success)
                throw std::runtime_error("fit_ml: X'V^-1 X not positive definite");
        }

        SarEval e;
        if (p > 0) {
            e.beta = lltB.solve(Xv.transpose() * y);
            e.resid = y - X_ * e.beta;
        } else {
            e.beta.resize(0);
            e.resid = y;
        }
        Eigen::VectorXd Vr = Vinv * e.resid;
        e.loglik = -0.5 * (m_ * log_2pi + logdetV + e.resid.dot(Vr));
        if (reml && p > 0) {
            Eigen::MatrixXd L(lltB.matrixL());
            double logdetB = 0.0;
            for (int i = 0; i < p; ++i) logdetB += 2.0 * std::log(L(i, i));
            e.loglik -= 0.5 * logdetB;
        }
        if (!need_derivs) return e;

        Eigen::MatrixXd B = Wsum_ - (2.0 * rho) * WWt_;        // -dC/drho
        Eigen::MatrixXd A = tau2 * (Cinv * (B * Cinv));        // dV/drho
        Eigen::MatrixXd M1 = Vinv * Cinv;                      // V^-1 dV/dtau2
        Eigen::MatrixXd M2 = Vinv * A;

        e.score[0] = -0.5 * M1.trace() + 0.5 * Vr.dot(Cinv * Vr);
        e.score[1] = -0.5 * M2.trace() + 0.5 * Vr.dot(A * Vr);
        e.info(0, 0) = 0.5 * M1.cwiseProduct(M1.transpose()).sum();
        e.info(0, 1) = e.info(1, 0) = 0.5 * M1.cwiseProduct(M2.transpose()).sum();
        e.info(1, 1) = 0.5 * M2.cwiseProduct(M2.transpose()).sum();

        if (reml && p > 0) {
            // score and information relative to P = V^-1 - Xv (X'V^-1X)^-1 Xv'
            Eigen::MatrixXd Q1 = lltB.solve(Xv.transpose() * Cinv);  // p x m
            Eigen::MatrixXd Q2 = lltB.solve(Xv.transpose() * A);
            e.score[0] += 0.5 * (Xv.transpose() * Q1.transpose()).trace();
            e.score[1] += 0.5 * (Xv.transpose() * Q2.transpose()).trace();
            Eigen::MatrixXd P1 = M1 - Xv * Q1;
            Eigen::MatrixXd P2 = M2 - Xv * Q2;
            e.info(0, 0) = 0.5 * P1.cwiseProduct(P1.transpose()).sum();
            e.info(0, 1) = e.info(1, 0) = 0.5 * P1.cwiseProduct(P2.transpose()).sum();
            e.info(1, 1) = 0.5 * P2.cwiseProduct(P2.transpose()).sum();
        }
        return e;
    }

  private:
    Eigen::MatrixXd W_;
    Eigen::MatrixXd X_;
    Eigen::VectorXd D_;
    int m_;
    Eigen::MatrixXd Wsum_, WWt_, I_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Likelihood pieces (public, spec surface)

inline double log_likelihood(const HyperParams& psi, const Eigen::VectorXd& y,
                             const Eigen::MatrixXd& X, const Eigen::MatrixXd& W,
                             const Eigen::VectorXd& D) {
    psi.validate();
    const int m = static_cast<int>(y.size());
    if (psi.rho == 0.0) {
        Eigen::VectorXd v = D.array() + psi.tau2;
        Eigen::VectorXd r = y - X * psi.beta;
        return -0.5 * (m * detail::log_2pi + v.array().log().sum() +
                       (r.array().square() / v.array()).sum());
    }
    Eigen::MatrixXd G = sar_covariance(psi.tau2, psi.rho, W).G;
    Eigen::MatrixXd V = G;
    V.diagonal() += D;
    Eigen::LLT<Eigen::MatrixXd> llt(V);
    if (llt.info() != Eigen::Success) throw std::runtime_error("log_likelihood: V not SPD");
    double logdet = 0.0;
    Eigen::MatrixXd L(llt.matrixL());
    for (int i = 0; i < m; ++i) logdet += 2.0 * std::log(L(i, i));
    Eigen::VectorXd r = y - X * psi.beta;
    return -0.5 * (m * detail::log_2pi + logdet + r.dot(llt.solve(r)));
}

inline Eigen::VectorXd gls_beta(double tau2, double rho, const Eigen::VectorXd& y,
                                const Eigen::MatrixXd& X, const Eigen::MatrixXd& W,
                                const Eigen::VectorXd& D) {
    if (X.cols() == 0) return Eigen::VectorXd(0);
    if (rho == 0.0) {
        Eigen::VectorXd lam = (D.array() + tau2).inverse();
        Eigen::MatrixXd Xl = lam.asDiagonal() * X;
        Eigen::LLT<Eigen::MatrixXd> llt(X.transpose() * Xl);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("gls_beta: X'V^-1 X not positive definite");
        return llt.solve(Xl.transpose() * y);
    }
    detail::SarWorkspace ws(W, X, D);
    return ws.eval(tau2, rho, y, false, false).beta;
}

// Score of the ML log-likelihood in (tau2, rho), evaluated at psi.beta.
inline Eigen::Vector2d score(const HyperParams& psi, const Eigen::VectorXd& y,
                             const Eigen::MatrixXd& X, const Eigen::MatrixXd& W,
                             const Eigen::VectorXd& D) {
    psi.validate();
    const int m = static_cast<int>(y.size());
    Eigen::MatrixXd Wm = W.size() == 0 ? Eigen::MatrixXd::Zero(m, m) : W;
    detail::SarWorkspace ws(Wm, X, D);
    detail::SarEval e = ws.eval(psi.tau2, psi.rho, y, true, false);
    // re-evaluate the quadratic pieces at the supplied beta rather than GLS
    Eigen::VectorXd r = y - X * psi.beta;
    if ((r - e.resid).norm() > 1e-12 * (1.0 + r.norm())) {
        Eigen::MatrixXd C = (Eigen::MatrixXd::Identity(m, m) - psi.rho * Wm) *
                            (Eigen::MatrixXd::Identity(m, m) - psi.rho * Wm).transpose();
        Eigen::MatrixXd Cinv = C.llt().solve(Eigen::MatrixXd::Identity(m, m));
        Eigen::MatrixXd V = psi.tau2 * Cinv;
        V.diagonal() += D;
        Eigen::LLT<Eigen::MatrixXd> lltV(V);
        Eigen::VectorXd Vr = lltV.solve(r);
        Eigen::MatrixXd B = Wm + Wm.transpose() - 2.0 * psi.rho * Wm * Wm.transpose();
        Eigen::MatrixXd A = psi.tau2 * (Cinv * (B * Cinv));
        Eigen::MatrixXd Vinv = lltV.solve(Eigen::MatrixXd::Identity(m, m));
        e.score[0] = -0.5 * (Vinv * Cinv).trace() + 0.5 * Vr.dot(Cinv * Vr);
        e.score[1] = -0.5 * (Vinv * A).trace() + 0.5 * Vr.dot(A * Vr);
    }
    return e.score;
}

inline Eigen::Matrix2d fisher_info(double tau2, double rho, const Eigen::MatrixXd& W,
                                   const Eigen::VectorXd& D) {
    const int m = static_cast<int>(D.size());
    Eigen::MatrixXd Wm = W.size() == 0 ? Eigen::MatrixXd::Zero(m, m) : W;
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(m, 1);  // info does not involve X
    detail::SarWorkspace ws(Wm, X, D);
    Eigen::VectorXd y0 = Eigen::VectorXd::Zero(m);
    return ws.eval(tau2, rho, y0, true, false).info;
}

// ---------------------------------------------------------------------------
// Fisher-scoring fit

inline FitReport fit_ml(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                        const Eigen::MatrixXd& W, const Eigen::VectorXd& D,
                        const LinkingSpec& spec, const FitOptions& opts = {}) {
    const int m = static_cast<int>(y.size());
    const int p = static_cast<int>(X.cols());
    if (m <= p + 2) throw std::invalid_argument("fit_ml: need m > p + 2 areas");
    const bool spatial = spec.spatial();
    if (spatial && W.size() == 0) throw std::invalid_argument("fit_ml: spatial variant requires W");
    const bool reml = opts.method == FitMethod::REML;

    double tau2, rho = 0.0;
    if (opts.init) {
        tau2 = std::max(opts.init->tau2, opts.tau2_floor);
        rho = spatial ? std::clamp(opts.init->rho, -opts.rho_cap, opts.rho_cap) : 0.0;
    } else {
        Eigen::VectorXd r = y;
        if (p > 0) {
            Eigen::VectorXd b_ols =
                (X.transpose() * X).llt().solve(X.transpose() * y);
            r -= X * b_ols;
        }
        double vr = r.squaredNorm() / std::max(m - p, 1);
        tau2 = std::max(vr - D.mean(), 0.01 * vr);
        tau2 = std::max(tau2, opts.tau2_floor);
    }

    std::optional<detail::SarWorkspace> ws;
    if (spatial) ws.emplace(W, X, D);

    FitReport rep;
    rep.psi.rho = rho;
    double ll_prev = -num::inf;
    Eigen::VectorXd beta;
    double ll = 0.0;
    Eigen::Vector2d s = Eigen::Vector2d::Zero();
    Eigen::Matrix2d info = Eigen::Matrix2d::Zero();

    auto evaluate = [&](double t2, double rh, bool derivs, Eigen::VectorXd& beta_out,
                        Eigen::Vector2d& s_out, Eigen::Matrix2d& info_out) -> double {
        if (spatial) {
            detail::SarEval e = ws->eval(t2, rh, y, derivs, reml);
            beta_out = e.beta;
            s_out = e.score;
            info_out = e.info;
            return e.loglik;
        }
        detail::DiagonalEval e = detail::eval_diagonal(t2, y, X, D, reml);
        beta_out = e.beta;
        s_out = Eigen::Vector2d(e.s_tau2, 0.0);
        info_out.setZero();
        info_out(0, 0) = e.info;
        info_out(1, 1) = 1.0;
        return e.loglik;
    };

    auto projected_score = [&](double t2, double rh, const Eigen::Vector2d& sc) {
        Eigen::Vector2d ps = sc;
        if (t2 <= opts.tau2_floor * (1.0 + 1e-9) && ps[0] < 0.0) ps[0] = 0.0;
        if (spatial) {
            if (rh >= opts.rho_cap * (1.0 - 1e-12) && ps[1] > 0.0) ps[1] = 0.0;
            if (rh <= -opts.rho_cap * (1.0 - 1e-12) && ps[1] < 0.0) ps[1] = 0.0;
        } else {
            ps[1] = 0.0;
        }
        return ps;
    };
    auto projected_norm = [&](double t2, double rh, const Eigen::Vector2d& sc) {
        return projected_score(t2, rh, sc).norm();
    };
    // Newton decrement of the projected score: the expected log-likelihood
    // gain of one more scoring step.  On a flat (tau2, rho) ridge the raw
    // score norm can stall above score_tol while further steps gain nothing;
    // a tiny decrement is the right stopping signal there.
    auto newton_decrement = [&](double t2, double rh, const Eigen::Vector2d& sc,
                                const Eigen::Matrix2d& in) {
        Eigen::Vector2d ps = projected_score(t2, rh, sc);
        Eigen::Matrix2d reg = in;
        reg(0, 0) += 1e-12;
        reg(1, 1) += 1e-12;
        Eigen::Vector2d d = reg.ldlt().solve(ps);
        if (!d.allFinite()) return num::inf;
        return 0.5 * ps.dot(d);
    };

    ll = evaluate(tau2, rho, true, beta, s, info);
    for (int it = 1; it <= opts.max_iter; ++it) {
        rep.iterations = it;
        double snorm = projected_norm(tau2, rho, s);
        if ((snorm < opts.score_tol ||
             newton_decrement(tau2, rho, s, info) < 1e-9 * (1.0 + std::fabs(ll))) &&
            std::fabs(ll - ll_prev) < opts.rel_ll_tol * (1.0 + std::fabs(ll))) {
            rep.converged = true;
            break;
        }
        ll_prev = ll;

        Eigen::Vector2d step;
        Eigen::Matrix2d reg = info;
        reg(0, 0) += 1e-12;
        reg(1, 1) += 1e-12;
        step = reg.ldlt().solve(s);
        if (!step.allFinite()) step = s / std::max(info(0, 0), 1e-8);

        // step halving with projection onto the constraint box: the proposal
        // is clamped to the feasible region (so boundary optima are reached
        // exactly) and halved until the log-likelihood does not decrease
        double scale = 1.0;
        bool accepted = false;
        double t2n = tau2, rhn = rho, lln = ll;
        Eigen::VectorXd beta_n;
        Eigen::Vector2d s_n;
        Eigen::Matrix2d info_n;
        for (int h = 0; h <= opts.max_halvings; ++h) {
            t2n = std::max(tau2 + scale * step[0], opts.tau2_floor);
            rhn = spatial ? std::clamp(rho + scale * step[1], -opts.rho_cap, opts.rho_cap) : 0.0;
            if (t2n == tau2 && rhn == rho) break;  // projected step is null
            lln = evaluate(t2n, rhn, true, beta_n, s_n, info_n);
            if (lln >= ll - 1e-13 * (1.0 + std::fabs(ll))) {
                accepted = true;
                break;
            }
            scale *= 0.5;
            ++rep.step_halvings;
        }
        if (!accepted) {
            // no ascent in the scoring direction; call it converged if the
            // projected score or its expected gain is already small
            rep.converged = projected_norm(tau2, rho, s) < opts.score_tol * 100.0 ||
                            newton_decrement(tau2, rho, s, info) < 1e-9 * (1.0 + std::fabs(ll));
            break;
        }
        tau2 = t2n;
        rho = rhn;
        ll = lln;
        beta = beta_n;
        s = s_n;
        info = info_n;
        if (it == opts.max_iter) {
            double sn = projected_norm(tau2, rho, s);
            rep.converged = (sn < opts.score_tol ||
                             newton_decrement(tau2, rho, s, info) < 1e-9 * (1.0 + std::fabs(ll))) &&
                            std::fabs(ll - ll_prev) < opts.rel_ll_tol * (1.0 + std::fabs(ll));
        }
    }

    rep.psi.beta = beta;
    rep.psi.tau2 = tau2;
    rep.psi.rho = rho;
    rep.loglik = ll;
    rep.score_norm = projected_norm(tau2, rho, s);
    return rep;
}

// ---------------------------------------------------------------------------
// Gamma hyperparameters for the sampling variances (marginal ML)

struct GammaFit {
    double shape = 1.0;      // a
    double rate = 1.0;       // b
    double loglik = 0.0;
    double grad_norm = 0.0;
    bool at_boundary = false;
    bool converged = false;
};

struct GammaFitOptions {
    double shape_cap = 1e4;
    double grad_tol = 1e-6;
};

namespace detail {

inline double gamma_hyper_loglik(double a, double b, const std::vector<double>& w2,
                                 const std::vector<int>& n, double* da = nullptr,
                                 double* db = nullptr) {
    const double S = static_cast<double>(w2.size());
    double ll = S * (a * std::log(b) - num::log_gamma(a));
    double ga = S * (std::log(b) - num::digamma(a));
    double gb = S * a / b;
    for (std::size_t k = 0; k < w2.size(); ++k) {
        double h = 0.5 * (n[k] - 1);
        double t = h * w2[k] + b;
        ll += num::log_gamma(h + a) - (h + a) * std::log(t);
        ga += num::digamma(h + a) - std::log(t);
        gb -= (h + a) / t;
    }
    if (da) *da = ga;
    if (db) *db = gb;
    return ll;
}

inline void gamma_hyper_hessian(double a, double b, const std::vector<double>& w2,
                                const std::vector<int>& n, double& haa, double& hab,
                                double& hbb) {
    const double S = static_cast<double>(w2.size());
    haa = -S * num::trigamma(a);
    hab = S / b;
    hbb = -S * a / (b * b);
    for (std::size_t k = 0; k < w2.size(); ++k) {
        double h = 0.5 * (n[k] - 1);
        double t = h * w2[k] + b;
        haa += num::trigamma(h + a);
        hab -= 1.0 / t;
        hbb += (h + a) / (t * t);
    }
}

}  // namespace detail

// Marginal ML for (a, b) in 1/omega_k^2 ~ Gamma(a, b), given unbiased
// variance estimates omega2_hat with sample sizes n.  Quasi-Newton ascent in
// log-parameters inside the box, then a Newton polish when interior.
inline GammaFit fit_gamma_hyper(const std::vector<double>& omega2_hat,
                                const std::vector<int>& n, GammaFitOptions opts = {}) {
    if (omega2_hat.size() != n.size())
        throw std::invalid_argument("fit_gamma_hyper: size mismatch");
    if (omega2_hat.size() < 2)
        throw std::invalid_argument("fit_gamma_hyper: need at least 2 areas");
    for (std::size_t k = 0; k < n.size(); ++k) {
        if (n[k] < 2) throw std::invalid_argument("fit_gamma_hyper: every area needs n >= 2");
        if (!(omega2_hat[k] > 0.0))
            throw std::invalid_argument("fit_gamma_hyper: variances must be positive");
    }

    double mean_w2 = 0.0;
    for (double v : omega2_hat) mean_w2 += v;
    mean_w2 /= static_cast<double>(omega2_hat.size());

    const double la_lo = std::log(1e-6), la_hi = std::log(opts.shape_cap);
    const double lb_lo = std::log(1e-12 * mean_w2 + 1e-300), lb_hi = std::log(1e12 * mean_w2);

    auto f = [&](const Eigen::VectorXd& u, Eigen::VectorXd& g) {
        double a = std::exp(u[0]), b = std::exp(u[1]);
        double da, db;
        double ll = detail::gamma_hyper_loglik(a, b, omega2_hat, n, &da, &db);
        g.resize(2);
        g[0] = da * a;  // chain rule to log-parameters
        g[1] = db * b;
        return ll;
    };

    num::Box box;
    box.lower = Eigen::Vector2d(la_lo, lb_lo);
    box.upper = Eigen::Vector2d(la_hi, lb_hi);
    Eigen::VectorXd u0 = Eigen::Vector2d(std::log(3.0), std::log(2.0 * mean_w2));
    num::MaximizeOptions mo;
    mo.grad_tol = 1e-9;
    mo.max_iter = 1000;
    num::OptimizerResult r = num::maximize_box(f, u0, box, mo);

    double a = std::exp(r.argmax[0]), b = std::exp(r.argmax[1]);
    GammaFit fit;
    fit.at_boundary = a >= opts.shape_cap * (1.0 - 1e-9);
    if (!fit.at_boundary) {
        // Newton polish in (a, b) with the analytic Hessian
        for (int it = 0; it < 50; ++it) {
            double da, db, haa, hab, hbb;
            detail::gamma_hyper_loglik(a, b, omega2_hat, n, &da, &db);
            detail::gamma_hyper_hessian(a, b, omega2_hat, n, haa, hab, hbb);
            double det = haa * hbb - hab * hab;
            if (std::fabs(det) < 1e-300) break;
            double sa = (hbb * da - hab * db) / det;
            double sb = (haa * db - hab * da) / det;
            double an = a - sa, bn = b - sb;
            if (!(an > 0.0) || !(bn > 0.0) || an > opts.shape_cap) break;
            if (std::fabs(an - a) < 1e-14 * a && std::fabs(bn - b) < 1e-14 * b) {
                a = an; b = bn;
                break;
            }
            a = an;
            b = bn;
        }
        a = std::min(a, opts.shape_cap);
    }
    double da, db;
    fit.loglik = detail::gamma_hyper_loglik(a, b, omega2_hat, n, &da, &db);
    fit.shape = a;
    fit.rate = b;
    fit.grad_norm = std::hypot(fit.at_boundary ? 0.0 : da, db);
    fit.converged = fit.grad_norm < opts.grad_tol || fit.at_boundary;
    return fit;
}

// ---------------------------------------------------------------------------
// Leave-one-out priors

struct AreaPriors {
    NormalPrior normal;
    std::optional<PrecisionPrior> precision;  // for areas with estimated variance
    bool fallback = false;                    // fit failed; use the direct interval
    std::string warning;
};

// For every area j: fit the linking model on the other areas (warm-started
// from the full-table fit), plug in their EBLUP values, and read off the
// conditional prior for theta_j.  For areas with estimated variances, a
// gamma hyperparameter fit on the other areas yields the precision prior
// Gamma(a, b / n_j) for 1/sigma_j^2.  By construction nothing returned for
// area j depends on y_j or sigma2_hat_j.
inline std::vector<AreaPriors> leave_one_out_priors(const AreaTable& table,
                                                    const LinkingSpec& spec,
                                                    FitOptions fit_opts = {}) {
    table.validate();
    const int m = table.size();
    if (spec.spatial() && !table.W)
        throw std::invalid_argument("leave_one_out_priors: spatial variant requires a proximity matrix");
    Eigen::MatrixXd Wfull = table.W ? *table.W : Eigen::MatrixXd();
    Eigen::MatrixXd Xfull = table.design(spec);

    const bool t_mode = !table.areas.empty() && !table.areas.front().variance_known();

    std::vector<AreaPriors> out(m);
    for (int j = 0; j < m; ++j) {
        AreaPriors& pj = out[j];
        if (!table.areas[j].interval_eligible()) {
            pj.fallback = true;
            pj.warning = "area ineligible for interval construction";
            continue;
        }
        try {
            AreaTable sub = table.without(j);
            Eigen::MatrixXd Xs = sub.design(spec);
            Eigen::VectorXd Ds = sub.sampling_variances();
            Eigen::MatrixXd Ws = sub.W ? *sub.W : Eigen::MatrixXd();
            FitReport fit = fit_ml(sub.y(), Xs, Ws, Ds, spec, fit_opts);
            if (!fit.converged) throw std::runtime_error("leave-one-out fit did not converge");
            pj.normal = marginal_conditional_prior(j, sub.y(), Ds, fit.psi, Xfull, Wfull);
        } catch (const std::exception& e) {
            pj.fallback = true;
            pj.warning = e.what();
            continue;
        }
        if (t_mode) {
            try {
                std::vector<double> w2;
                std::vector<int> ns;
                for (int k = 0; k < m; ++k) {
                    if (k == j) continue;
                    const auto& a = table.areas[k];
                    if (a.sigma2_hat && a.n && *a.n >= 2) {
                        w2.push_back(*a.sigma2_hat * *a.n);
                        ns.push_back(*a.n);
                    }
                }
                GammaFit gf = fit_gamma_hyper(w2, ns);
                int nj = table.areas[j].n.value_or(0);
                if (nj < 1) throw std::runtime_error("area has no sample size");
                pj.precision = PrecisionPrior{gf.shape, gf.rate / static_cast<double>(nj)};
            } catch (const std::exception& e) {
                pj.fallback = true;
                pj.warning = e.what();
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Empirical-Bayes conditional moments with a second-order MSE adjustment

struct EbMoments {
    Eigen::VectorXd center;  // EBLUP
    Eigen::VectorXd naive_var;  // plug-in conditional variance (g1)
    Eigen::VectorXd mse;        // g1 + g2 + 2 g3
};

// Per-area EBLUP and its estimated MSE under plug-in hyperparameters:
//   g1 = (G - G V^-1 G)_jj                      conditional variance,
//   g2 = d_j' (X'V^-1X)^-1 d_j                  beta estimation,
//   g3 = D_jj^2 sum_kl Iinv_kl (M_k V M_l)_jj   psi estimation,
// with M_k = V^-1 (dV/dpsi_k) V^-1 and Iinv the inverse information of the
// variance-parameter estimator.
inline EbMoments eb_moments(const HyperParams& psi, const Eigen::VectorXd& y,
                            const Eigen::MatrixXd& X, const Eigen::MatrixXd& W,
                            const Eigen::VectorXd& D, bool spatial,
                            const Eigen::Matrix2d& info_inv) {
    const int m = static_cast<int>(y.size());
    Eigen::MatrixXd G = (spatial && psi.rho != 0.0)
                            ? sar_covariance(psi.tau2, psi.rho, W).G
                            : Eigen::MatrixXd(psi.tau2 * Eigen::MatrixXd::Identity(m, m));
    Eigen::MatrixXd V = G;
    V.diagonal() += D;
    Eigen::LLT<Eigen::MatrixXd> llt(V);
    if (llt.info() != Eigen::Success) throw std::runtime_error("eb_moments: V not SPD");
    Eigen::MatrixXd Vinv = llt.solve(Eigen::MatrixXd::Identity(m, m));

    const int p = static_cast<int>(X.cols());
    Eigen::LLT<Eigen::MatrixXd> lltB;
    if (p > 0) lltB.compute(X.transpose() * (Vinv * X));
    Eigen::VectorXd r = y - X * psi.beta;

    EbMoments mo;
    mo.center = X * psi.beta + G * (Vinv * r);

    Eigen::MatrixXd GV = G * Vinv;
    Eigen::MatrixXd cond = G - GV * G;  // g1 for all areas on the diagonal

    // dV/dtau2 = G / tau2 (both SAR and iid cases); dV/drho = A
    Eigen::MatrixXd M1 = Vinv * (G / psi.tau2) * Vinv;
    Eigen::MatrixXd M2;
    if (spatial) {
        Eigen::MatrixXd S = Eigen::MatrixXd::Identity(m, m) - psi.rho * W;
        Eigen::MatrixXd C = S * S.transpose();
        Eigen::MatrixXd Cinv = C.llt().solve(Eigen::MatrixXd::Identity(m, m));
        Eigen::MatrixXd B = W + W.transpose() - 2.0 * psi.rho * W * W.transpose();
        Eigen::MatrixXd A = psi.tau2 * (Cinv * (B * Cinv));
        M2 = Vinv * A * Vinv;
    }

    Eigen::MatrixXd N11 = M1 * V * M1;
    Eigen::MatrixXd N12, N22;
    if (spatial) {
        N12 = M1 * V * M2;
        N22 = M2 * V * M2;
    }

    mo.naive_var.resize(m);
    mo.mse.resize(m);
    for (int j = 0; j < m; ++j) {
        double g1 = cond(j, j);
        double g2 = 0.0;
        if (p > 0) {
            Eigen::VectorXd d = X.row(j).transpose() - X.transpose() * GV.row(j).transpose();
            g2 = d.dot(lltB.solve(d));
        }
        double dj2 = D[j] * D[j];
        double g3 = dj2 * info_inv(0, 0) * N11(j, j);
        if (spatial)
            g3 += dj2 * (2.0 * info_inv(0, 1) * N12(j, j) + info_inv(1, 1) * N22(j, j));
        mo.naive_var[j] = g1;
        mo.mse[j] = g1 + g2 + 2.0 * g3;
    }
    return mo;
}

}  // namespace fab
