#pragma once

// Seeded Monte Carlo harness: lattice data generation, width comparisons
// across interval procedures and linking models, and coverage-vs-theta
// curves.  All randomness flows through per-replication counter-based
// streams, so results are bit-identical for any thread count.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "domain.hpp"
#include "estimation.hpp"
#include "intervals.hpp"
#include "linking.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace fab {

struct SimSetting {
    double rho = 0.0;
    double tau2 = 0.5;
    double beta = 0.0;
    int m = 49;  // perfect square for the lattice
    int n_reps = 2000;
    std::uint64_t seed = 1;
};

struct Dataset {
    Eigen::VectorXd theta;
    Eigen::VectorXd y;
    Eigen::MatrixXd X;  // m x 1 standardized covariate
    Eigen::MatrixXd W;  // row-standardized lattice contiguity
};

inline std::string spec_name(const LinkingSpec& spec) {
    switch (spec.variant) {
        case ModelVariant::Exchangeable: return "exchangeable";
        case ModelVariant::Covariate: return "covariate";
        case ModelVariant::Spatial: return "spatial";
        case ModelVariant::Full: return "full";
    }
    return "?";
}

// One simulated dataset per the generation recipe: uniform covariate draws,
// sample-standardized (1/(m-1) variance), theta from the SAR linking model,
// y_j ~ N(theta_j, 1).  Deterministic given (seed, rep_index).
inline Dataset gen_dataset(const SimSetting& s, std::uint64_t rep_index) {
    const int m = s.m;
    int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(m))));
    if (side * side != m) throw std::invalid_argument("gen_dataset: m must be a perfect square");

    Dataset d;
    d.W = lattice_contiguity(side, side);
    row_standardize(d.W);

    Rng ru = Rng::stream(s.seed, rep_index, 0);
    Eigen::VectorXd u(m);
    for (int j = 0; j < m; ++j) u[j] = ru.uniform();
    double ubar = u.mean();
    double su = std::sqrt((u.array() - ubar).square().sum() / (m - 1));
    d.X = ((u.array() - ubar) / su).matrix();

    Eigen::VectorXd mean = d.X * s.beta;
    d.theta = mean;
    if (s.tau2 > 0.0) {
        Eigen::MatrixXd G = sar_covariance(s.tau2, s.rho, d.W).G;
        Eigen::LLT<Eigen::MatrixXd> llt(G);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("gen_dataset: linking covariance not positive definite");
        Eigen::MatrixXd L(llt.matrixL());
        Rng rt = Rng::stream(s.seed, rep_index, 1);
        Eigen::VectorXd z(m);
        for (int j = 0; j < m; ++j) z[j] = rt.normal();
        d.theta += L * z;
    }
    Rng ry = Rng::stream(s.seed, rep_index, 2);
    d.y.resize(m);
    for (int j = 0; j < m; ++j) d.y[j] = d.theta[j] + ry.normal();
    return d;
}

inline AreaTable make_table(const Dataset& d) {
    AreaTable t;
    const int m = static_cast<int>(d.y.size());
    t.areas.reserve(m);
    for (int j = 0; j < m; ++j) {
        AreaDatum a;
        a.id = std::to_string(j + 1);
        a.y = d.y[j];
        a.sigma2 = 1.0;
        a.x = {d.X(j, 0)};
        t.areas.push_back(std::move(a));
    }
    t.W = d.W;
    return t;
}

// ---------------------------------------------------------------------------
// Width / coverage study

struct ProcSummary {
    std::string procedure;  // "direct", "fab:<spec>", "eb:<spec>"
    double mean_width = 0.0, se_width = 0.0;
    double rel_width = 1.0, se_rel = 0.0;     // vs the direct interval
    double frac_narrower = 0.0, se_frac = 0.0;
    double coverage = 0.0, se_cov = 0.0;
    int failed_reps = 0;
};

struct SimResult {
    SimSetting setting;
    double alpha = 0.05;
    int n_reps = 0;
    std::vector<ProcSummary> procedures;
};

struct StudyOptions {
    double alpha = 0.05;
    bool with_fab = true;
    bool with_eb = false;
    // the EB benchmark regularizes toward an estimated overall level, so its
    // fit keeps an intercept even when the FAB linking models are zero-mean
    bool eb_intercept = true;
    int threads = 1;
    FitOptions fit;   // leave-one-out (FAB) fits
    EbOptions eb;     // full-table EB fits
};

namespace detail {

struct RepRecord {
    // per procedure: mean width over areas, fraction narrower than direct,
    // fraction of areas covering the truth; NaN row when the fit failed
    std::vector<double> width, frac, cov;
};

inline ProcSummary summarize(const std::string& name, const std::vector<double>& width,
                             const std::vector<double>& frac, const std::vector<double>& cov,
                             double direct_width) {
    ProcSummary p;
    p.procedure = name;
    int used = 0;
    double sw = 0, sw2 = 0, sf = 0, sf2 = 0, sc = 0, sc2 = 0;
    for (std::size_t r = 0; r < width.size(); ++r) {
        if (std::isnan(width[r])) {
            ++p.failed_reps;
            continue;
        }
        ++used;
        sw += width[r];
        sw2 += width[r] * width[r];
        sf += frac[r];
        sf2 += frac[r] * frac[r];
        sc += cov[r];
        sc2 += cov[r] * cov[r];
    }
    if (used == 0) return p;
    double n = used;
    p.mean_width = sw / n;
    p.frac_narrower = sf / n;
    p.coverage = sc / n;
    auto se = [&](double s1, double s2, double mean) {
        double var = std::max(0.0, s2 / n - mean * mean);
        return std::sqrt(var / n);
    };
    p.se_width = se(sw, sw2, p.mean_width);
    p.se_frac = se(sf, sf2, p.frac_narrower);
    p.se_cov = se(sc, sc2, p.coverage);
    p.rel_width = p.mean_width / direct_width;
    p.se_rel = p.se_width / direct_width;
    return p;
}

}  // namespace detail

// Runs the Monte Carlo study: for each replication, builds FAB intervals via
// leave-one-out priors (and optionally EB intervals via the full-table fit)
// under every requested linking model, with sigma_j = 1 known.
inline SimResult run_width_study(const SimSetting& setting,
                                 const std::vector<LinkingSpec>& specs,
                                 const StudyOptions& opts = {}) {
    if (setting.n_reps < 1) throw std::invalid_argument("run_width_study: n_reps must be >= 1");
    const double alpha = opts.alpha;
    const double z = num::norm_quantile(1.0 - 0.5 * alpha);
    const double direct_width = 2.0 * z;
    const int R = setting.n_reps;
    const int S = static_cast<int>(specs.size());
    const int n_proc = 1 + (opts.with_fab ? S : 0) + (opts.with_eb ? S : 0);

    // per-procedure per-replication records, filled independently per rep
    std::vector<detail::RepRecord> rec(n_proc);
    for (auto& r : rec) {
        r.width.assign(R, num::nan);
        r.frac.assign(R, num::nan);
        r.cov.assign(R, num::nan);
    }

    parallel_for(R, opts.threads, [&](int r) {
        Dataset d = gen_dataset(setting, static_cast<std::uint64_t>(r));
        AreaTable table = make_table(d);
        const int m = setting.m;

        // direct
        {
            int hits = 0;
            for (int j = 0; j < m; ++j)
                if (std::fabs(d.y[j] - d.theta[j]) < z) ++hits;
            rec[0].width[r] = direct_width;
            rec[0].frac[r] = 0.0;
            rec[0].cov[r] = static_cast<double>(hits) / m;
        }

        int slot = 1;
        if (opts.with_fab) {
            for (int s = 0; s < S; ++s, ++slot) {
                try {
                    auto priors = leave_one_out_priors(table, specs[s], opts.fit);
                    double sw = 0;
                    int narrower = 0, hits = 0;
                    for (int j = 0; j < m; ++j) {
                        Interval ci = priors[j].fallback
                                          ? direct_interval(d.y[j], 1.0, alpha)
                                          : fab_z_interval(d.y[j], 1.0, priors[j].normal, alpha);
                        sw += ci.width();
                        if (ci.width() < direct_width) ++narrower;
                        if (ci.contains(d.theta[j])) ++hits;
                    }
                    rec[slot].width[r] = sw / m;
                    rec[slot].frac[r] = static_cast<double>(narrower) / m;
                    rec[slot].cov[r] = static_cast<double>(hits) / m;
                } catch (const std::exception&) {
                    // leave NaN: replication excluded for this procedure
                }
            }
        }
        if (opts.with_eb) {
            for (int s = 0; s < S; ++s, ++slot) {
                try {
                    LinkingSpec es = specs[s];
                    es.intercept = opts.eb_intercept;
                    auto cis = eb_interval(table, es, alpha, opts.eb);
                    double sw = 0;
                    int narrower = 0, hits = 0;
                    for (int j = 0; j < m; ++j) {
                        sw += cis[j].width();
                        if (cis[j].width() < direct_width) ++narrower;
                        if (cis[j].contains(d.theta[j])) ++hits;
                    }
                    rec[slot].width[r] = sw / m;
                    rec[slot].frac[r] = static_cast<double>(narrower) / m;
                    rec[slot].cov[r] = static_cast<double>(hits) / m;
                } catch (const std::exception&) {
                }
            }
        }
    });

    SimResult out;
    out.setting = setting;
    out.alpha = alpha;
    out.n_reps = R;
    out.procedures.push_back(
        detail::summarize("direct", rec[0].width, rec[0].frac, rec[0].cov, direct_width));
    int slot = 1;
    if (opts.with_fab)
        for (int s = 0; s < S; ++s, ++slot)
            out.procedures.push_back(detail::summarize("fab:" + spec_name(specs[s]),
                                                       rec[slot].width, rec[slot].frac,
                                                       rec[slot].cov, direct_width));
    if (opts.with_eb)
        for (int s = 0; s < S; ++s, ++slot)
            out.procedures.push_back(detail::summarize("eb:" + spec_name(specs[s]),
                                                       rec[slot].width, rec[slot].frac,
                                                       rec[slot].cov, direct_width));
    return out;
}

// Table-3 style comparison: absolute mean widths of EB (full-table plug-in
// fit) and FAB (leave-one-out) intervals.
inline SimResult run_eb_comparison(const SimSetting& setting,
                                   const std::vector<LinkingSpec>& specs,
                                   StudyOptions opts = {}) {
    opts.with_eb = true;
    return run_width_study(setting, specs, opts);
}

// ---------------------------------------------------------------------------
// Coverage curves (binned in theta - x'beta)

struct CoverageBin {
    double lo = 0.0, hi = 0.0;
    long n = 0, hits = 0;
    double coverage() const { return n > 0 ? static_cast<double>(hits) / n : num::nan; }
    double se() const {
        if (n == 0) return num::nan;
        double p = coverage();
        return std::sqrt(std::max(p * (1.0 - p), 0.0) / n);
    }
};

// Empirical coverage of one procedure as a function of the deviation
// delta_j = theta_j - x_j' beta, binned with the given width.  The Bayes
// procedure uses the true marginal prior (known psi); EB refits per
// replication; FAB uses leave-one-out priors.
inline std::vector<CoverageBin> coverage_curve(Method method, const LinkingSpec& spec,
                                               const SimSetting& setting, double alpha = 0.05,
                                               double bin_width = 0.5, double range = 4.0,
                                               int threads = 1, const StudyOptions& opts = {}) {
    const int n_bins = static_cast<int>(std::lround(2.0 * range / bin_width));
    std::vector<CoverageBin> bins(n_bins);
    for (int b = 0; b < n_bins; ++b) {
        bins[b].lo = -range + b * bin_width;
        bins[b].hi = bins[b].lo + bin_width;
    }
    const double z = num::norm_quantile(1.0 - 0.5 * alpha);
    const int R = setting.n_reps;
    const int m = setting.m;

    // integer per-rep tallies; integer addition keeps the reduction exact and
    // order-independent
    std::vector<std::vector<long>> n_rep(R), h_rep(R);

    // true marginal prior variances for the Bayes procedure
    Eigen::VectorXd marg_var;
    if (method == Method::Bayes) {
        Dataset d0 = gen_dataset(setting, 0);
        if (setting.tau2 <= 0.0)
            throw std::invalid_argument("coverage_curve: Bayes needs tau2 > 0");
        Eigen::MatrixXd G = sar_covariance(setting.tau2, setting.rho, d0.W).G;
        marg_var = G.diagonal();
    }

    parallel_for(R, threads, [&](int r) {
        std::vector<long> nb(n_bins, 0), hb(n_bins, 0);
        Dataset d = gen_dataset(setting, static_cast<std::uint64_t>(r));
        AreaTable table = make_table(d);

        std::vector<AreaPriors> priors;
        std::vector<Interval> ebs;
        bool ok = true;
        try {
            if (method == Method::FABz) priors = leave_one_out_priors(table, spec, opts.fit);
            if (method == Method::EB) {
                LinkingSpec es = spec;
                es.intercept = opts.eb_intercept;
                ebs = eb_interval(table, es, alpha, opts.eb);
            }
        } catch (const std::exception&) {
            ok = false;
        }
        if (ok) {
            for (int j = 0; j < m; ++j) {
                double delta = d.theta[j] - d.X(j, 0) * setting.beta;
                int b = static_cast<int>(std::floor((delta + range) / bin_width));
                if (b < 0 || b >= n_bins) continue;
                bool hit = false;
                switch (method) {
                    case Method::Direct:
                        hit = std::fabs(d.y[j] - d.theta[j]) < z;
                        break;
                    case Method::Bayes: {
                        NormalPrior pr{d.X(j, 0) * setting.beta, marg_var[j]};
                        hit = bayes_interval(d.y[j], 1.0, pr, alpha).contains(d.theta[j]);
                        break;
                    }
                    case Method::EB:
                        hit = ebs[j].contains(d.theta[j]);
                        break;
                    case Method::FABz:
                        hit = priors[j].fallback
                                  ? std::fabs(d.y[j] - d.theta[j]) < z
                                  : fab_z_contains(d.theta[j], d.y[j], 1.0, priors[j].normal,
                                                   alpha);
                        break;
                    case Method::FABt:
                        throw std::invalid_argument("coverage_curve: FAB-t not supported here");
                }
                ++nb[b];
                if (hit) ++hb[b];
            }
        }
        n_rep[r] = std::move(nb);
        h_rep[r] = std::move(hb);
    });

    for (int r = 0; r < R; ++r) {
        if (n_rep[r].empty()) continue;
        for (int b = 0; b < n_bins; ++b) {
            bins[b].n += n_rep[r][b];
            bins[b].hits += h_rep[r][b];
        }
    }
    return bins;
}

}  // namespace fab
