// Command-line interface: model fitting, interval construction, simulation
// studies, coverage curves, and household-data ingestion.
//
// Exit codes: 0 success, 1 input error, 2 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <fab/fab.hpp>

namespace {

using nlohmann::json;

struct input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

fab::LinkingSpec parse_spec(const std::string& s) {
    if (s == "exchangeable") return {fab::ModelVariant::Exchangeable};
    if (s == "covariate") return {fab::ModelVariant::Covariate};
    if (s == "spatial") return {fab::ModelVariant::Spatial};
    if (s == "full") return {fab::ModelVariant::Full};
    throw input_error("unknown --spec '" + s + "'");
}

fab::Method parse_method(const std::string& s) {
    if (s == "direct") return fab::Method::Direct;
    if (s == "bayes") return fab::Method::Bayes;
    if (s == "eb") return fab::Method::EB;
    if (s == "fab-z") return fab::Method::FABz;
    if (s == "fab-t") return fab::Method::FABt;
    throw input_error("unknown --method '" + s + "'");
}

// --w accepts lattice:RxC, csv:path, or sqexp (squared-exponential proximity
// from the table's centroids).
void attach_proximity(fab::AreaTable& table, const std::string& wspec) {
    if (wspec.empty()) return;
    if (wspec.rfind("lattice:", 0) == 0) {
        std::string dims = wspec.substr(8);
        auto xpos = dims.find('x');
        if (xpos == std::string::npos) throw input_error("--w lattice:RxC expected");
        int r = 0, c = 0;
        try {
            r = std::stoi(dims.substr(0, xpos));
            c = std::stoi(dims.substr(xpos + 1));
        } catch (const std::exception&) {
            throw input_error("--w lattice:RxC expected");
        }
        Eigen::MatrixXd W = fab::lattice_contiguity(r, c);
        fab::row_standardize(W);
        if (W.rows() != table.size())
            throw input_error("--w lattice dimension does not match the number of areas");
        table.W = std::move(W);
    } else if (wspec.rfind("csv:", 0) == 0) {
        Eigen::MatrixXd W;
        try {
            W = fab::read_proximity_csv(wspec.substr(4));
        } catch (const std::exception& e) {
            throw input_error(e.what());
        }
        if (W.rows() != table.size())
            throw input_error("--w csv dimension does not match the number of areas");
        bool standardized = true;
        for (int i = 0; i < W.rows() && standardized; ++i) {
            double s = W.row(i).sum();
            if (s > 0.0 && std::fabs(s - 1.0) > 1e-12) standardized = false;
        }
        if (!standardized) {
            std::cerr << "warning: proximity matrix not row-standardized; standardizing\n";
            fab::row_standardize(W);
        }
        table.W = std::move(W);
    } else if (wspec == "sqexp") {
        std::vector<std::pair<double, double>> cents;
        for (const auto& a : table.areas) {
            if (!a.centroid) throw input_error("--w sqexp requires lon/lat for every area");
            cents.push_back(*a.centroid);
        }
        Eigen::MatrixXd W = fab::sqexp_proximity(cents);
        table.W = std::move(W);
    } else {
        throw input_error("unknown --w '" + wspec + "' (expected lattice:RxC, csv:path, sqexp)");
    }
}

std::unique_ptr<std::ostream> open_output(const std::string& path) {
    if (path.empty() || path == "-") return nullptr;  // nullptr means stdout
    auto f = std::make_unique<std::ofstream>(path);
    if (!*f) throw input_error("cannot open " + path + " for writing");
    return f;
}

std::ostream& out_stream(const std::unique_ptr<std::ostream>& f) {
    return f ? *f : std::cout;
}

fab::AreaTable load_table(const std::string& path, const std::string& wspec) {
    fab::AreaTable table;
    try {
        table = fab::read_area_csv(path);
    } catch (const std::exception& e) {
        throw input_error(e.what());
    }
    attach_proximity(table, wspec);
    try {
        table.validate();
    } catch (const std::exception& e) {
        throw input_error(e.what());
    }
    return table;
}

// ---------------------------------------------------------------------------

int cmd_fit(const std::string& data, const std::string& spec_str, const std::string& wspec,
            const std::string& out_path) {
    fab::LinkingSpec spec = parse_spec(spec_str);
    fab::AreaTable table = load_table(data, wspec);
    if (spec.spatial() && !table.W) throw input_error("spatial spec requires --w");

    fab::FitReport rep = fab::fit_ml(table.y(), table.design(spec),
                                     table.W ? *table.W : Eigen::MatrixXd(),
                                     table.sampling_variances(), spec);
    json j;
    j["schema_version"] = 1;
    j["spec"] = spec_str;
    j["beta"] = std::vector<double>(rep.psi.beta.data(), rep.psi.beta.data() + rep.psi.beta.size());
    j["tau2"] = rep.psi.tau2;
    if (spec.spatial()) j["rho"] = rep.psi.rho;
    j["loglik"] = rep.loglik;
    j["score_norm"] = rep.score_norm;
    j["iterations"] = rep.iterations;
    j["converged"] = rep.converged;
    j["step_halvings"] = rep.step_halvings;
    auto f = open_output(out_path);
    out_stream(f) << j.dump(2) << "\n";
    if (!rep.converged) {
        std::cerr << "warning: fit did not converge (score_norm=" << rep.score_norm << ")\n";
        return 2;
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct IntervalRow {
    std::string id;
    double y, sigma;
    fab::Interval ci;
    double prior_mu = fab::num::nan, prior_tau2 = fab::num::nan;
};

void emit_intervals(std::ostream& out, const std::vector<IntervalRow>& rows,
                    const std::string& format) {
    if (format == "json") {
        json arr = json::array();
        for (const auto& r : rows) {
            json j;
            j["area_id"] = r.id;
            j["y"] = r.y;
            j["sigma"] = r.sigma;
            j["lower"] = r.ci.lower;
            j["upper"] = r.ci.upper;
            j["width"] = r.ci.width();
            j["method"] = fab::method_name(r.ci.method);
            if (std::isfinite(r.prior_mu)) {
                j["prior_mu"] = r.prior_mu;
                j["prior_tau2"] = r.prior_tau2;
            }
            arr.push_back(j);
        }
        json top;
        top["schema_version"] = 1;
        top["intervals"] = arr;
        out << top.dump(2) << "\n";
        return;
    }
    out << "area_id,y,sigma,lower,upper,width,method,prior_mu,prior_tau2\n";
    out.precision(12);
    for (const auto& r : rows) {
        out << r.id << ',' << r.y << ',' << r.sigma << ',' << r.ci.lower << ',' << r.ci.upper
            << ',' << r.ci.width() << ',' << fab::method_name(r.ci.method) << ',';
        if (std::isfinite(r.prior_mu)) out << r.prior_mu;
        out << ',';
        if (std::isfinite(r.prior_tau2)) out << r.prior_tau2;
        out << "\n";
    }
}

// Single-fit shortcut: hyperparameters fitted once on the full table, priors
// still conditional on the other areas' EBLUP values.  Coverage is no longer
// exactly area-specific because the prior depends (weakly) on y_j.
std::vector<fab::AreaPriors> single_fit_priors(const fab::AreaTable& table,
                                               const fab::LinkingSpec& spec) {
    Eigen::MatrixXd X = table.design(spec);
    Eigen::MatrixXd W = table.W ? *table.W : Eigen::MatrixXd();
    Eigen::VectorXd D = table.sampling_variances();
    fab::FitReport fit = fab::fit_ml(table.y(), X, W, D, spec);
    if (!fit.converged) throw std::runtime_error("single-fit: full-table fit did not converge");
    Eigen::VectorXd theta = fab::eblup(fit.psi, table.y(), X, W, D);
    std::vector<fab::AreaPriors> out(table.size());
    for (int j = 0; j < table.size(); ++j) {
        Eigen::VectorXd theta_minus(table.size() - 1);
        for (int i = 0, k = 0; i < table.size(); ++i)
            if (i != j) theta_minus[k++] = theta[i];
        out[j].normal = fab::conditional_prior(j, theta_minus, fit.psi, X, W);
    }
    if (!table.areas.empty() && !table.areas.front().variance_known()) {
        std::vector<double> w2;
        std::vector<int> ns;
        for (const auto& a : table.areas)
            if (a.sigma2_hat && a.n && *a.n >= 2) {
                w2.push_back(*a.sigma2_hat * *a.n);
                ns.push_back(*a.n);
            }
        fab::GammaFit gf = fab::fit_gamma_hyper(w2, ns);
        for (int j = 0; j < table.size(); ++j) {
            int nj = table.areas[j].n.value_or(0);
            if (nj >= 1) out[j].precision = fab::PrecisionPrior{gf.shape, gf.rate / nj};
        }
    }
    return out;
}

int cmd_intervals(const std::string& data, const std::string& spec_str,
                  const std::string& method_str, double alpha, const std::string& wspec,
                  const std::string& out_path, const std::string& format, bool single_fit) {
    fab::LinkingSpec spec = parse_spec(spec_str);
    fab::Method method = parse_method(method_str);
    fab::AreaTable table = load_table(data, wspec);
    if (spec.spatial() && !table.W && method != fab::Method::Direct)
        throw input_error("spatial spec requires --w");
    if (!(alpha > 0.0 && alpha < 0.5)) throw input_error("--alpha must be in (0, 0.5)");

    auto area_sigma = [](const fab::AreaDatum& a) {
        return std::sqrt(a.sigma2 ? *a.sigma2 : a.sigma2_hat.value_or(fab::num::nan));
    };

    std::vector<IntervalRow> rows;
    switch (method) {
        case fab::Method::Direct: {
            for (const auto& a : table.areas) {
                IntervalRow r{a.id, a.y, area_sigma(a), {}, fab::num::nan, fab::num::nan};
                if (a.sigma2)
                    r.ci = fab::direct_interval(a.y, std::sqrt(*a.sigma2), alpha);
                else if (a.sigma2_hat)
                    r.ci = fab::direct_t_interval(a.y, std::sqrt(*a.sigma2_hat), *a.dof, alpha);
                else {
                    std::cerr << "warning: area " << a.id << " has no variance; skipped\n";
                    continue;
                }
                rows.push_back(r);
            }
            break;
        }
        case fab::Method::Bayes:
        case fab::Method::EB: {
            fab::EbOptions eo;
            eo.second_order = (method == fab::Method::EB);
            std::vector<fab::Interval> cis = fab::eb_interval(table, spec, alpha, eo);
            double z = fab::num::norm_quantile(1.0 - 0.5 * alpha);
            for (int j = 0; j < table.size(); ++j) {
                const auto& a = table.areas[j];
                IntervalRow r{a.id, a.y, area_sigma(a), cis[j], 0.0, 0.0};
                r.prior_mu = 0.5 * (cis[j].lower + cis[j].upper);
                double hw = 0.5 * cis[j].width() / z;
                r.prior_tau2 = hw * hw;
                rows.push_back(r);
            }
            break;
        }
        case fab::Method::FABz:
        case fab::Method::FABt: {
            std::vector<fab::AreaPriors> priors =
                single_fit ? single_fit_priors(table, spec)
                           : fab::leave_one_out_priors(table, spec);
            if (single_fit)
                std::cerr << "warning: --single-fit reuses one hyperparameter fit for all "
                             "areas; exact area-specific coverage is no longer guaranteed\n";
            for (int j = 0; j < table.size(); ++j) {
                const auto& a = table.areas[j];
                IntervalRow r{a.id, a.y, area_sigma(a), {}, fab::num::nan, fab::num::nan};
                if (priors[j].fallback) {
                    std::cerr << "warning: area " << a.id << " falls back to the direct interval"
                              << (priors[j].warning.empty() ? "" : ": " + priors[j].warning)
                              << "\n";
                    if (a.sigma2)
                        r.ci = fab::direct_interval(a.y, std::sqrt(*a.sigma2), alpha);
                    else if (a.sigma2_hat && a.dof)
                        r.ci = fab::direct_t_interval(a.y, std::sqrt(*a.sigma2_hat), *a.dof,
                                                      alpha);
                    else {
                        std::cerr << "warning: area " << a.id << " has no variance; skipped\n";
                        continue;
                    }
                } else if (method == fab::Method::FABz) {
                    double sigma;
                    if (a.sigma2) {
                        sigma = std::sqrt(*a.sigma2);
                    } else {
                        sigma = std::sqrt(*a.sigma2_hat);
                        std::cerr << "warning: area " << a.id
                                  << " uses plug-in sigma for fab-z; consider fab-t\n";
                    }
                    r.ci = fab::fab_z_interval(a.y, sigma, priors[j].normal, alpha);
                    r.prior_mu = priors[j].normal.mu;
                    r.prior_tau2 = priors[j].normal.tau2;
                } else {  // FABt
                    if (!a.sigma2_hat || !a.dof || !priors[j].precision) {
                        std::cerr << "warning: area " << a.id
                                  << " lacks an estimated variance for fab-t; skipped\n";
                        continue;
                    }
                    r.ci = fab::fab_t_interval(a.y, std::sqrt(*a.sigma2_hat), *a.dof,
                                               priors[j].normal, *priors[j].precision, alpha);
                    r.prior_mu = priors[j].normal.mu;
                    r.prior_tau2 = priors[j].normal.tau2;
                }
                rows.push_back(r);
            }
            break;
        }
    }
    auto f = open_output(out_path);
    emit_intervals(out_stream(f), rows, format);
    return 0;
}

// ---------------------------------------------------------------------------

void emit_sim_csv(std::ostream& out, const std::vector<fab::SimResult>& results, bool header) {
    if (header)
        out << "tau2,beta,rho,m,reps,seed,procedure,mean_width,se_width,rel_width,se_rel,"
               "frac_narrower,se_frac,coverage,se_cov,failed_reps\n";
    out.precision(12);
    for (const auto& res : results)
        for (const auto& p : res.procedures)
            out << res.setting.tau2 << ',' << res.setting.beta << ',' << res.setting.rho << ','
                << res.setting.m << ',' << res.n_reps << ',' << res.setting.seed << ','
                << p.procedure << ',' << p.mean_width << ',' << p.se_width << ',' << p.rel_width
                << ',' << p.se_rel << ',' << p.frac_narrower << ',' << p.se_frac << ','
                << p.coverage << ',' << p.se_cov << ',' << p.failed_reps << "\n";
}

void emit_sim_json(std::ostream& out, const std::vector<fab::SimResult>& results) {
    json arr = json::array();
    for (const auto& res : results) {
        json r;
        r["setting"] = {{"tau2", res.setting.tau2}, {"beta", res.setting.beta},
                        {"rho", res.setting.rho},  {"m", res.setting.m},
                        {"reps", res.n_reps},      {"seed", res.setting.seed}};
        json procs = json::array();
        for (const auto& p : res.procedures)
            procs.push_back({{"procedure", p.procedure},
                             {"mean_width", p.mean_width},
                             {"se_width", p.se_width},
                             {"rel_width", p.rel_width},
                             {"se_rel", p.se_rel},
                             {"frac_narrower", p.frac_narrower},
                             {"se_frac", p.se_frac},
                             {"coverage", p.coverage},
                             {"se_cov", p.se_cov},
                             {"failed_reps", p.failed_reps}});
        r["procedures"] = procs;
        arr.push_back(r);
    }
    json top;
    top["schema_version"] = 1;
    top["results"] = arr;
    out << top.dump(2) << "\n";
}

int cmd_simulate(const std::string& preset, double tau2, double beta, double rho, int m,
                 int reps, std::uint64_t seed, double alpha, bool with_eb,
                 const std::vector<std::string>& spec_strs, int threads,
                 const std::string& out_path, const std::string& format) {
    // the simulated linking models are zero-mean given the covariate, so the
    // fitted models drop the intercept to match
    std::vector<fab::LinkingSpec> specs;
    for (const auto& s : spec_strs) {
        fab::LinkingSpec sp = parse_spec(s);
        sp.intercept = false;
        specs.push_back(sp);
    }

    fab::StudyOptions opts;
    opts.alpha = alpha;
    opts.threads = threads;

    auto f = open_output(out_path);
    std::ostream& out = out_stream(f);

    if (preset == "figure1") {
        // coverage curves for the two Figure-1 settings
        out << "tau2,beta,rho,procedure,bin_lo,bin_hi,n,coverage,se\n";
        out.precision(12);
        std::vector<fab::SimSetting> settings(2);
        settings[0].rho = 0.0; settings[0].beta = 10.0; settings[0].tau2 = 5.0;
        settings[1].rho = 0.0; settings[1].beta = 0.0; settings[1].tau2 = 0.5;
        for (auto& st : settings) {
            st.m = m;
            st.n_reps = reps;
            st.seed = seed;
            fab::LinkingSpec full{fab::ModelVariant::Full};
            full.intercept = false;
            struct Curve { const char* name; fab::Method method; };
            for (Curve c : {Curve{"direct", fab::Method::Direct},
                            Curve{"eb:full", fab::Method::EB},
                            Curve{"fab:full", fab::Method::FABz}}) {
                auto bins = fab::coverage_curve(c.method, full, st, alpha, 0.5, 4.0, threads);
                for (const auto& b : bins) {
                    out << st.tau2 << ',' << st.beta << ',' << st.rho << ',' << c.name << ','
                        << b.lo << ',' << b.hi << ',' << b.n << ',';
                    if (b.n > 0) out << b.coverage() << ',' << b.se();
                    else out << ',';
                    out << "\n";
                }
            }
        }
        return 0;
    }

    std::vector<fab::SimSetting> settings;
    if (preset.empty()) {
        fab::SimSetting s;
        s.tau2 = tau2; s.beta = beta; s.rho = rho; s.m = m; s.n_reps = reps; s.seed = seed;
        settings.push_back(s);
    } else if (preset == "table1" || preset == "table2" || preset == "table3") {
        if (specs.empty())
            for (const char* n : {"exchangeable", "covariate", "spatial", "full"}) {
                fab::LinkingSpec sp = parse_spec(n);
                sp.intercept = false;
                specs.push_back(sp);
            }
        with_eb = with_eb || preset == "table3";
        for (double t2 : {0.5, 5.0})
            for (double b : {0.0, 10.0})
                for (double r : {0.0, 0.9}) {
                    fab::SimSetting s;
                    s.tau2 = t2; s.beta = b; s.rho = r; s.m = m; s.n_reps = reps; s.seed = seed;
                    settings.push_back(s);
                }
    } else {
        throw input_error("unknown --preset '" + preset + "'");
    }
    if (specs.empty()) {
        fab::LinkingSpec sp = parse_spec("exchangeable");
        sp.intercept = false;
        specs.push_back(sp);
    }
    opts.with_eb = with_eb;

    std::vector<fab::SimResult> results;
    for (const auto& st : settings) results.push_back(fab::run_width_study(st, specs, opts));
    if (format == "json")
        emit_sim_json(out, results);
    else
        emit_sim_csv(out, results, true);
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_coverage(const std::string& method_str, const std::string& spec_str, double tau2,
                 double beta, double rho, int m, int reps, std::uint64_t seed, double alpha,
                 double bin_width, int threads, const std::string& out_path) {
    fab::Method method = parse_method(method_str);
    fab::LinkingSpec spec = parse_spec(spec_str);
    spec.intercept = false;  // simulated linking models are zero-mean
    fab::SimSetting st;
    st.tau2 = tau2; st.beta = beta; st.rho = rho; st.m = m; st.n_reps = reps; st.seed = seed;

    auto bins = fab::coverage_curve(method, spec, st, alpha, bin_width, 4.0, threads);
    auto f = open_output(out_path);
    std::ostream& out = out_stream(f);
    bool analytic = method == fab::Method::Bayes || method == fab::Method::EB;
    out << "bin_lo,bin_hi,n,coverage,se" << (analytic ? ",analytic" : "") << "\n";
    out.precision(12);
    for (const auto& b : bins) {
        out << b.lo << ',' << b.hi << ',' << b.n << ',';
        if (b.n > 0) out << b.coverage() << ',' << b.se();
        else out << ',';
        if (analytic) {
            double mid = 0.5 * (b.lo + b.hi);
            out << ',' << fab::credible_coverage(mid, 1.0, tau2, alpha);
        }
        out << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_ingest(const std::string& data, bool log_transform, double offset, int min_n,
               const std::string& out_path) {
    fab::IngestConfig cfg;
    cfg.log_transform = log_transform;
    cfg.offset = offset;
    cfg.min_n = min_n;
    fab::AreaTable table;
    try {
        table = fab::ingest_household_csv(data, cfg);
    } catch (const std::exception& e) {
        throw input_error(e.what());
    }
    int ineligible = 0;
    for (const auto& a : table.areas)
        if (!a.interval_eligible()) ++ineligible;
    if (ineligible > 0)
        std::cerr << "warning: " << ineligible
                  << " area(s) have n < 2 and are interval-ineligible\n";
    auto f = open_output(out_path);
    fab::write_area_csv(out_stream(f), table);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FAB confidence intervals for small-area means"};
    app.require_subcommand(1);

    std::string data, spec_str = "exchangeable", method_str = "direct", wspec, out_path, format =
        "csv", preset;
    double alpha = 0.05, tau2 = 0.5, beta = 0.0, rho = 0.0, offset = 0.0, bin_width = 0.5;
    int m = 49, reps = 2000, threads = 1, min_n = 1;
    std::uint64_t seed = 1;
    bool single_fit = false, with_eb = false, log_transform = false;
    std::vector<std::string> spec_list;

    auto* fit = app.add_subcommand("fit", "Fit linking-model hyperparameters by ML");
    fit->add_option("--data", data, "area-level CSV")->required();
    fit->add_option("--spec", spec_str, "exchangeable|covariate|spatial|full");
    fit->add_option("--w", wspec, "proximity: lattice:RxC, csv:path, sqexp");
    fit->add_option("--out", out_path, "output path (default stdout)");

    auto* itv = app.add_subcommand("intervals", "Per-area confidence intervals");
    itv->add_option("--data", data, "area-level CSV")->required();
    itv->add_option("--spec", spec_str, "exchangeable|covariate|spatial|full");
    itv->add_option("--method", method_str, "direct|bayes|eb|fab-z|fab-t");
    itv->add_option("--alpha", alpha, "miscoverage level");
    itv->add_option("--w", wspec, "proximity: lattice:RxC, csv:path, sqexp");
    itv->add_option("--out", out_path, "output path (default stdout)");
    itv->add_option("--format", format, "csv|json");
    itv->add_flag("--single-fit", single_fit, "fit hyperparameters once (coverage caveat)");

    auto* sim = app.add_subcommand("simulate", "Monte Carlo width studies");
    sim->add_option("--preset", preset, "table1|table2|table3|figure1");
    sim->add_option("--tau2", tau2, "linking variance");
    sim->add_option("--beta", beta, "covariate coefficient");
    sim->add_option("--rho", rho, "spatial autocorrelation");
    sim->add_option("--m", m, "number of areas (perfect square)");
    sim->add_option("--reps", reps, "Monte Carlo replications");
    sim->add_option("--seed", seed, "RNG seed");
    sim->add_option("--alpha", alpha, "miscoverage level");
    sim->add_option("--spec", spec_list, "linking model(s), repeatable");
    sim->add_flag("--with-eb", with_eb, "also compute EB intervals");
    sim->add_option("--threads", threads, "worker threads");
    sim->add_option("--out", out_path, "output path (default stdout)");
    sim->add_option("--format", format, "csv|json");

    auto* cov = app.add_subcommand("coverage", "Coverage-vs-theta curves");
    cov->add_option("--method", method_str, "direct|bayes|eb|fab-z");
    cov->add_option("--spec", spec_str, "linking model");
    cov->add_option("--tau2", tau2, "linking variance");
    cov->add_option("--beta", beta, "covariate coefficient");
    cov->add_option("--rho", rho, "spatial autocorrelation");
    cov->add_option("--m", m, "number of areas");
    cov->add_option("--reps", reps, "Monte Carlo replications");
    cov->add_option("--seed", seed, "RNG seed");
    cov->add_option("--alpha", alpha, "miscoverage level");
    cov->add_option("--bin-width", bin_width, "theta - x'beta bin width");
    cov->add_option("--threads", threads, "worker threads");
    cov->add_option("--out", out_path, "output path (default stdout)");

    auto* ing = app.add_subcommand("ingest", "Aggregate household CSV to area level");
    ing->add_option("--data", data, "household CSV")->required();
    ing->add_flag("--log", log_transform, "log-transform values");
    ing->add_option("--offset", offset, "additive offset before log transform");
    ing->add_option("--min-n", min_n, "drop areas with fewer observations");
    ing->add_option("--out", out_path, "output path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (fit->parsed()) return cmd_fit(data, spec_str, wspec, out_path);
        if (itv->parsed())
            return cmd_intervals(data, spec_str, method_str, alpha, wspec, out_path, format,
                                 single_fit);
        if (sim->parsed())
            return cmd_simulate(preset, tau2, beta, rho, m, reps, seed, alpha, with_eb,
                                spec_list, threads, out_path, format);
        if (cov->parsed())
            return cmd_coverage(method_str, spec_str, tau2, beta, rho, m, reps, seed, alpha,
                                bin_width, threads, out_path);
        if (ing->parsed()) return cmd_ingest(data, log_transform, offset, min_n, out_path);
    } catch (const input_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
