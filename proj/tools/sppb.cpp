// Command line front end: population generation, true-MSE approximation,
// full simulation studies, and single-sample bandwidth selection/estimation.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sppb/sppb.hpp"

namespace {

std::vector<sppb::StratumInfo> parse_strata(const std::string& spec) {
    // "N1:n1,N2:n2,..."
    std::vector<sppb::StratumInfo> out;
    std::size_t pos = 0;
    while (pos < spec.size()) {
        const auto comma = spec.find(',', pos);
        const auto part = spec.substr(pos, comma == std::string::npos ? std::string::npos
                                                                      : comma - pos);
        const auto colon = part.find(':');
        if (colon == std::string::npos)
            throw CLI::ValidationError("--strata", "expected N:n pairs separated by commas");
        out.push_back({std::stoull(part.substr(0, colon)), std::stoull(part.substr(colon + 1))});
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

struct ScenarioArgs {
    std::string pop_csv;
    std::string design = "srswor";
    std::string strata;
    std::size_t n = 0;
    double f = 0.0;
    double p = 0.5;
    std::uint64_t seed = 1;
};

void add_scenario_options(CLI::App* cmd, ScenarioArgs& a) {
    cmd->add_option("--pop", a.pop_csv, "population csv (index,y[,x] columns)")->required();
    cmd->add_option("--design", a.design, "srswor | poisson | randsys_pps | stratified_srswor");
    cmd->add_option("--strata", a.strata, "stratified design blocks as N1:n1,N2:n2,...");
    cmd->add_option("--n", a.n, "sample size")->required();
    cmd->add_option("--f", a.f, "sampling fraction, population N = floor(n/f)")->required();
    cmd->add_option("--p", a.p, "quantile level");
    cmd->add_option("--seed", a.seed, "rng seed");
}

struct Scenario {
    sppb::FinitePopulation pop;
    sppb::detail::HarnessDesign design;
    sppb::RngStream root;
};

Scenario build_scenario(const ScenarioArgs& a) {
    sppb::StudyConfig c;
    c.population.csv_path = a.pop_csv;
    c.design = a.design;
    if (!a.strata.empty()) c.strata = parse_strata(a.strata);
    c.n = a.n;
    c.f = a.f;
    c.p = a.p;
    c.seed = a.seed;
    c.methods.push_back({}); // placeholder so validate() passes
    c.methods.back().label = "UNSMTHD";
    sppb::validate(c);
    sppb::RngStream root(a.seed);
    auto pop = sppb::detail::materialize_population(c, root);
    auto design = sppb::detail::build_design(c, pop);
    return {std::move(pop), std::move(design), root};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"smoothed pseudo-population bootstrap for finite population quantiles"};
    app.require_subcommand(1);

    // ---- gen-pop ----
    auto* gen = app.add_subcommand("gen-pop", "generate a population csv");
    std::string gen_kind = "sym", gen_out = "pop.csv";
    std::size_t gen_size = 7142;
    std::uint64_t gen_seed = 1;
    double g_gamma = 0.6, g_nu = 100.0, g_sigma = 12.0;
    double g_beta = 0.5, g_mu_x = 3.0, g_s2x = 1.0, g_s2e = 1.139;
    gen->add_option("--generator", gen_kind, "sym | asym | normal | lognormal");
    gen->add_option("--size", gen_size, "number of units");
    gen->add_option("--seed", gen_seed, "rng seed");
    gen->add_option("--out", gen_out, "output csv path");
    gen->add_option("--gamma", g_gamma, "sym: slope on the chi-squared size");
    gen->add_option("--nu", g_nu, "sym: chi-squared degrees of freedom");
    gen->add_option("--sigma", g_sigma, "sym: noise standard deviation");
    gen->add_option("--beta", g_beta, "asym: exponent on the size variable");
    gen->add_option("--mu-x", g_mu_x, "asym: log-mean of the size variable");
    gen->add_option("--sigma2-x", g_s2x, "asym: log-variance of the size variable");
    gen->add_option("--sigma2-eps", g_s2e, "asym: log-variance of the noise");

    // ---- true-mse ----
    auto* tmse = app.add_subcommand("true-mse", "approximate the true design MSE of the quantile estimator");
    ScenarioArgs tm_args;
    std::size_t tm_samples = 3000;
    add_scenario_options(tmse, tm_args);
    tmse->add_option("--samples", tm_samples, "Monte Carlo samples");

    // ---- run-study ----
    auto* study = app.add_subcommand("run-study", "run a simulation study from a json config");
    std::string st_config, st_outdir;
    std::uint64_t st_seed = 0;
    bool st_seed_set = false;
    std::size_t st_workers = 0;
    study->add_option("--config", st_config, "config json (a manifest.json replays exactly)")
        ->required();
    study->add_option("--out-dir", st_outdir, "override output directory");
    study->add_option("--seed", st_seed, "override seed")->each([&](const std::string&) {
        st_seed_set = true;
    });
    study->add_option("--workers", st_workers, "override worker threads");

    // ---- select-h ----
    auto* sel = app.add_subcommand("select-h", "double-bootstrap bandwidth selection on one drawn sample");
    ScenarioArgs sel_args;
    double sel_clo = 5.0, sel_chi = 25.0;
    std::size_t sel_m = 10, sel_B = 1000, sel_D = 50;
    add_scenario_options(sel, sel_args);
    sel->add_option("--c-lo", sel_clo, "smallest grid constant");
    sel->add_option("--c-hi", sel_chi, "largest grid constant");
    sel->add_option("--m", sel_m, "grid size");
    sel->add_option("--B", sel_B, "first-level bootstrap replicates");
    sel->add_option("--D", sel_D, "nested replicates per first-level replicate");

    // ---- estimate ----
    auto* est = app.add_subcommand("estimate", "quantile, bootstrap MSE and intervals on one drawn sample");
    ScenarioArgs est_args;
    std::string est_method = "unsmoothed";
    double est_h = -1.0, est_const = -1.0, est_alpha = 0.05;
    double est_clo = 5.0, est_chi = 25.0;
    std::size_t est_m = 10, est_B = 1000, est_D = 50;
    add_scenario_options(est, est_args);
    est->add_option("--method", est_method, "unsmoothed | fixed | plugin | boot");
    est->add_option("--bandwidth", est_h, "fixed: bandwidth");
    est->add_option("--constant", est_const, "fixed: bandwidth constant, h = C n^{-1/5}");
    est->add_option("--alpha", est_alpha, "interval level");
    est->add_option("--c-lo", est_clo, "boot: smallest grid constant");
    est->add_option("--c-hi", est_chi, "boot: largest grid constant");
    est->add_option("--m", est_m, "boot: grid size");
    est->add_option("--B", est_B, "bootstrap replicates");
    est->add_option("--D", est_D, "boot: nested replicates");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            sppb::RngStream rng = sppb::RngStream(gen_seed).derive(sppb::phase::population);
            sppb::FinitePopulation pop;
            if (gen_kind == "sym") pop = sppb::gen_sym(gen_size, rng, g_gamma, g_nu, g_sigma);
            else if (gen_kind == "asym")
                pop = sppb::gen_asym(gen_size, rng, g_beta, g_mu_x, g_s2x, g_s2e);
            else if (gen_kind == "normal") pop = sppb::gen_normal(gen_size, rng);
            else if (gen_kind == "lognormal") pop = sppb::gen_lognormal(gen_size, rng);
            else throw CLI::ValidationError("--generator", "unknown generator " + gen_kind);
            sppb::write_population_csv(pop, gen_out);
            std::cout << "wrote " << pop.size() << " units to " << gen_out << '\n';
        } else if (*tmse) {
            auto sc = build_scenario(tm_args);
            const auto tm = sppb::approximate_true_mse(sc.pop, sc.design.spec, tm_args.p,
                                                       tm_samples,
                                                       sc.root.derive(sppb::phase::true_mse));
            std::cout << "population N = " << sc.pop.size() << '\n'
                      << "quantile     = " << sppb::format_g17(tm.xi) << '\n'
                      << "true MSE     = " << sppb::format_g17(tm.mse) << '\n';
        } else if (*study) {
            std::ifstream in(st_config);
            if (!in) throw std::runtime_error("cannot open config: " + st_config);
            auto cfg = sppb::parse_config(sppb::json::parse(in));
            if (!st_outdir.empty()) cfg.output_dir = st_outdir;
            if (st_seed_set) cfg.seed = st_seed;
            if (st_workers > 0) cfg.workers = st_workers;
            const auto rep = sppb::run_study(cfg);
            sppb::emit_report(rep, cfg.output_dir);
            std::cout << "R = " << cfg.R << ", true MSE = " << sppb::format_g17(rep.true_mse)
                      << ", reports in " << cfg.output_dir << '\n';
            for (const auto& m : rep.metrics)
                std::cout << m.method << ": bias% = " << m.bias_pct
                          << ", rrmse% = " << m.rrmse_pct << '\n';
            std::cerr << "timing: total " << rep.seconds_total << "s (true mse "
                      << rep.seconds_true_mse << "s)\n";
        } else if (*sel) {
            auto sc = build_scenario(sel_args);
            std::uint64_t redraws = 0;
            auto sample_rng = sc.root.derive(sppb::phase::sample, 0);
            const auto s = sppb::detail::draw_sample(sc.design, sc.pop, sample_rng, redraws);
            const auto grid = sppb::make_grid(sel_clo, sel_chi, sel_m,
                                              static_cast<double>(sel_args.n));
            const auto res = sppb::double_bootstrap_select(
                s, sc.design.spec, sppb::QuantileEstimator{sel_args.p}, grid,
                sppb::gaussian_kernel(), sel_B, sel_D,
                sc.root.derive(sppb::phase::method, 0, 0));
            std::cout << "selected constant  = " << sppb::format_g17(res.selected_constant)
                      << '\n'
                      << "selected bandwidth = " << sppb::format_g17(res.selected_bandwidth)
                      << '\n'
                      << "constant,risk,first_level_mse\n";
            for (std::size_t i = 0; i < grid.constants.size(); ++i)
                std::cout << sppb::format_g17(grid.constants[i]) << ','
                          << sppb::format_g17(res.risk[i]) << ','
                          << sppb::format_g17(res.first_level_mse[i]) << '\n';
        } else if (*est) {
            auto sc = build_scenario(est_args);
            std::uint64_t redraws = 0;
            auto sample_rng = sc.root.derive(sppb::phase::sample, 0);
            const auto s = sppb::detail::draw_sample(sc.design, sc.pop, sample_rng, redraws);
            const double theta = sppb::design_quantile(s, est_args.p);
            const sppb::EstimatorSpec q = sppb::QuantileEstimator{est_args.p};
            const auto kernel = sppb::gaussian_kernel();
            const auto stream = sc.root.derive(sppb::phase::method, 0, 0);

            sppb::BootstrapRun run;
            double h = 0.0;
            if (est_method == "unsmoothed") {
                run = sppb::run_algorithm1(s, sc.design.spec, q, 0.0, kernel, est_B, stream);
            } else if (est_method == "fixed") {
                if ((est_h >= 0.0) == (est_const >= 0.0))
                    throw CLI::ValidationError("--method fixed",
                                               "give exactly one of --bandwidth / --constant");
                h = est_h >= 0.0
                        ? est_h
                        : est_const * std::pow(static_cast<double>(est_args.n), -0.2);
                run = sppb::run_algorithm1(s, sc.design.spec, q, h, kernel, est_B, stream);
            } else if (est_method == "plugin") {
                h = sppb::plugin_bandwidth(s, est_args.p, kernel);
                run = sppb::run_algorithm1(s, sc.design.spec, q, h, kernel, est_B, stream);
            } else if (est_method == "boot") {
                const auto grid = sppb::make_grid(est_clo, est_chi, est_m,
                                                  static_cast<double>(est_args.n));
                auto res = sppb::double_bootstrap_select(s, sc.design.spec, q, grid, kernel,
                                                         est_B, est_D, stream);
                h = res.selected_bandwidth;
                run = std::move(res.run_at_selected);
            } else {
                throw CLI::ValidationError("--method", "unknown method " + est_method);
            }
            const double v = sppb::mse_estimate(run);
            const auto ni = sppb::normal_ci(theta, v, est_alpha);
            const auto bi = sppb::basic_ci(theta, run, est_alpha);
            std::cout << "quantile estimate = " << sppb::format_g17(theta) << '\n'
                      << "bandwidth         = " << sppb::format_g17(h) << '\n'
                      << "bootstrap MSE     = " << sppb::format_g17(v) << '\n'
                      << "normal interval   = [" << sppb::format_g17(ni.lo) << ", "
                      << sppb::format_g17(ni.hi) << "]\n"
                      << "basic interval    = [" << sppb::format_g17(bi.lo) << ", "
                      << sppb::format_g17(bi.hi) << "]\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
