#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "sppb/bandwidth.hpp"
#include "sppb/bootstrap.hpp"
#include "sppb/config.hpp"
#include "sppb/design.hpp"
#include "sppb/kernel.hpp"
#include "sppb/popgen.hpp"
#include "sppb/rng.hpp"
#include "sppb/version.hpp"

namespace sppb {

struct TrueMse {
    double mse = 0.0;
    double xi = 0.0; // finite population quantile, the coverage target
};

struct MethodMetrics {
    std::string method;
    double bias_pct = 0.0;
    double rrmse_pct = 0.0;
    double normal_l_pct = 0.0, normal_u_pct = 0.0, normal_two_tail_pct = 0.0;
    double basic_l_pct = 0.0, basic_u_pct = 0.0, basic_two_tail_pct = 0.0;
};

/// Monte Carlo acceptance bands for coverage error: nominal rate +/- 1.96
/// binomial standard errors over R replicates, one decimal.
struct CoverageBands {
    double two_tail_lo = 0.0, two_tail_hi = 0.0;
    double one_tail_lo = 0.0, one_tail_hi = 0.0;
};

inline CoverageBands coverage_bands(std::size_t R, double alpha) {
    const auto band = [R](double rate) {
        const double se = 100.0 * std::sqrt(rate * (1.0 - rate) / static_cast<double>(R));
        const double lo = 100.0 * rate - 1.96 * se;
        const double hi = 100.0 * rate + 1.96 * se;
        return std::pair{std::round(lo * 10.0) / 10.0, std::round(hi * 10.0) / 10.0};
    };
    CoverageBands b;
    std::tie(b.two_tail_lo, b.two_tail_hi) = band(alpha);
    std::tie(b.one_tail_lo, b.one_tail_hi) = band(0.5 * alpha);
    return b;
}

struct ReplicateMethodRow {
    double v_hat = 0.0;
    double h = 0.0;
    double constant = 0.0;
    bool has_constant = false; // plug-in and boot rows only
    Interval normal, basic;
    std::uint64_t empty_redraws = 0;
    std::vector<double> risk; // boot rows only
};

struct StudyReport {
    StudyConfig config;
    double xi = 0.0;
    double true_mse = 0.0;
    CoverageBands bands;
    std::vector<double> theta_hat;                      // one per replicate
    std::vector<std::vector<ReplicateMethodRow>> rows;  // [replicate][method]
    std::vector<MethodMetrics> metrics;                 // one per method
    // label -> (constant, mean risk) for boot methods
    std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> risk_curves;
    std::uint64_t sample_redraws = 0;
    double seconds_total = 0.0, seconds_true_mse = 0.0; // not persisted
};

namespace detail {

/// Universe-level design resolved against a concrete scenario population.
struct HarnessDesign {
    DesignSpec spec;
    DesignKind kind = DesignKind::srswor;
    std::size_t N = 0, n = 0;
    std::vector<StratumInfo> strata;
};

inline HarnessDesign build_design(const StudyConfig& c, const FinitePopulation& pop) {
    HarnessDesign d;
    d.N = pop.size();
    d.n = c.n;
    if (c.design == "srswor") {
        d.kind = DesignKind::srswor;
        d.spec = SrsworDesign{c.n};
    } else if (c.design == "poisson" || c.design == "randsys_pps") {
        if (!pop.has_sizes())
            throw std::invalid_argument("design '" + c.design + "' needs a population size measure");
        auto pi = pps_inclusion_probs(pop.x, c.n);
        if (c.design == "poisson") {
            d.kind = DesignKind::poisson;
            d.spec = PoissonDesign{std::move(pi)};
        } else {
            d.kind = DesignKind::randsys_pps;
            d.spec = RandSysPpsDesign{std::move(pi)};
        }
    } else {
        d.kind = DesignKind::stratified_srswor;
        d.strata = c.strata;
        d.spec = StratifiedSrsworDesign{c.strata};
    }
    return d;
}

/// One sample by the scenario design; empty Poisson samples are redrawn.
inline WeightedSample draw_sample(const HarnessDesign& d, const FinitePopulation& pop,
                                  RngStream& rng, std::uint64_t& empty_redraws) {
    WeightedSample s;
    std::vector<std::uint32_t> idx;
    for (;;) {
        idx = draw(d.spec, d.N, rng);
        if (!idx.empty()) break;
        ++empty_redraws; // only Poisson can come back empty
    }
    s.y.reserve(idx.size());
    s.pi.reserve(idx.size());
    for (auto i : idx) s.y.push_back(pop.y[i]);
    switch (d.kind) {
    case DesignKind::srswor: {
        const double pi = static_cast<double>(d.n) / static_cast<double>(d.N);
        s.pi.assign(idx.size(), pi);
        break;
    }
    case DesignKind::poisson:
        for (auto i : idx) s.pi.push_back(std::get<PoissonDesign>(d.spec).pi[i]);
        break;
    case DesignKind::randsys_pps:
        for (auto i : idx) s.pi.push_back(std::get<RandSysPpsDesign>(d.spec).pi[i]);
        break;
    case DesignKind::stratified_srswor: {
        s.strata = d.strata;
        std::size_t offset = 0, l = 0;
        for (auto i : idx) {
            while (i >= offset + d.strata[l].population_size) {
                offset += d.strata[l].population_size;
                ++l;
            }
            s.stratum.push_back(static_cast<std::uint32_t>(l));
            s.pi.push_back(static_cast<double>(d.strata[l].sample_size) /
                           static_cast<double>(d.strata[l].population_size));
        }
        break;
    }
    }
    return s;
}

inline FinitePopulation materialize_population(const StudyConfig& c, const RngStream& root) {
    FinitePopulation master;
    if (!c.population.csv_path.empty()) {
        master = read_population_csv(c.population.csv_path);
    } else {
        auto rng = root.derive(phase::population);
        const auto& g = c.population;
        if (g.generator == "sym") master = gen_sym(g.size, rng, g.gamma, g.nu, g.sigma);
        else if (g.generator == "asym")
            master = gen_asym(g.size, rng, g.beta, g.mu_x, g.sigma2_x, g.sigma2_eps);
        else if (g.generator == "normal") master = gen_normal(g.size, rng);
        else master = gen_lognormal(g.size, rng);
    }
    const std::size_t N = c.scenario_population_size();
    if (N > master.size())
        throw std::invalid_argument("config: scenario population exceeds the master population");
    return take_prefix(master, N);
}

inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t true_mse_cache_key(const FinitePopulation& pop, const StudyConfig& c) {
    std::uint64_t h = 14695981039346656037ULL;
    h = fnv1a(pop.y.data(), pop.y.size() * sizeof(double), h);
    h = fnv1a(pop.x.data(), pop.x.size() * sizeof(double), h);
    h = fnv1a(c.design.data(), c.design.size(), h);
    for (const auto& st : c.strata) {
        h = fnv1a(&st.population_size, sizeof(st.population_size), h);
        h = fnv1a(&st.sample_size, sizeof(st.sample_size), h);
    }
    h = fnv1a(&c.n, sizeof(c.n), h);
    h = fnv1a(&c.p, sizeof(c.p), h);
    h = fnv1a(&c.mse_samples, sizeof(c.mse_samples), h);
    h = fnv1a(&c.seed, sizeof(c.seed), h);
    return h;
}

} // namespace detail

/// True design MSE of the weighted quantile estimator, approximated by S
/// independent samples from the fixed population.
inline TrueMse approximate_true_mse(const FinitePopulation& pop, const DesignSpec& design,
                                    double p, std::size_t S, const RngStream& rng) {
    if (S == 0) throw std::invalid_argument("approximate_true_mse: S must be positive");
    detail::HarnessDesign d;
    d.spec = design;
    d.kind = design_kind(design);
    d.N = pop.size();
    if (const auto* sr = std::get_if<SrsworDesign>(&design)) d.n = sr->n;
    if (const auto* st = std::get_if<StratifiedSrsworDesign>(&design)) d.strata = st->strata;
    TrueMse out;
    out.xi = finite_population_quantile(pop.y, p);
    KahanSum acc;
    std::uint64_t redraws = 0;
    for (std::size_t s = 0; s < S; ++s) {
        auto sr = rng.derive(phase::sample, s);
        const auto sample = detail::draw_sample(d, pop, sr, redraws);
        const double e = design_quantile(sample, p) - out.xi;
        acc.add(e * e);
    }
    out.mse = acc.value() / static_cast<double>(S);
    return out;
}

namespace detail {

inline ReplicateMethodRow run_method(const MethodSpec& m, const HarnessDesign& d,
                                     const WeightedSample& sample, double theta_hat_r,
                                     const StudyConfig& c, const Kernel& kernel,
                                     const RngStream& stream) {
    const EstimatorSpec est = QuantileEstimator{c.p};
    ReplicateMethodRow row;
    BootstrapRun run;
    switch (m.type) {
    case MethodSpec::Type::unsmoothed:
        row.h = 0.0;
        run = run_algorithm1(sample, d.spec, est, 0.0, kernel, c.B, stream);
        break;
    case MethodSpec::Type::fixed:
        row.h = m.h >= 0.0
                    ? m.h
                    : m.constant * std::pow(static_cast<double>(c.n), -0.2);
        run = run_algorithm1(sample, d.spec, est, row.h, kernel, c.B, stream);
        break;
    case MethodSpec::Type::plugin:
        row.h = plugin_bandwidth(sample, c.p, kernel);
        row.constant = row.h * std::pow(static_cast<double>(sample.size()), 0.2);
        row.has_constant = true;
        run = run_algorithm1(sample, d.spec, est, row.h, kernel, c.B, stream);
        break;
    case MethodSpec::Type::boot: {
        const auto grid = make_grid(m.c_lo, m.c_hi, m.m, static_cast<double>(c.n));
        auto sel = double_bootstrap_select(sample, d.spec, est, grid, kernel, c.B, m.D, stream);
        row.h = sel.selected_bandwidth;
        row.constant = sel.selected_constant;
        row.has_constant = true;
        row.risk = std::move(sel.risk);
        row.empty_redraws = sel.empty_redraws - sel.run_at_selected.empty_redraws;
        run = std::move(sel.run_at_selected);
        break;
    }
    }
    row.v_hat = mse_estimate(run);
    row.normal = normal_ci(theta_hat_r, row.v_hat, c.alpha);
    row.basic = basic_ci(theta_hat_r, run, c.alpha);
    row.empty_redraws += run.empty_redraws;
    return row;
}

inline MethodMetrics summarize_method(const std::string& label, std::size_t mi,
                                      const StudyReport& rep) {
    MethodMetrics mm;
    mm.method = label;
    const double R = static_cast<double>(rep.rows.size());
    KahanSum sum_v, sum_sq;
    std::size_t normal_l = 0, normal_u = 0, basic_l = 0, basic_u = 0;
    for (const auto& rrow : rep.rows) {
        const auto& row = rrow[mi];
        sum_v.add(row.v_hat);
        const double e = row.v_hat - rep.true_mse;
        sum_sq.add(e * e);
        if (rep.xi < row.normal.lo) ++normal_l;
        if (rep.xi > row.normal.hi) ++normal_u;
        if (rep.xi < row.basic.lo) ++basic_l;
        if (rep.xi > row.basic.hi) ++basic_u;
    }
    mm.bias_pct = 100.0 * (sum_v.value() / R - rep.true_mse) / rep.true_mse;
    mm.rrmse_pct = 100.0 * std::sqrt(sum_sq.value() / R) / rep.true_mse;
    mm.normal_l_pct = 100.0 * static_cast<double>(normal_l) / R;
    mm.normal_u_pct = 100.0 * static_cast<double>(normal_u) / R;
    mm.normal_two_tail_pct = mm.normal_l_pct + mm.normal_u_pct; // identity by construction
    mm.basic_l_pct = 100.0 * static_cast<double>(basic_l) / R;
    mm.basic_u_pct = 100.0 * static_cast<double>(basic_u) / R;
    mm.basic_two_tail_pct = mm.basic_l_pct + mm.basic_u_pct;
    return mm;
}

inline std::size_t resolve_workers(const StudyConfig& c) {
    if (c.workers > 0) return c.workers;
    if (const char* env = std::getenv("SPPB_WORKERS")) {
        const long w = std::strtol(env, nullptr, 10);
        if (w > 0) return static_cast<std::size_t>(w);
    }
    return 1;
}

} // namespace detail

/// Runs the full simulation study described by the config. Every random
/// stream hangs off (seed, phase, replicate), so the report is a pure
/// function of the config, whatever the worker count.
inline StudyReport run_study(const StudyConfig& c) {
    validate(c);
    const auto t0 = std::chrono::steady_clock::now();
    const RngStream root(c.seed);
    const Kernel kernel = gaussian_kernel();

    StudyReport rep;
    rep.config = c;
    rep.bands = coverage_bands(c.R, c.alpha);

    const FinitePopulation pop = detail::materialize_population(c, root);
    const auto design = detail::build_design(c, pop);

    // The true-MSE approximation is expensive and depends only on
    // (population, design, p, S, seed); cache it beside the report.
    const std::filesystem::path outdir(c.output_dir);
    std::filesystem::create_directories(outdir);
    const std::uint64_t cache_key = detail::true_mse_cache_key(pop, c);
    const auto cache_path = outdir / "true_mse_cache.json";
    TrueMse tm;
    bool cached = false;
    if (std::filesystem::exists(cache_path)) {
        std::ifstream in(cache_path);
        json jc = json::parse(in, nullptr, false);
        if (!jc.is_discarded() && jc.contains("key") &&
            jc.at("key").get<std::string>() == std::to_string(cache_key)) {
            tm.mse = jc.at("mse").get<double>();
            tm.xi = jc.at("xi").get<double>();
            cached = true;
        }
    }
    const auto t1 = std::chrono::steady_clock::now();
    if (!cached) {
        tm = approximate_true_mse(pop, design.spec, c.p, c.mse_samples,
                                  root.derive(phase::true_mse));
        json jc;
        jc["key"] = std::to_string(cache_key);
        jc["mse"] = tm.mse;
        jc["xi"] = tm.xi;
        std::ofstream out(cache_path);
        out << jc.dump(2) << '\n';
    }
    rep.seconds_true_mse =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
    rep.true_mse = tm.mse;
    rep.xi = tm.xi;

    rep.theta_hat.resize(c.R);
    rep.rows.resize(c.R);
    std::vector<std::uint64_t> redraws(c.R, 0);

    const std::size_t workers = std::min(detail::resolve_workers(c), c.R);
    std::atomic<std::size_t> next{0};
    const auto worker = [&]() {
        for (;;) {
            const std::size_t r = next.fetch_add(1);
            if (r >= c.R) return;
            auto sr = root.derive(phase::sample, r);
            const auto sample = detail::draw_sample(design, pop, sr, redraws[r]);
            rep.theta_hat[r] = design_quantile(sample, c.p);
            auto& out = rep.rows[r];
            out.resize(c.methods.size());
            // One bootstrap stream per replicate, shared by all methods:
            // common random numbers across methods, and a fixed h = 0 method
            // is then bit-identical to the unsmoothed one.
            const auto method_stream = root.derive(phase::method, r);
            for (std::size_t mi = 0; mi < c.methods.size(); ++mi)
                out[mi] = detail::run_method(c.methods[mi], design, sample, rep.theta_hat[r], c,
                                             kernel, method_stream);
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto rd : redraws) rep.sample_redraws += rd;

    for (std::size_t mi = 0; mi < c.methods.size(); ++mi)
        rep.metrics.push_back(detail::summarize_method(c.methods[mi].label, mi, rep));

    for (std::size_t mi = 0; mi < c.methods.size(); ++mi) {
        const auto& m = c.methods[mi];
        if (m.type != MethodSpec::Type::boot) continue;
        const auto grid = make_grid(m.c_lo, m.c_hi, m.m, static_cast<double>(c.n));
        std::vector<std::pair<double, double>> curve(grid.constants.size());
        for (std::size_t gi = 0; gi < grid.constants.size(); ++gi) {
            KahanSum acc;
            for (const auto& rrow : rep.rows) acc.add(rrow[mi].risk[gi]);
            curve[gi] = {grid.constants[gi], acc.value() / static_cast<double>(c.R)};
        }
        rep.risk_curves.emplace_back(m.label, std::move(curve));
    }

    rep.seconds_total =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

} // namespace sppb
