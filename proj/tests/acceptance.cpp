// Acceptance suite: end-to-end checks of the published reference numbers and
// the reproducibility contract, one PASS/FAIL line per criterion. Exits
// nonzero if any criterion fails. Heavier than the unit tests (a couple of
// minutes); every random input is seeded, so outcomes are stable.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sppb/sppb.hpp"

namespace fs = std::filesystem;

namespace {

struct Gate {
    bool ok = true;
    std::string why;
    std::vector<std::string> notes;

    void expect(bool cond, const std::string& what) {
        if (cond) return;
        ok = false;
        if (!why.empty()) why += "; ";
        why += what;
    }

    void close(double got, double want, double tol, const std::string& what) {
        std::ostringstream ss;
        ss.precision(10);
        ss << what << ": got " << got << ", want " << want << " +/- " << tol;
        expect(std::isfinite(got) && std::fabs(got - want) <= tol, ss.str());
    }

    void note(const std::string& s) { notes.push_back(s); }
};

int run_criterion(int id, const char* name, const std::function<void(Gate&)>& body) {
    Gate g;
    try {
        body(g);
    } catch (const std::exception& e) {
        g.ok = false;
        g.why = std::string("unexpected exception: ") + e.what();
    }
    std::printf("%s  %d. %s%s%s\n", g.ok ? "PASS" : "FAIL", id, name, g.ok ? "" : " -- ",
                g.ok ? "" : g.why.c_str());
    for (const auto& s : g.notes) std::printf("        %s\n", s.c_str());
    std::fflush(stdout);
    return g.ok ? 0 : 1;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

std::string fmt(const char* spec, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, spec, a, b, c, d);
    return buf;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "sppb_acceptance" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// Shared reduced-scale scenario: symmetric population, SRSWOR with n = 100
// at a 30% sampling fraction (333 units), median.
sppb::json scenario_json(const std::string& outdir) {
    sppb::json j;
    j["population"] = {{"generator", "sym"}, {"size", 333}};
    j["n"] = 100;
    j["f"] = 0.3;
    j["p"] = 0.5;
    j["seed"] = 20260814;
    j["output_dir"] = outdir;
    return j;
}

const sppb::MethodMetrics& metric(const sppb::StudyReport& rep, const std::string& label) {
    for (const auto& m : rep.metrics)
        if (m.method == label) return m;
    throw std::runtime_error("no metrics row for " + label);
}

} // namespace

int main() {
    const auto kernel = sppb::gaussian_kernel();
    int failures = 0;

    failures += run_criterion(1, "bandwidth constants hit the reference values", [&](Gate& g) {
        // Standard normal target: the generic rule (density + curvature) and
        // the normal closed form must agree and round to the published pair.
        const struct {
            double p, want;
        } normal_cases[] = {{0.5, 0.93}, {0.75, 0.98}};
        for (const auto& c : normal_cases) {
            const double z = sppb::normal_quantile(c.p);
            const double f = sppb::normal_pdf(z);
            const double generic = sppb::optimal_constant(f, -f, kernel);
            const double closed = sppb::normal_constant(z, 1.0, kernel);
            g.expect(std::fabs(generic - closed) <= 1e-12 * closed,
                     fmt("N(0,1) p=%.2f: generic and closed form disagree", c.p));
            g.close(round2(generic), c.want, 0.0101, fmt("N(0,1) constant at p=%.2f", c.p));
        }

        // Lognormal(0,1) target: normal-reference constants standardize by
        // the lognormal's own mean and standard deviation.
        const oracle::LognormalLaw law{0.0, 1.0};
        const double mu = law.mean(), sd = law.sd();
        const double z_med = (law.quantile(0.5) - mu) / sd;
        g.close(round2(sppb::normal_constant(z_med, sd, kernel)), 2.03, 0.0101,
                "LN(0,1) normal-reference constant, median");
        const double z_q3 = (law.quantile(0.75) - mu) / sd;
        g.close(round2(sppb::normal_constant(z_q3, sd, kernel)), 2.02, 0.0101,
                "LN(0,1) normal-reference constant, Q3");
        const double q3 = law.quantile(0.75);
        g.close(round2(sppb::optimal_constant(law.pdf(q3), law.curvature(q3), kernel)), 2.24,
                0.0101, "LN(0,1) optimal constant, Q3");
        bool threw = false;
        try {
            sppb::optimal_constant(law.pdf(law.quantile(0.5)), law.curvature(law.quantile(0.5)),
                                   kernel);
        } catch (const std::domain_error&) {
            threw = true;
        }
        g.expect(threw, "LN(0,1) optimal constant at the median must have no finite optimum");

        // Symmetric study population, approximated by N(60, 216).
        const double sig = std::sqrt(216.0);
        const double c_med = sppb::normal_constant(0.0, sig, kernel);
        const double c_q3 = sppb::normal_constant(sppb::normal_quantile(0.75), sig, kernel);
        g.close(round2(c_med), 13.71, 0.0201, "N(60,216) constant, median");
        g.close(round2(c_q3), 14.35, 0.0201, "N(60,216) constant, Q3");
        g.expect(std::fabs(c_med - sppb::optimal_constant(sppb::normal_pdf(0.0) / sig,
                                                          -sppb::normal_pdf(0.0) / (sig * sig * sig),
                                                          kernel)) <= 1e-12 * c_med,
                 "N(60,216): generic and closed form disagree");

        // Skewed-population constants, reported for reference but not gated:
        // the realized finite populations this study draws are far out in the
        // tails of their generating law, so no fixed target applies.
        const oracle::LognormalLaw skew{1.5, 1.389};
        const double sq3 = skew.quantile(0.75);
        g.note(fmt("info (ungated) lognormal(1.5,1.389) median: C_opt=%.2f C_norm=%.2f",
                   sppb::optimal_constant(skew.pdf(skew.quantile(0.5)),
                                          skew.curvature(skew.quantile(0.5)), kernel),
                   sppb::normal_constant((skew.quantile(0.5) - skew.mean()) / skew.sd(),
                                         skew.sd(), kernel)));
        g.note(fmt("info (ungated) lognormal(1.5,1.389) Q3:     C_opt=%.2f C_norm=%.2f",
                   sppb::optimal_constant(skew.pdf(sq3), skew.curvature(sq3), kernel),
                   sppb::normal_constant((sq3 - skew.mean()) / skew.sd(), skew.sd(), kernel)));
    });

    failures += run_criterion(2, "design draws match per-unit inclusion probabilities",
                              [&](Gate& g) {
        const std::size_t N = 10, reps = 100000;
        const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
        const auto pi = sppb::pps_inclusion_probs(x, 3);

        const auto frequencies = [&](const sppb::DesignSpec& d, bool fixed_size,
                                     std::uint64_t seed) {
            sppb::RngStream rng(seed);
            std::vector<double> freq(N, 0.0);
            for (std::size_t r = 0; r < reps; ++r) {
                const auto idx = sppb::draw(d, N, rng);
                if (fixed_size)
                    g.expect(idx.size() == 3, "pps sample size must be exactly 3");
                for (auto i : idx) freq[i] += 1.0;
            }
            for (auto& v : freq) v /= static_cast<double>(reps);
            return freq;
        };

        const auto check = [&](const char* name, const std::vector<double>& freq,
                               const std::vector<double>& want) {
            for (std::size_t i = 0; i < N; ++i) {
                const double se =
                    std::sqrt(want[i] * (1.0 - want[i]) / static_cast<double>(reps));
                g.close(freq[i], want[i], 3.0 * se,
                        std::string(name) + " inclusion rate, unit " + std::to_string(i));
            }
        };

        check("srswor", frequencies(sppb::SrsworDesign{3}, false, 101),
              std::vector<double>(N, 0.3));
        check("poisson", frequencies(sppb::PoissonDesign{pi}, false, 102), pi);
        check("randsys_pps", frequencies(sppb::RandSysPpsDesign{pi}, true, 103), pi);
    });

    failures += run_criterion(3, "bootstrap mse matches exhaustive enumeration", [&](Gate& g) {
        // n = 2 of N = 4: one completion, C(4,2) equally likely subsets.
        const std::vector<double> y{1.0, 3.0};
        const auto exact = oracle::enumerate_srswor_bootstrap(y, 4, 0.5);

        sppb::WeightedSample s;
        s.y = y;
        s.pi = {0.5, 0.5};
        const std::size_t B = 100000;
        const auto run =
            sppb::run_algorithm1(s, sppb::SrsworDesign{2}, sppb::QuantileEstimator{0.5}, 0.0,
                                 kernel, B, sppb::RngStream(2026));
        const double vhat = sppb::mse_estimate(run);
        const double se =
            std::sqrt((exact.second_moment - exact.mse * exact.mse) / static_cast<double>(B));
        g.close(vhat, exact.mse, 3.0 * se, "monte carlo V vs enumeration");
        g.note(fmt("V=%.6f exact=%.6f (3se=%.6f)", vhat, exact.mse, 3.0 * se));
    });

    failures += run_criterion(4, "h = 0 is bit-identical to the unsmoothed path", [&](Gate& g) {
        // A kernel whose draws are all zero turns the smoothed run into the
        // plain pseudo-population bootstrap; with shared streams, h = 0 must
        // reproduce it exactly, replicate by replicate.
        auto zero = sppb::gaussian_kernel();
        zero.name = "zero";
        zero.draw = [](sppb::RngStream&) { return 0.0; };

        const sppb::EstimatorSpec est = sppb::QuantileEstimator{0.5};
        const sppb::RngStream rng(31337);
        const auto check = [&](const char* name, const sppb::WeightedSample& s,
                               const sppb::DesignSpec& d) {
            const auto plain = sppb::run_algorithm1(s, d, est, 0.0, kernel, 500, rng);
            const auto degen = sppb::run_algorithm1(s, d, est, 1.25, zero, 500, rng);
            g.expect(plain.theta_star == degen.theta_star,
                     std::string(name) + ": theta* differs");
            g.expect(plain.theta_hat_star == degen.theta_hat_star,
                     std::string(name) + ": theta-hat* differs");
            g.expect(plain.empty_redraws == degen.empty_redraws,
                     std::string(name) + ": redraw count differs");
        };

        sppb::WeightedSample sr;
        sr.y = {3.0, 1.0, 4.0, 1.5, 9.0, 2.6};
        sr.pi.assign(6, 6.0 / 21.0);
        check("srswor", sr, sppb::SrsworDesign{6});

        sppb::WeightedSample po;
        po.y = {3.0, 1.0, 4.0, 1.5, 2.2};
        po.pi = {0.5, 0.25, 0.5, 0.4, 0.8};
        check("poisson", po, sppb::PoissonDesign{});

        sppb::WeightedSample pps;
        pps.y = {3.0, 1.0, 4.0, 1.5};
        pps.pi = {0.8, 0.3, 0.45, 0.45};
        check("randsys_pps", pps, sppb::RandSysPpsDesign{});
    });

    // Criteria 5, 6, 8 and 9 share the reduced-scale scenario; keep one
    // output directory so the true-MSE approximation is computed once.
    const auto scenario_out = fresh_dir("scenario_out");

    failures += run_criterion(5, "smoothing beats the unsmoothed bootstrap on RRMSE",
                              [&](Gate& g) {
        sppb::json j = scenario_json(scenario_out.string());
        j["B"] = 500;
        j["R"] = 200;
        j["mse_samples"] = 3000;
        j["methods"] = sppb::json::array({
            sppb::json{{"type", "unsmoothed"}},
            sppb::json{{"type", "fixed"}, {"constant", 13.71}},
            sppb::json{{"type", "plugin"}},
        });
        const auto rep = sppb::run_study(sppb::parse_config(j));
        const double un = metric(rep, "UNSMTHD").rrmse_pct;
        const double fx = metric(rep, "FIXED(13.71)").rrmse_pct;
        const double pl = metric(rep, "PLUG-IN").rrmse_pct;
        g.note(fmt("RRMSE%%: unsmoothed=%.1f fixed=%.1f plugin=%.1f", un, fx, pl));
        g.expect(fx < un, fmt("fixed-constant RRMSE %.1f not below unsmoothed %.1f", fx, un));
        g.expect(pl < un, fmt("plug-in RRMSE %.1f not below unsmoothed %.1f", pl, un));
    });

    failures += run_criterion(6, "double bootstrap selects an interior constant", [&](Gate& g) {
        sppb::json j = scenario_json(scenario_out.string());
        j["B"] = 200;
        j["R"] = 100;
        j["mse_samples"] = 3000;
        j["methods"] = sppb::json::array({
            sppb::json{{"type", "unsmoothed"}},
            sppb::json{{"type", "boot"}, {"c_lo", 5.0}, {"c_hi", 25.0}, {"m", 10}, {"D", 25}},
        });
        const auto rep = sppb::run_study(sppb::parse_config(j));

        std::vector<double> constants;
        for (const auto& rrow : rep.rows) constants.push_back(rrow[1].constant);
        std::sort(constants.begin(), constants.end());
        const double med = 0.5 * (constants[49] + constants[50]);
        g.note(fmt("median selected constant %.2f on [5, 25]", med));
        g.expect(med > 5.0 && med < 25.0,
                 fmt("median selected constant %.2f not strictly inside [5, 25]", med));

        const double un = metric(rep, "UNSMTHD").rrmse_pct;
        const double bo = metric(rep, "BOOT").rrmse_pct;
        g.note(fmt("RRMSE%%: unsmoothed=%.1f boot=%.1f", un, bo));
        g.expect(bo <= un + 5.0,
                 fmt("boot RRMSE %.1f exceeds unsmoothed %.1f by more than 5 points", bo, un));
    });

    failures += run_criterion(7, "completion-variance run recovers the srswor variance",
                              [&](Gate& g) {
        // Mean statistic at h = 0: the A x B variance estimate must land on
        // the textbook (1 - f) s^2 / n within 10%.
        sppb::RngStream seed(7001);
        sppb::WeightedSample s;
        for (int i = 0; i < 50; ++i) s.y.push_back(10.0 + 3.0 * seed.normal());
        s.pi.assign(50, 0.1);
        const double target = 0.9 * sppb::sample_variance(s.y) / 50.0;
        const double v = sppb::run_algorithmS1(s, sppb::SrsworDesign{50}, sppb::MeanEstimator{},
                                               0.0, kernel, 50, 200, sppb::RngStream(7002));
        g.close(v, target, 0.10 * target, "A x B variance for the mean");
        g.note(fmt("estimate %.6f vs (1-f)s^2/n %.6f", v, target));
    });

    failures += run_criterion(8, "interval bookkeeping is exact", [&](Gate& g) {
        const auto ci = sppb::normal_ci(10.0, 4.0, 0.05);
        g.close(ci.lo, 6.080072030919892, 1e-9, "normal ci lower");
        g.close(ci.hi, 13.919927969080108, 1e-9, "normal ci upper");

        sppb::BootstrapRun run;
        run.theta_star = {0.0, 0.0, 0.0, 0.0};
        run.theta_hat_star = {1.0, 2.0, 3.0, 4.0};
        const auto basic = sppb::basic_ci(10.0, run, 0.5);
        g.expect(basic.lo == 7.0 && basic.hi == 9.0, "basic ci hand example");

        const auto bands = sppb::coverage_bands(2000, 0.05);
        g.expect(bands.two_tail_lo == 4.0 && bands.two_tail_hi == 6.0,
                 "two-tail acceptance band at R=2000");
        g.expect(bands.one_tail_lo == 1.8 && bands.one_tail_hi == 3.2,
                 "one-tail acceptance band at R=2000");

        // Reduced run: all metric columns present, tails add up exactly, and
        // rerunning the identical config reproduces metrics.csv byte for byte.
        sppb::json j = scenario_json(scenario_out.string());
        j["B"] = 80;
        j["R"] = 40;
        j["mse_samples"] = 3000;
        j["methods"] = sppb::json::array({
            sppb::json{{"type", "unsmoothed"}},
            sppb::json{{"type", "fixed"}, {"constant", 13.71}},
            sppb::json{{"type", "plugin"}},
        });
        const auto c = sppb::parse_config(j);
        const auto rep = sppb::run_study(c);
        for (const auto& m : rep.metrics) {
            g.expect(m.normal_two_tail_pct == m.normal_l_pct + m.normal_u_pct,
                     m.method + ": normal tails do not add up");
            g.expect(m.basic_two_tail_pct == m.basic_l_pct + m.basic_u_pct,
                     m.method + ": basic tails do not add up");
        }

        const auto d1 = fresh_dir("bookkeeping_a");
        sppb::emit_report(rep, d1);
        const std::string metrics = read_file(d1 / "metrics.csv");
        g.expect(metrics.rfind("method,bias_pct,rrmse_pct,normal_l_pct,normal_u_pct,"
                               "normal_two_tail_pct,basic_l_pct,basic_u_pct,basic_two_tail_pct\n",
                               0) == 0,
                 "metrics.csv header is incomplete");
        g.expect(std::count(metrics.begin(), metrics.end(), '\n') == 4,
                 "metrics.csv must have one row per method");

        const auto d2 = fresh_dir("bookkeeping_b");
        sppb::emit_report(sppb::run_study(c), d2);
        g.expect(read_file(d2 / "metrics.csv") == metrics,
                 "rerun of the identical config changed metrics.csv");
    });

    failures += run_criterion(9, "manifest replay is byte-identical", [&](Gate& g) {
        sppb::json j = scenario_json(fresh_dir("replay_out").string());
        j["B"] = 60;
        j["R"] = 10;
        j["mse_samples"] = 400;
        j["seed"] = 90210;
        j["methods"] = sppb::json::array({
            sppb::json{{"type", "unsmoothed"}},
            sppb::json{{"type", "plugin"}},
            sppb::json{{"type", "boot"}, {"c_lo", 5.0}, {"c_hi", 25.0}, {"m", 3}, {"D", 5}},
        });
        const auto d1 = fresh_dir("replay_a");
        sppb::emit_report(sppb::run_study(sppb::parse_config(j)), d1);

        const auto replayed = sppb::parse_config(sppb::json::parse(read_file(d1 / "manifest.json")));
        const auto d2 = fresh_dir("replay_b");
        sppb::emit_report(sppb::run_study(replayed), d2);

        for (const char* name : {"metrics.csv", "replicates.csv", "selected_h.csv",
                                 "risk_curves.csv", "manifest.json"})
            g.expect(read_file(d1 / name) == read_file(d2 / name),
                     std::string(name) + " differs under manifest replay");
    });

    if (failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d acceptance criterion(s) failed\n", failures);
    return 1;
}
