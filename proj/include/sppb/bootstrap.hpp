#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "sppb/design.hpp"
#include "sppb/kernel.hpp"
#include "sppb/pseudo_population.hpp"
#include "sppb/quantile.hpp"
#include "sppb/rng.hpp"

namespace sppb {

struct QuantileEstimator {
    double p = 0.5;
};
struct MeanEstimator {};
using EstimatorSpec = std::variant<QuantileEstimator, MeanEstimator>;

/// Cost-reduction switches: share one noise vector and one bootstrap draw per
/// replicate across all bandwidths under evaluation. Valid because the
/// bootstrap inclusion probabilities never depend on the bandwidth.
struct ReuseFlags {
    bool shared_noise = true;
    bool shared_draws = true;
};

struct BootstrapRun {
    double bandwidth = 0.0;
    std::vector<double> theta_star;     // estimand of the smoothed pseudo-population
    std::vector<double> theta_hat_star; // estimator from the bootstrap sample
    std::uint64_t empty_redraws = 0;

    std::size_t replicates() const { return theta_star.size(); }
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

namespace detail {

struct LevelScratch {
    CompletionScratch comp;
    SrsworScratch srs_draw;
    PseudoPopulation pp;
    std::vector<double> noise;  // stratum-scaled kernel noise per entry
    std::vector<double> values; // smoothed values, reordered by estimators
    std::vector<double> pi_boot;
    std::vector<std::uint32_t> sel;
    std::vector<std::uint32_t> sel_block;
    std::vector<std::uint32_t> perm;
    std::vector<double> sel_y, sel_w;
    std::vector<std::pair<double, double>> pairs;
};

/// Per-stratum bandwidth factors: a scalar bandwidth h is read as the shared
/// constant rule h_l = C * n_l^{-1/5} with C = h * n^{1/5}, i.e. entries of
/// stratum l are smoothed with h * (n / n_l)^{1/5}. Empty when unstratified.
inline std::vector<double> stratum_noise_factors(const DesignInfo& info) {
    std::vector<double> f;
    if (info.kind != DesignKind::stratified_srswor) return f;
    std::size_t n_total = 0;
    for (const auto& st : info.strata) n_total += st.sample_size;
    f.reserve(info.strata.size());
    for (const auto& st : info.strata)
        f.push_back(std::pow(static_cast<double>(n_total) / static_cast<double>(st.sample_size),
                             0.2));
    return f;
}

inline void draw_scaled_noise(const Kernel& k, const PseudoPopulation& pp,
                              std::span<const double> factors, RngStream& ns,
                              std::vector<double>& noise) {
    sample_noise(k, pp.size(), ns, noise);
    if (!factors.empty())
        for (std::size_t l = 0; l < pp.stratum_ranges.size(); ++l)
            for (std::size_t i = pp.stratum_ranges[l].first; i < pp.stratum_ranges[l].second; ++i)
                noise[i] *= factors[l];
}

inline void smoothed_values(const PseudoPopulation& pp, double h, std::span<const double> noise,
                            std::vector<double>& out) {
    out.resize(pp.size());
    if (h == 0.0) {
        std::copy(pp.y.begin(), pp.y.end(), out.begin());
    } else {
        for (std::size_t i = 0; i < pp.size(); ++i) out[i] = pp.y[i] + h * noise[i];
    }
}

/// Inclusion probabilities for the bootstrap sample drawn from a completed
/// pseudo-population of n-sample origin. Identity for SRSWOR, Poisson and
/// stratified SRSWOR; for PPS the inherited probabilities are rescaled to
/// expected size n and re-capped at 1.
inline void bootstrap_pi(DesignKind kind, const PseudoPopulation& pp, std::size_t n,
                         std::vector<double>& out) {
    if (kind == DesignKind::randsys_pps) {
        out = pps_inclusion_probs(pp.pi, n);
    } else {
        out.assign(pp.pi.begin(), pp.pi.end());
    }
}

/// Step-5 bootstrap draw by the original design. Only Poisson can produce an
/// empty sample; those are redrawn and counted.
inline void draw_bootstrap(DesignKind kind, const DesignInfo& info,
                           std::span<const double> pi_boot, const PseudoPopulation& pp,
                           RngStream& ds, LevelScratch& ws, std::uint64_t& empty_redraws) {
    switch (kind) {
    case DesignKind::srswor:
        ws.srs_draw.draw(pp.size(), info.n, ds, ws.sel);
        break;
    case DesignKind::stratified_srswor: {
        ws.sel.clear();
        for (std::size_t l = 0; l < info.strata.size(); ++l) {
            const auto [begin, end] = pp.stratum_ranges[l];
            ws.srs_draw.draw(end - begin, info.strata[l].sample_size, ds, ws.sel_block);
            for (auto j : ws.sel_block)
                ws.sel.push_back(static_cast<std::uint32_t>(begin + j));
        }
        break;
    }
    case DesignKind::poisson: {
        for (;;) {
            ws.sel.clear();
            for (std::size_t i = 0; i < pi_boot.size(); ++i)
                if (ds.uniform01() < pi_boot[i]) ws.sel.push_back(static_cast<std::uint32_t>(i));
            if (!ws.sel.empty()) break;
            ++empty_redraws;
        }
        break;
    }
    case DesignKind::randsys_pps:
        randomized_systematic_draw(pi_boot, ds, ws.sel, ws.perm);
        break;
    }
}

inline double theta_population(const EstimatorSpec& est, std::span<double> values) {
    if (const auto* q = std::get_if<QuantileEstimator>(&est))
        return quantile_inplace(values, q->p);
    return sample_mean(values);
}

inline double theta_weighted(const EstimatorSpec& est, std::span<const double> y,
                             std::span<const double> w,
                             std::vector<std::pair<double, double>>& pairs) {
    if (const auto* q = std::get_if<QuantileEstimator>(&est)) {
        pairs.resize(y.size());
        KahanSum total;
        for (std::size_t i = 0; i < y.size(); ++i) {
            pairs[i] = {y[i], w[i]};
            total.add(w[i]);
        }
        return invert_weighted_cdf(pairs, total.value(), q->p);
    }
    KahanSum num, den;
    for (std::size_t i = 0; i < y.size(); ++i) {
        num.add(w[i] * y[i]);
        den.add(w[i]);
    }
    return num.value() / den.value();
}

inline void gather_selected(const std::vector<double>& values, std::span<const double> pi_boot,
                            std::span<const std::uint32_t> sel, std::vector<double>& sel_y,
                            std::vector<double>& sel_w) {
    sel_y.resize(sel.size());
    sel_w.resize(sel.size());
    for (std::size_t j = 0; j < sel.size(); ++j) {
        sel_y[j] = values[sel[j]];
        sel_w[j] = 1.0 / pi_boot[sel[j]];
    }
}

inline void check_design_matches_sample(const DesignSpec& design, const WeightedSample& s) {
    if (const auto* sr = std::get_if<SrsworDesign>(&design)) {
        if (sr->n != s.size())
            throw std::invalid_argument("design/sample mismatch: SRSWOR n differs from sample size");
    } else if (const auto* st = std::get_if<StratifiedSrsworDesign>(&design)) {
        if (st->strata.size() != s.strata.size())
            throw std::invalid_argument("design/sample mismatch: stratum count differs");
        for (std::size_t l = 0; l < st->strata.size(); ++l)
            if (st->strata[l].population_size != s.strata[l].population_size ||
                st->strata[l].sample_size != s.strata[l].sample_size)
                throw std::invalid_argument("design/sample mismatch: stratum sizes differ");
    }
}

} // namespace detail

/// Inclusion probabilities of the bootstrap draw from a completed
/// pseudo-population (identity except PPS, which rescales to the original
/// sample size and re-caps at 1).
inline InclusionProbs bootstrap_inclusion_probs(const PseudoPopulation& pp,
                                                const DesignSpec& design) {
    if (pp.size() == 0) throw std::invalid_argument("bootstrap_inclusion_probs: empty pseudo-population");
    std::size_t n = 0;
    for (auto s : pp.source) n = std::max<std::size_t>(n, s + 1);
    InclusionProbs out;
    detail::bootstrap_pi(design_kind(design), pp, n, out);
    return out;
}

/// Smoothed pseudo-population bootstrap, B replicates at bandwidth h.
/// Replicate b rebuilds the pseudo-population (completion stream), smooths it
/// (noise stream, skipped entirely at h = 0), computes the pseudo-population
/// estimand, then redraws a sample by the original design (draw stream) and
/// computes the weighted estimator. Streams are derived per (phase, b), so
/// the run is reproducible from `rng` alone and independent of scheduling.
inline BootstrapRun run_algorithm1(const WeightedSample& sample, const DesignSpec& design,
                                   const EstimatorSpec& est, double h, const Kernel& kernel,
                                   std::size_t B, const RngStream& rng, ReuseFlags reuse = {}) {
    if (B == 0) throw std::invalid_argument("run_algorithm1: B must be positive");
    if (h < 0.0) throw std::invalid_argument("run_algorithm1: bandwidth must be nonnegative");
    detail::check_design_matches_sample(design, sample);
    const DesignKind kind = design_kind(design);
    const auto info = detail::resolve_design(kind, sample);
    const auto factors = detail::stratum_noise_factors(info);
    const auto s = detail::view(sample);

    BootstrapRun run;
    run.bandwidth = h;
    run.theta_star.reserve(B);
    run.theta_hat_star.reserve(B);
    detail::LevelScratch ws;

    for (std::size_t b = 0; b < B; ++b) {
        auto cs = rng.derive(phase::completion, b);
        detail::complete_into(ws.pp, s, info, &cs, ws.comp);
        if (h > 0.0) {
            auto ns = reuse.shared_noise ? rng.derive(phase::noise, b)
                                         : rng.derive(phase::noise, b, 0);
            detail::draw_scaled_noise(kernel, ws.pp, factors, ns, ws.noise);
        }
        detail::smoothed_values(ws.pp, h, ws.noise, ws.values);
        detail::bootstrap_pi(kind, ws.pp, info.n, ws.pi_boot);
        auto ds = reuse.shared_draws ? rng.derive(phase::draw, b) : rng.derive(phase::draw, b, 0);
        detail::draw_bootstrap(kind, info, ws.pi_boot, ws.pp, ds, ws, run.empty_redraws);
        detail::gather_selected(ws.values, ws.pi_boot, ws.sel, ws.sel_y, ws.sel_w);
        run.theta_hat_star.push_back(detail::theta_weighted(est, ws.sel_y, ws.sel_w, ws.pairs));
        run.theta_star.push_back(detail::theta_population(est, ws.values));
    }
    return run;
}

/// Bootstrap MSE estimate: B^{-1} sum (theta_hat*_b - theta*_b)^2.
inline double mse_estimate(const BootstrapRun& run) {
    const std::size_t B = run.replicates();
    if (B == 0) throw std::invalid_argument("mse_estimate: empty run");
    if (run.theta_hat_star.size() != B)
        throw std::invalid_argument("mse_estimate: inconsistent run");
    KahanSum acc;
    for (std::size_t b = 0; b < B; ++b) {
        const double d = run.theta_hat_star[b] - run.theta_star[b];
        acc.add(d * d);
    }
    return acc.value() / static_cast<double>(B);
}

/// Normal-theory interval theta_hat -/+ z_{1-alpha/2} sqrt(mse).
inline Interval normal_ci(double theta_hat, double mse, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("normal_ci: alpha in (0,1)");
    if (mse < 0.0) throw std::invalid_argument("normal_ci: negative mse");
    const double half = normal_quantile(1.0 - 0.5 * alpha) * std::sqrt(mse);
    return {theta_hat - half, theta_hat + half};
}

/// Basic bootstrap interval from the deltas d_b = theta_hat*_b - theta*_b:
/// [theta_hat - d_(ceil((1-alpha/2)B)), theta_hat - d_(ceil((alpha/2)B))].
inline Interval basic_ci(double theta_hat, const BootstrapRun& run, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("basic_ci: alpha in (0,1)");
    const std::size_t B = run.replicates();
    if (B == 0 || run.theta_hat_star.size() != B)
        throw std::invalid_argument("basic_ci: empty or inconsistent run");
    std::vector<double> d(B);
    for (std::size_t b = 0; b < B; ++b) d[b] = run.theta_hat_star[b] - run.theta_star[b];
    std::sort(d.begin(), d.end());
    const auto at = [&](double beta) {
        auto i = static_cast<std::size_t>(std::ceil(beta * static_cast<double>(B) - 1e-9));
        i = std::clamp<std::size_t>(i, 1, B);
        return d[i - 1];
    };
    return {theta_hat - at(1.0 - 0.5 * alpha), theta_hat - at(0.5 * alpha)};
}

/// Monte Carlo variance of the bootstrap estimator: A completed
/// pseudo-populations, each resampled B times with fresh smoothing noise
/// every time; returns the average over a of the sample variances of the B
/// estimator values.
inline double run_algorithmS1(const WeightedSample& sample, const DesignSpec& design,
                              const EstimatorSpec& est, double h, const Kernel& kernel,
                              std::size_t A, std::size_t B, const RngStream& rng) {
    if (A == 0) throw std::invalid_argument("run_algorithmS1: A must be positive");
    if (B < 2) throw std::invalid_argument("run_algorithmS1: B must be at least 2");
    if (h < 0.0) throw std::invalid_argument("run_algorithmS1: bandwidth must be nonnegative");
    detail::check_design_matches_sample(design, sample);
    const DesignKind kind = design_kind(design);
    const auto info = detail::resolve_design(kind, sample);
    const auto factors = detail::stratum_noise_factors(info);
    const auto s = detail::view(sample);

    detail::LevelScratch ws;
    std::vector<double> theta(B);
    std::uint64_t redraws = 0;
    KahanSum over_a;
    for (std::size_t a = 0; a < A; ++a) {
        auto cs = rng.derive(phase::completion, a);
        detail::complete_into(ws.pp, s, info, &cs, ws.comp);
        detail::bootstrap_pi(kind, ws.pp, info.n, ws.pi_boot);
        for (std::size_t b = 0; b < B; ++b) {
            if (h > 0.0) {
                auto ns = rng.derive(phase::noise, a, b);
                detail::draw_scaled_noise(kernel, ws.pp, factors, ns, ws.noise);
            }
            detail::smoothed_values(ws.pp, h, ws.noise, ws.values);
            auto ds = rng.derive(phase::draw, a, b);
            detail::draw_bootstrap(kind, info, ws.pi_boot, ws.pp, ds, ws, redraws);
            detail::gather_selected(ws.values, ws.pi_boot, ws.sel, ws.sel_y, ws.sel_w);
            theta[b] = detail::theta_weighted(est, ws.sel_y, ws.sel_w, ws.pairs);
        }
        over_a.add(sample_variance(theta));
    }
    return over_a.value() / static_cast<double>(A);
}

} // namespace sppb
