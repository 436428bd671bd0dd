#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "sppb/bootstrap.hpp"
#include "sppb/kernel.hpp"
#include "sppb/math.hpp"
#include "sppb/quantile.hpp"

namespace sppb {

/// Equally spaced bandwidth constants C_i with the n^{-1/5} scaling applied.
struct BandwidthGrid {
    std::vector<double> constants;
    std::vector<double> bandwidths;
};

inline BandwidthGrid make_grid(double c_lo, double c_hi, std::size_t m, double n_expected) {
    if (m == 0) throw std::invalid_argument("make_grid: m must be positive");
    if (!(c_lo > 0.0)) throw std::invalid_argument("make_grid: constants must be positive");
    if (c_hi < c_lo || (m > 1 && c_hi == c_lo))
        throw std::invalid_argument("make_grid: need c_hi > c_lo for a multi-point grid");
    if (!(n_expected > 0.0)) throw std::invalid_argument("make_grid: n must be positive");
    BandwidthGrid g;
    const double scale = std::pow(n_expected, -0.2);
    for (std::size_t i = 0; i < m; ++i) {
        const double c =
            (m == 1) ? c_lo
                     : c_lo + (c_hi - c_lo) * static_cast<double>(i) / static_cast<double>(m - 1);
        g.constants.push_back(c);
        g.bandwidths.push_back(c * scale);
    }
    return g;
}

/// AMSE-optimal bandwidth constant from the target density f and the
/// curvature term d = f''(xi) - f'(xi)^2 / f(xi) at the quantile:
/// C = kappa1^{-2/5} kappa2^{1/5} f^{1/5} |d|^{-2/5}. Undefined when d = 0
/// (the optimal rate degenerates and no finite constant exists).
inline double optimal_constant(double density_at_quantile, double curvature, const Kernel& k) {
    if (!(density_at_quantile > 0.0))
        throw std::invalid_argument("optimal_constant: density must be positive");
    if (curvature == 0.0)
        throw std::domain_error("optimal_constant: curvature term is zero, no finite optimum");
    return std::pow(k.kappa1, -0.4) * std::pow(k.kappa2, 0.2) *
           std::pow(density_at_quantile, 0.2) * std::pow(std::abs(curvature), -0.4);
}

/// optimal_constant specialized to a N(mu, sigma^2) target, where the density
/// at the z-th standardized quantile is phi(z)/sigma and the curvature term
/// collapses to -phi(z)/sigma^3.
inline double normal_constant(double z, double sigma, const Kernel& k) {
    if (!(sigma > 0.0)) throw std::invalid_argument("normal_constant: sigma must be positive");
    const double f = normal_pdf(z) / sigma;
    return optimal_constant(f, -f / (sigma * sigma), k);
}

/// Plug-in bandwidth: fit a normal reference by the unweighted sample mean
/// and SD, standardize the design-weighted quantile estimate, and scale the
/// resulting constant by n^{-1/5}. Intended for SRSWOR samples.
inline double plugin_bandwidth(const WeightedSample& s, double p, const Kernel& k) {
    validate(s);
    if (s.size() < 2) throw std::invalid_argument("plugin_bandwidth: need at least 2 units");
    const double xi = design_quantile(s, p);
    const double mean = sample_mean(s.y);
    const double var = sample_variance(s.y);
    if (!(var > 0.0)) throw std::invalid_argument("plugin_bandwidth: sample variance is zero");
    const double sd = std::sqrt(var);
    return normal_constant((xi - mean) / sd, sd, k) *
           std::pow(static_cast<double>(s.size()), -0.2);
}

struct SelectionResult {
    std::size_t selected_index = 0;
    double selected_constant = 0.0;
    double selected_bandwidth = 0.0;
    std::vector<double> risk;            // estimated risk per grid point
    std::vector<double> first_level_mse; // V*_h per grid point
    BootstrapRun run_at_selected;        // first-level run at the chosen h
    std::uint64_t empty_redraws = 0;
};

namespace detail {

/// Index of the smallest risk; exact ties resolve to the smallest bandwidth.
inline std::size_t argmin_risk(std::span<const double> risk) {
    if (risk.empty()) throw std::invalid_argument("argmin_risk: empty risk curve");
    std::size_t best = 0;
    for (std::size_t i = 1; i < risk.size(); ++i)
        if (risk[i] < risk[best]) best = i;
    return best;
}

/// Aggregates the B x m (row-major) first-level estimates and nested
/// variances: v1_i = B^{-1} sum_b (theta_hat_{b,i} - theta_star_{b,i})^2 and
/// risk_i = B^{-1} sum_b (v2_{b,i} - v1_i)^2.
inline void risk_curve(std::span<const double> theta_hat, std::span<const double> theta_star,
                       std::span<const double> v2, std::size_t B, std::size_t m,
                       std::vector<double>& v1, std::vector<double>& risk) {
    if (B == 0 || m == 0 || theta_hat.size() != B * m || theta_star.size() != B * m ||
        v2.size() != B * m)
        throw std::invalid_argument("risk_curve: inconsistent matrix sizes");
    v1.resize(m);
    risk.resize(m);
    for (std::size_t gi = 0; gi < m; ++gi) {
        KahanSum acc1;
        for (std::size_t b = 0; b < B; ++b) {
            const double e = theta_hat[b * m + gi] - theta_star[b * m + gi];
            acc1.add(e * e);
        }
        v1[gi] = acc1.value() / static_cast<double>(B);
        KahanSum acc2;
        for (std::size_t b = 0; b < B; ++b) {
            const double e = v2[b * m + gi] - v1[gi];
            acc2.add(e * e);
        }
        risk[gi] = acc2.value() / static_cast<double>(B);
    }
}

} // namespace detail

/// Double-bootstrap bandwidth selection. For every first-level replicate b
/// and grid point h the estimator error theta_hat* - theta* feeds V*_h; a
/// nested D-replicate bootstrap of the drawn sample (run at the same h)
/// yields V**_{b,h}, and the risk of h is the mean of (V**_{b,h} - V*_h)^2
/// over b. Picks the grid minimum, smallest h on ties.
///
/// With the default reuse flags each replicate shares one noise vector and
/// one bootstrap draw across the whole grid (and likewise inside the nested
/// level), which leaves every marginal distribution unchanged because the
/// bootstrap inclusion probabilities are bandwidth-free.
inline SelectionResult double_bootstrap_select(const WeightedSample& sample,
                                               const DesignSpec& design,
                                               const EstimatorSpec& est,
                                               const BandwidthGrid& grid, const Kernel& kernel,
                                               std::size_t B, std::size_t D,
                                               const RngStream& rng, ReuseFlags reuse = {}) {
    const std::size_t m = grid.bandwidths.size();
    if (m == 0) throw std::invalid_argument("double_bootstrap_select: empty grid");
    if (B == 0 || D == 0)
        throw std::invalid_argument("double_bootstrap_select: B and D must be positive");
    detail::check_design_matches_sample(design, sample);
    const DesignKind kind = design_kind(design);
    const auto info = detail::resolve_design(kind, sample);
    const auto factors = detail::stratum_noise_factors(info);
    const auto s = detail::view(sample);
    const std::size_t n = info.n;

    detail::LevelScratch ws1, ws2;
    std::vector<double> theta_star(B * m), theta_hat(B * m), v2(B * m);
    std::vector<double> sel_base_y, sel_noise, sel_pi;
    std::vector<std::uint32_t> sel_stratum;
    std::vector<double> noise2(0);
    std::uint64_t first_redraws = 0, second_redraws = 0;

    // Labels of the bootstrap sample: fixed-size draws emit per-stratum
    // blocks in order, so they are the same every replicate.
    if (kind == DesignKind::stratified_srswor) {
        sel_stratum.reserve(n);
        for (std::size_t l = 0; l < info.strata.size(); ++l)
            for (std::size_t j = 0; j < info.strata[l].sample_size; ++j)
                sel_stratum.push_back(static_cast<std::uint32_t>(l));
    }

    for (std::size_t b = 0; b < B; ++b) {
        auto cs = rng.derive(phase::completion, b);
        detail::complete_into(ws1.pp, s, info, &cs, ws1.comp);
        detail::bootstrap_pi(kind, ws1.pp, n, ws1.pi_boot);

        const std::size_t grid_groups = (reuse.shared_noise && reuse.shared_draws) ? 1 : m;
        for (std::size_t gi_group = 0; gi_group < grid_groups; ++gi_group) {
            const bool shared = grid_groups == 1;
            {
                auto ns = shared ? rng.derive(phase::noise, b)
                                 : rng.derive(phase::noise, b, gi_group);
                detail::draw_scaled_noise(kernel, ws1.pp, factors, ns, ws1.noise);
                auto ds = shared ? rng.derive(phase::draw, b)
                                 : rng.derive(phase::draw, b, gi_group);
                detail::draw_bootstrap(kind, info, ws1.pi_boot, ws1.pp, ds, ws1, first_redraws);
            }

            const std::size_t nsel = ws1.sel.size(); // != n only under Poisson
            sel_base_y.resize(nsel);
            sel_noise.resize(nsel);
            sel_pi.resize(nsel);
            for (std::size_t j = 0; j < nsel; ++j) {
                const auto e = ws1.sel[j];
                sel_base_y[j] = ws1.pp.y[e];
                sel_noise[j] = ws1.noise[e];
                sel_pi[j] = ws1.pi_boot[e];
            }

            const std::size_t gi_lo = shared ? 0 : gi_group;
            const std::size_t gi_hi = shared ? m : gi_group + 1;
            for (std::size_t gi = gi_lo; gi < gi_hi; ++gi) {
                const double h = grid.bandwidths[gi];
                detail::smoothed_values(ws1.pp, h, ws1.noise, ws1.values);
                detail::gather_selected(ws1.values, ws1.pi_boot, ws1.sel, ws1.sel_y, ws1.sel_w);
                theta_hat[b * m + gi] =
                    detail::theta_weighted(est, ws1.sel_y, ws1.sel_w, ws1.pairs);
                theta_star[b * m + gi] = detail::theta_population(est, ws1.values);
            }

            // Nested level: same algorithm on the drawn sample. The nested
            // pseudo-population structure is bandwidth-free, so under reuse
            // one completion/noise/draw serves the whole grid; each entry's
            // value at bandwidth h is base + h * (inherited + fresh noise).
            const detail::SampleView nested{sel_base_y, sel_pi, sel_stratum, info.strata};
            KahanSum acc2; // only used when !shared (per-gi accumulation)
            std::vector<KahanSum> acc(shared ? m : 1);
            for (std::size_t d = 0; d < D; ++d) {
                auto derive2 = [&](std::uint64_t ph) {
                    return shared ? rng.derive(phase::second_level, b, d, ph)
                                  : rng.derive(phase::second_level, b, d, ph, gi_group);
                };
                auto cs2 = derive2(phase::completion);
                detail::complete_into(ws2.pp, nested, info, &cs2, ws2.comp);
                auto ns2 = derive2(phase::noise);
                detail::draw_scaled_noise(kernel, ws2.pp, factors, ns2, ws2.noise);
                noise2.resize(ws2.pp.size());
                for (std::size_t t = 0; t < ws2.pp.size(); ++t)
                    noise2[t] = sel_noise[ws2.pp.source[t]] + ws2.noise[t];
                detail::bootstrap_pi(kind, ws2.pp, n, ws2.pi_boot);
                auto ds2 = derive2(phase::draw);
                detail::draw_bootstrap(kind, info, ws2.pi_boot, ws2.pp, ds2, ws2,
                                       second_redraws);

                for (std::size_t gi = gi_lo; gi < gi_hi; ++gi) {
                    const double h = grid.bandwidths[gi];
                    detail::smoothed_values(ws2.pp, h, noise2, ws2.values);
                    detail::gather_selected(ws2.values, ws2.pi_boot, ws2.sel, ws2.sel_y,
                                            ws2.sel_w);
                    const double th = detail::theta_weighted(est, ws2.sel_y, ws2.sel_w, ws2.pairs);
                    const double ts = detail::theta_population(est, ws2.values);
                    const double e = th - ts;
                    if (shared) acc[gi].add(e * e);
                    else acc2.add(e * e);
                }
            }
            if (shared) {
                for (std::size_t gi = 0; gi < m; ++gi)
                    v2[b * m + gi] = acc[gi].value() / static_cast<double>(D);
            } else {
                v2[b * m + gi_group] = acc2.value() / static_cast<double>(D);
            }
        }
    }

    SelectionResult res;
    detail::risk_curve(theta_hat, theta_star, v2, B, m, res.first_level_mse, res.risk);
    res.selected_index = detail::argmin_risk(res.risk);
    res.selected_constant = grid.constants[res.selected_index];
    res.selected_bandwidth = grid.bandwidths[res.selected_index];
    res.empty_redraws = first_redraws + second_redraws;

    res.run_at_selected.bandwidth = res.selected_bandwidth;
    res.run_at_selected.theta_star.resize(B);
    res.run_at_selected.theta_hat_star.resize(B);
    for (std::size_t b = 0; b < B; ++b) {
        res.run_at_selected.theta_star[b] = theta_star[b * m + res.selected_index];
        res.run_at_selected.theta_hat_star[b] = theta_hat[b * m + res.selected_index];
    }
    res.run_at_selected.empty_redraws = first_redraws;
    return res;
}

} // namespace sppb
