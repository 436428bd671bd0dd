#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sppb/design.hpp"
#include "sppb/kernel.hpp"
#include "sppb/quantile.hpp"
#include "sppb/rng.hpp"

namespace sppb {

/// A (possibly smoothed) pseudo-population. Each entry is a copy of one
/// sample unit: `source` holds the originating sample index and `pi` the
/// unit's inclusion probability. For stratified builds, entries of stratum l
/// occupy the contiguous half-open range stratum_ranges[l].
struct PseudoPopulation {
    std::vector<double> y;
    std::vector<double> pi;
    std::vector<std::uint32_t> source;
    std::vector<std::pair<std::size_t, std::size_t>> stratum_ranges;
    double bandwidth = 0.0; // 0 = unsmoothed

    std::size_t size() const { return y.size(); }
    bool stratified() const { return !stratum_ranges.empty(); }
};

namespace detail {

struct SampleView {
    std::span<const double> y;
    std::span<const double> pi;
    std::span<const std::uint32_t> stratum;
    std::span<const StratumInfo> strata;
    std::size_t size() const { return y.size(); }
};

inline SampleView view(const WeightedSample& s) {
    return {s.y, s.pi, s.stratum, s.strata};
}

/// floor(1/pi) with a relative nudge so weights meant to be exact integers
/// (pi = 1/k) survive the two roundings in 1/fl(n/N).
inline std::size_t whole_copies(double pi_unit) {
    const double w = 1.0 / pi_unit;
    return static_cast<std::size_t>(std::floor(w + w * 1e-12));
}

struct CompletionScratch {
    SrsworScratch srs;
    std::vector<std::uint32_t> idx;
    std::vector<std::uint32_t> perm;
    std::vector<double> resid;
};

inline void push_copies(PseudoPopulation& out, const SampleView& s, std::size_t unit,
                        std::size_t count) {
    for (std::size_t c = 0; c < count; ++c) {
        out.y.push_back(s.y[unit]);
        out.pi.push_back(s.pi[unit]);
        out.source.push_back(static_cast<std::uint32_t>(unit));
    }
}

/// One SRSWOR block [begin,end) of the sample, rebuilt to population size
/// N_blk: k = N_blk / n_blk whole copies of every unit, then an SRSWOR draw
/// of the remaining N_blk - n_blk*k units. rng == nullptr skips completion.
inline void srswor_block(PseudoPopulation& out, const SampleView& s, std::size_t begin,
                         std::size_t end, std::size_t N_blk, RngStream* rng,
                         CompletionScratch& ws) {
    const std::size_t n_blk = end - begin;
    const std::size_t k = N_blk / n_blk;
    for (std::size_t i = begin; i < end; ++i) push_copies(out, s, i, k);
    if (rng != nullptr) {
        const std::size_t r = N_blk - n_blk * k;
        if (r > 0) {
            ws.srs.draw(n_blk, r, *rng, ws.idx);
            for (auto j : ws.idx) push_copies(out, s, begin + j, 1);
        }
    }
}

/// Builds the pseudo-population for one replicate: the deterministic fixed
/// part plus (when rng != nullptr) the random completion drawn by the
/// original design with the residual probabilities 1/pi - floor(1/pi).
/// Stratified samples must list units in stratum order.
inline void complete_into(PseudoPopulation& out, const SampleView& s, const DesignInfo& info,
                          RngStream* rng, CompletionScratch& ws) {
    out.y.clear();
    out.pi.clear();
    out.source.clear();
    out.stratum_ranges.clear();
    out.bandwidth = 0.0;

    switch (info.kind) {
    case DesignKind::srswor:
        srswor_block(out, s, 0, s.size(), info.population_size, rng, ws);
        break;
    case DesignKind::stratified_srswor: {
        std::size_t begin = 0;
        for (std::size_t l = 0; l < info.strata.size(); ++l) {
            const std::size_t end = begin + info.strata[l].sample_size;
            for (std::size_t i = begin; i < end; ++i)
                if (s.stratum[i] != l)
                    throw std::invalid_argument("pseudo-population: sample not in stratum order");
            const std::size_t entry_begin = out.size();
            srswor_block(out, s, begin, end, info.strata[l].population_size, rng, ws);
            out.stratum_ranges.emplace_back(entry_begin, out.size());
            begin = end;
        }
        break;
    }
    case DesignKind::poisson: {
        for (std::size_t i = 0; i < s.size(); ++i) {
            const std::size_t k = whole_copies(s.pi[i]);
            push_copies(out, s, i, k);
            if (rng != nullptr) {
                const double resid = 1.0 / s.pi[i] - static_cast<double>(k);
                if (resid > 0.0 && rng->uniform01() < resid) push_copies(out, s, i, 1);
            }
        }
        break;
    }
    case DesignKind::randsys_pps: {
        ws.resid.resize(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            const std::size_t k = whole_copies(s.pi[i]);
            push_copies(out, s, i, k);
            ws.resid[i] = std::max(0.0, 1.0 / s.pi[i] - static_cast<double>(k));
        }
        if (rng != nullptr) {
            randomized_systematic_draw(ws.resid, *rng, ws.idx, ws.perm);
            for (auto i : ws.idx) push_copies(out, s, i, 1);
        }
        break;
    }
    }
}

} // namespace detail

/// Deterministic part only: floor(1/pi_i) copies of each unit.
inline PseudoPopulation build_fixed_part(const WeightedSample& s) {
    validate(s);
    PseudoPopulation out;
    detail::CompletionScratch ws;
    if (s.stratified()) {
        std::size_t begin = 0;
        for (std::size_t l = 0; l < s.strata.size(); ++l) {
            const std::size_t end = begin + s.strata[l].sample_size;
            const std::size_t entry_begin = out.size();
            for (std::size_t i = begin; i < end; ++i) {
                if (s.stratum[i] != l)
                    throw std::invalid_argument("build_fixed_part: sample not in stratum order");
                detail::push_copies(out, detail::view(s), i, detail::whole_copies(s.pi[i]));
            }
            out.stratum_ranges.emplace_back(entry_begin, out.size());
            begin = end;
        }
    } else {
        for (std::size_t i = 0; i < s.size(); ++i)
            detail::push_copies(out, detail::view(s), i, detail::whole_copies(s.pi[i]));
    }
    return out;
}

/// Fixed part plus the design-specific random completion.
inline PseudoPopulation complete(const WeightedSample& s, const DesignSpec& design,
                                 RngStream& rng) {
    const auto info = detail::resolve_design(design_kind(design), s);
    PseudoPopulation out;
    detail::CompletionScratch ws;
    detail::complete_into(out, detail::view(s), info, &rng, ws);
    return out;
}

/// y*_i + h * noise_i with supplied noise. h = 0 returns the input values
/// untouched. Inclusion probabilities and sources are preserved.
inline PseudoPopulation smooth_with_noise(const PseudoPopulation& pp, double h,
                                          std::span<const double> noise) {
    if (h < 0.0) throw std::invalid_argument("smooth: bandwidth must be nonnegative");
    if (h > 0.0 && noise.size() != pp.size())
        throw std::invalid_argument("smooth: noise length mismatch");
    PseudoPopulation out = pp;
    if (h > 0.0)
        for (std::size_t i = 0; i < out.y.size(); ++i) out.y[i] += h * noise[i];
    out.bandwidth = h;
    return out;
}

inline PseudoPopulation smooth(const PseudoPopulation& pp, double h, const Kernel& kernel,
                               RngStream& rng) {
    if (h < 0.0) throw std::invalid_argument("smooth: bandwidth must be nonnegative");
    if (h == 0.0) {
        PseudoPopulation out = pp;
        out.bandwidth = 0.0;
        return out;
    }
    std::vector<double> noise;
    sample_noise(kernel, pp.size(), rng, noise);
    return smooth_with_noise(pp, h, noise);
}

} // namespace sppb
