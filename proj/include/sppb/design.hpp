#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "sppb/math.hpp"
#include "sppb/quantile.hpp"
#include "sppb/rng.hpp"

namespace sppb {

using InclusionProbs = std::vector<double>;

struct SrsworDesign {
    std::size_t n = 0;
};

struct PoissonDesign {
    InclusionProbs pi; // one per universe unit, in (0,1]
};

/// Randomized systematic probability-proportional-to-size design; fixed size
/// when the probabilities sum to an integer.
struct RandSysPpsDesign {
    InclusionProbs pi;
};

/// Stratified SRSWOR over contiguous unit blocks: stratum l covers the next
/// N_l units in universe order and draws n_l of them.
struct StratifiedSrsworDesign {
    std::vector<StratumInfo> strata;
};

using DesignSpec =
    std::variant<SrsworDesign, PoissonDesign, RandSysPpsDesign, StratifiedSrsworDesign>;

enum class DesignKind { srswor, poisson, randsys_pps, stratified_srswor };

inline DesignKind design_kind(const DesignSpec& d) {
    if (std::holds_alternative<SrsworDesign>(d)) return DesignKind::srswor;
    if (std::holds_alternative<PoissonDesign>(d)) return DesignKind::poisson;
    if (std::holds_alternative<RandSysPpsDesign>(d)) return DesignKind::randsys_pps;
    return DesignKind::stratified_srswor;
}

/// First-order inclusion probabilities proportional to a positive size
/// measure, with iterative capping at 1: pi_i = min(1, z * x_i / sum(x)),
/// z solved by bisection on sum(min(z p_i, 1)) = n, then snapped to the
/// exact solution of the active linear piece so the total hits n.
inline InclusionProbs pps_inclusion_probs(std::span<const double> size_measure, std::size_t n) {
    const std::size_t N = size_measure.size();
    if (n == 0) throw std::invalid_argument("pps_inclusion_probs: n must be positive");
    if (N == 0) throw std::invalid_argument("pps_inclusion_probs: empty size measure");
    if (n > N) throw std::invalid_argument("pps_inclusion_probs: n exceeds number of units");
    for (double x : size_measure)
        if (!(x > 0.0) || !std::isfinite(x))
            throw std::invalid_argument("pps_inclusion_probs: sizes must be positive and finite");

    KahanSum total;
    for (double x : size_measure) total.add(x);
    std::vector<double> p(N);
    double pmax = 0.0, pmin = 1.0;
    for (std::size_t i = 0; i < N; ++i) {
        p[i] = size_measure[i] / total.value();
        pmax = std::max(pmax, p[i]);
        pmin = std::min(pmin, p[i]);
    }

    const double nn = static_cast<double>(n);
    InclusionProbs pi(N);
    if (nn * pmax <= 1.0) {
        for (std::size_t i = 0; i < N; ++i) pi[i] = nn * p[i];
        return pi;
    }

    const auto capped_sum = [&](double z) {
        KahanSum s;
        for (double pj : p) s.add(std::min(z * pj, 1.0));
        return s.value();
    };

    double lo = nn, hi = nn / pmin; // capped_sum(lo) <= n <= capped_sum(hi)
    for (int it = 0; it < 200 && (hi - lo) > 1e-12 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (capped_sum(mid) < nn ? lo : hi) = mid;
    }

    // Snap to the linear piece the bracket landed on: with the capped set C
    // fixed, z = (n - |C|) / sum_{i not in C} p_i is exact. Re-deriving C can
    // move the set near a breakpoint, so iterate until stable.
    double z = 0.5 * (lo + hi);
    for (int it = 0; it < 100; ++it) {
        std::size_t ncap = 0;
        KahanSum rest;
        for (double pj : p) {
            if (z * pj >= 1.0) ++ncap;
            else rest.add(pj);
        }
        if (ncap == N) break; // all capped; only consistent when n == N
        const double znew = (nn - static_cast<double>(ncap)) / rest.value();
        if (znew == z) break;
        z = znew;
    }

    KahanSum check;
    for (std::size_t i = 0; i < N; ++i) {
        pi[i] = std::min(z * p[i], 1.0);
        check.add(pi[i]);
    }
    if (std::abs(check.value() - nn) > 1e-9 * std::max(1.0, nn))
        throw std::logic_error("pps_inclusion_probs: capping failed to reach target size");
    return pi;
}

namespace detail {

/// Without-replacement uniform index sampler. Keeps a permutation that is
/// always iota outside draw(), undoing its swaps after each call, so a draw
/// costs O(k) and its outcome depends only on the stream, never on history.
class SrsworScratch {
public:
    void draw(std::size_t universe, std::size_t k, RngStream& rng,
              std::vector<std::uint32_t>& out) {
        if (k > universe) throw std::invalid_argument("srswor: sample exceeds universe");
        if (perm_.size() != universe) {
            perm_.resize(universe);
            std::iota(perm_.begin(), perm_.end(), 0u);
        }
        picks_.resize(k);
        out.resize(k);
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(universe - i));
            picks_[i] = static_cast<std::uint32_t>(j);
            std::swap(perm_[i], perm_[j]);
            out[i] = perm_[i];
        }
        for (std::size_t i = k; i-- > 0;) std::swap(perm_[i], perm_[picks_[i]]);
    }

private:
    std::vector<std::uint32_t> perm_;
    std::vector<std::uint32_t> picks_;
};

/// Randomized systematic selection: random unit order, then a single
/// systematic pass with uniform start u. Unit (i) in permuted order is
/// selected once per integer in [T_{i-1} - u, T_i - u); pointers landing
/// exactly on a boundary T_i belong to the next unit. Respects per-unit
/// probabilities exactly and yields a fixed size when probs sum to an
/// integer. Zero-probability entries are never selected.
inline void randomized_systematic_draw(std::span<const double> probs, RngStream& rng,
                                       std::vector<std::uint32_t>& out,
                                       std::vector<std::uint32_t>& perm) {
    const std::size_t N = probs.size();
    out.clear();
    perm.resize(N);
    std::iota(perm.begin(), perm.end(), 0u);
    for (std::size_t i = 0; i + 1 < N; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(N - i));
        std::swap(perm[i], perm[j]);
    }
    const double u = rng.uniform01();
    double T = 0.0;
    double prev_ceil = 0.0; // ceil(T_0 - u) with T_0 = 0, u in (0,1)
    for (std::size_t i = 0; i < N; ++i) {
        const double pr = probs[perm[i]];
        if (!(pr >= 0.0 && pr <= 1.0))
            throw std::invalid_argument("randomized systematic draw: probs must lie in [0,1]");
        if (pr == 0.0) continue;
        T += pr;
        const double c = std::ceil(T - u);
        if (c > prev_ceil) out.push_back(perm[i]);
        prev_ceil = c;
    }
}

} // namespace detail

/// Draws one sample, returning selected unit indices in increasing order.
inline std::vector<std::uint32_t> draw(const DesignSpec& design, std::size_t universe_size,
                                       RngStream& rng) {
    std::vector<std::uint32_t> out;
    if (const auto* s = std::get_if<SrsworDesign>(&design)) {
        if (s->n == 0) throw std::invalid_argument("draw: SRSWOR sample size must be positive");
        if (s->n > universe_size) throw std::invalid_argument("draw: SRSWOR sample exceeds universe");
        detail::SrsworScratch scratch;
        scratch.draw(universe_size, s->n, rng, out);
    } else if (const auto* po = std::get_if<PoissonDesign>(&design)) {
        if (po->pi.size() != universe_size)
            throw std::invalid_argument("draw: Poisson probabilities do not match universe");
        for (std::size_t i = 0; i < universe_size; ++i) {
            const double pr = po->pi[i];
            if (!(pr > 0.0 && pr <= 1.0))
                throw std::invalid_argument("draw: Poisson probabilities must lie in (0,1]");
            if (rng.uniform01() < pr) out.push_back(static_cast<std::uint32_t>(i));
        }
    } else if (const auto* pps = std::get_if<RandSysPpsDesign>(&design)) {
        if (pps->pi.size() != universe_size)
            throw std::invalid_argument("draw: PPS probabilities do not match universe");
        std::vector<std::uint32_t> perm;
        detail::randomized_systematic_draw(pps->pi, rng, out, perm);
    } else {
        const auto& st = std::get<StratifiedSrsworDesign>(design).strata;
        if (st.empty()) throw std::invalid_argument("draw: no strata");
        std::size_t offset = 0;
        detail::SrsworScratch scratch;
        std::vector<std::uint32_t> block;
        for (const auto& s : st) {
            if (s.sample_size == 0 || s.sample_size > s.population_size)
                throw std::invalid_argument("draw: bad stratum sizes");
            scratch.draw(s.population_size, s.sample_size, rng, block);
            for (auto b : block) out.push_back(static_cast<std::uint32_t>(offset + b));
            offset += s.population_size;
        }
        if (offset != universe_size)
            throw std::invalid_argument("draw: strata do not cover the universe");
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace detail {

/// Design facts the bootstrap needs, recovered from a sample: the kind, the
/// (fixed) sample size, and for (stratified) SRSWOR the population sizes
/// implied by the weights.
struct DesignInfo {
    DesignKind kind = DesignKind::srswor;
    std::size_t n = 0;                    // sample size
    std::size_t population_size = 0;      // SRSWOR only
    std::vector<StratumInfo> strata;      // stratified only
};

inline std::size_t implied_population_size(std::span<const double> pi) {
    KahanSum s;
    for (double p : pi) s.add(1.0 / p);
    const double N = s.value();
    const double r = std::round(N);
    if (std::abs(N - r) > 1e-6 * std::max(1.0, N))
        throw std::invalid_argument("SRSWOR weights do not imply an integer population size");
    return static_cast<std::size_t>(r);
}

inline DesignInfo resolve_design(DesignKind kind, const WeightedSample& s) {
    validate(s);
    DesignInfo info;
    info.kind = kind;
    info.n = s.size();
    switch (kind) {
    case DesignKind::srswor: {
        for (double p : s.pi)
            if (std::abs(p - s.pi.front()) > 1e-9 * s.pi.front())
                throw std::invalid_argument("SRSWOR sample must have equal inclusion probabilities");
        info.population_size = implied_population_size(s.pi);
        if (info.population_size < info.n)
            throw std::invalid_argument("SRSWOR sample larger than implied population");
        break;
    }
    case DesignKind::stratified_srswor: {
        if (!s.stratified())
            throw std::invalid_argument("stratified design requires stratum metadata");
        info.strata = s.strata;
        break;
    }
    case DesignKind::poisson:
    case DesignKind::randsys_pps:
        break;
    }
    return info;
}

} // namespace detail

} // namespace sppb
