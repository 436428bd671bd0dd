#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sppb/math.hpp"

namespace sppb {

struct StratumInfo {
    std::size_t population_size = 0; // N_l
    std::size_t sample_size = 0;     // n_l
};

/// A drawn sample with first-order inclusion probabilities. For stratified
/// designs `stratum` labels each unit and `strata` carries (N_l, n_l);
/// both stay empty otherwise.
struct WeightedSample {
    std::vector<double> y;
    std::vector<double> pi;
    std::vector<std::uint32_t> stratum;
    std::vector<StratumInfo> strata;

    std::size_t size() const { return y.size(); }
    bool stratified() const { return !strata.empty(); }
};

inline void validate(const WeightedSample& s) {
    if (s.y.empty()) throw std::invalid_argument("WeightedSample: empty sample");
    if (s.pi.size() != s.y.size())
        throw std::invalid_argument("WeightedSample: y/pi length mismatch");
    for (double p : s.pi)
        if (!(p > 0.0 && p <= 1.0))
            throw std::invalid_argument("WeightedSample: pi must lie in (0,1]");
    if (s.stratified()) {
        if (s.stratum.size() != s.y.size())
            throw std::invalid_argument("WeightedSample: missing stratum labels");
        std::vector<std::size_t> counts(s.strata.size(), 0);
        for (auto l : s.stratum) {
            if (l >= s.strata.size())
                throw std::invalid_argument("WeightedSample: stratum label out of range");
            ++counts[l];
        }
        for (std::size_t l = 0; l < s.strata.size(); ++l) {
            if (s.strata[l].sample_size != counts[l])
                throw std::invalid_argument("WeightedSample: stratum sample size mismatch");
            if (s.strata[l].population_size < s.strata[l].sample_size ||
                s.strata[l].sample_size == 0)
                throw std::invalid_argument("WeightedSample: bad stratum sizes");
        }
    } else if (!s.stratum.empty()) {
        throw std::invalid_argument("WeightedSample: stratum labels without strata metadata");
    }
}

namespace detail {

inline constexpr double cdf_tie_tol = 1e-12;

/// p-th finite population quantile, reordering `v` in place.
///
/// Inverts the population CDF F(t) = N^{-1} sum 1(y_i <= t): when p*N hits a
/// jump point exactly (relative tolerance 1e-12 on the count scale) the
/// result is the midpoint of the k-th and (k+1)-th order statistics, which
/// for tied values collapses to the shared value; otherwise it is the
/// ceil(p*N)-th order statistic.
inline double quantile_inplace(std::span<double> v, double p) {
    const std::size_t N = v.size();
    if (N == 0) throw std::invalid_argument("quantile: empty input");
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile: p must lie in (0,1)");
    const double m = p * static_cast<double>(N);
    const double r = std::round(m);
    if (std::abs(m - r) <= cdf_tie_tol * std::max(1.0, m) &&
        r >= 1.0 && r <= static_cast<double>(N - 1)) {
        const std::size_t k = static_cast<std::size_t>(r);
        std::nth_element(v.begin(), v.begin() + (k - 1), v.end());
        const double lo = v[k - 1];
        double hi = v[k];
        for (std::size_t i = k + 1; i < N; ++i) hi = std::min(hi, v[i]);
        return 0.5 * (lo + hi);
    }
    std::size_t k = static_cast<std::size_t>(std::ceil(m - cdf_tie_tol * std::max(1.0, m)));
    k = std::clamp<std::size_t>(k, 1, N);
    std::nth_element(v.begin(), v.begin() + (k - 1), v.end());
    return v[k - 1];
}

/// Weighted CDF inversion over distinct sorted values with the same jump
/// rule: exact hit on a jump (1e-12 relative) averages the value with the
/// next distinct one. `pairs` is sorted in place.
inline double invert_weighted_cdf(std::vector<std::pair<double, double>>& pairs,
                                  double total_weight, double p) {
    if (pairs.empty()) throw std::invalid_argument("weighted quantile: empty input");
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("weighted quantile: p must lie in (0,1)");
    if (!(total_weight > 0.0))
        throw std::invalid_argument("weighted quantile: total weight must be positive");
    std::sort(pairs.begin(), pairs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    const double target = p * total_weight;
    KahanSum cum;
    std::size_t i = 0;
    const std::size_t n = pairs.size();
    while (i < n) {
        const double value = pairs[i].first;
        while (i < n && pairs[i].first == value) {
            cum.add(pairs[i].second);
            ++i;
        }
        const double c = cum.value();
        if (std::abs(c - target) <= cdf_tie_tol * std::max(c, target)) {
            if (i < n) return 0.5 * (value + pairs[i].first);
            return value;
        }
        if (c > target) return value;
    }
    return pairs.back().first; // unreachable for p < 1 up to roundoff
}

} // namespace detail

inline double finite_population_quantile(std::span<const double> values, double p) {
    std::vector<double> v(values.begin(), values.end());
    return detail::quantile_inplace(v, p);
}

/// General weighted quantile with positive weights (the usual sample quantile
/// when weights are equal).
inline double weighted_quantile(std::span<const double> y, std::span<const double> w, double p) {
    if (y.size() != w.size()) throw std::invalid_argument("weighted_quantile: length mismatch");
    std::vector<std::pair<double, double>> pairs(y.size());
    KahanSum total;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!(w[i] > 0.0)) throw std::invalid_argument("weighted_quantile: weights must be positive");
        pairs[i] = {y[i], w[i]};
        total.add(w[i]);
    }
    return detail::invert_weighted_cdf(pairs, total.value(), p);
}

/// Hajek estimator of the population CDF at t.
inline double hajek_cdf(const WeightedSample& s, double t) {
    validate(s);
    KahanSum num, den;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double w = 1.0 / s.pi[i];
        den.add(w);
        if (s.y[i] <= t) num.add(w);
    }
    return num.value() / den.value();
}

/// Design-weighted quantile: inverts the Hajek CDF with weights 1/pi.
inline double design_quantile(const WeightedSample& s, double p) {
    validate(s);
    std::vector<std::pair<double, double>> pairs(s.size());
    KahanSum total;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double w = 1.0 / s.pi[i];
        pairs[i] = {s.y[i], w};
        total.add(w);
    }
    return detail::invert_weighted_cdf(pairs, total.value(), p);
}

/// Stratified expansion CDF: F(t) = N^{-1} sum_l (N_l/n_l) #\{i in S_l : y_i <= t\},
/// with N = sum_l N_l. With a single stratum this is hajek_cdf with pi = n/N.
inline double stratified_cdf(const WeightedSample& s, double t) {
    validate(s);
    if (!s.stratified()) throw std::invalid_argument("stratified_cdf: sample has no strata");
    double N = 0.0;
    for (const auto& st : s.strata) N += static_cast<double>(st.population_size);
    KahanSum num;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.y[i] <= t) {
            const auto& st = s.strata[s.stratum[i]];
            num.add(static_cast<double>(st.population_size) /
                    static_cast<double>(st.sample_size));
        }
    }
    return num.value() / N;
}

inline double stratified_quantile(const WeightedSample& s, double p) {
    validate(s);
    if (!s.stratified()) throw std::invalid_argument("stratified_quantile: sample has no strata");
    double N = 0.0;
    for (const auto& st : s.strata) N += static_cast<double>(st.population_size);
    std::vector<std::pair<double, double>> pairs(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto& st = s.strata[s.stratum[i]];
        pairs[i] = {s.y[i], static_cast<double>(st.population_size) /
                                static_cast<double>(st.sample_size)};
    }
    return detail::invert_weighted_cdf(pairs, N, p);
}

} // namespace sppb
