// Independent oracles used by the tests: numeric quadrature, KS distance,
// closed-form lognormal quantities, and exact small-instance enumeration of
// the SRSWOR pseudo-population bootstrap. Nothing here reuses library
// internals beyond elementary calls, so expected values are derived
// independently of the code under test.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "sppb/math.hpp"
#include "sppb/quantile.hpp"

namespace oracle {

inline double simpson(const std::function<double(double)>& f, double a, double b,
                      std::size_t intervals) {
    if (intervals % 2 != 0) ++intervals;
    const double h = (b - a) / static_cast<double>(intervals);
    double acc = f(a) + f(b);
    for (std::size_t i = 1; i < intervals; ++i)
        acc += f(a + h * static_cast<double>(i)) * ((i % 2 == 1) ? 4.0 : 2.0);
    return acc * h / 3.0;
}

/// Kolmogorov-Smirnov distance between draws and a reference CDF.
inline double ks_distance(std::vector<double> draws, const std::function<double(double)>& cdf) {
    std::sort(draws.begin(), draws.end());
    const double n = static_cast<double>(draws.size());
    double d = 0.0;
    for (std::size_t i = 0; i < draws.size(); ++i) {
        const double F = cdf(draws[i]);
        d = std::max(d, std::abs(F - static_cast<double>(i) / n));
        d = std::max(d, std::abs(F - static_cast<double>(i + 1) / n));
    }
    return d;
}

/// Lognormal(mu, s2) closed forms, including the curvature term
/// d = f''(y) - f'(y)^2 / f(y) entering the optimal bandwidth constant.
struct LognormalLaw {
    double mu = 0.0;
    double s2 = 1.0;

    double s() const { return std::sqrt(s2); }
    double quantile(double p) const { return std::exp(mu + s() * sppb::normal_quantile(p)); }
    double pdf(double y) const {
        const double u = (std::log(y) - mu) / s();
        return sppb::normal_pdf(u) / (y * s());
    }
    double curvature(double y) const {
        const double u = (std::log(y) - mu) / s();
        return pdf(y) / (y * y) * (u / s() + 1.0 - 1.0 / s2);
    }
    double mean() const { return std::exp(mu + 0.5 * s2); }
    double sd() const { return std::sqrt((std::exp(s2) - 1.0) * std::exp(2.0 * mu + s2)); }
};

template <typename Fn>
inline void for_each_combination(std::size_t n, std::size_t k, Fn&& fn) {
    if (k > n) return;
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (k == 0) {
        fn(std::span<const std::size_t>(idx));
        return;
    }
    for (;;) {
        fn(std::span<const std::size_t>(idx));
        std::size_t i = k;
        while (i > 0 && idx[i - 1] == n - k + (i - 1)) --i;
        if (i == 0) return;
        ++idx[i - 1];
        for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
}

struct EnumeratedBootstrap {
    double mse = 0.0;           // E (theta_hat* - theta*)^2
    double second_moment = 0.0; // E (theta_hat* - theta*)^4, for MC error bars
};

/// Exact unsmoothed SRSWOR pseudo-population bootstrap MSE for a sample y of
/// size n from a population of size N: every floor-completion (an r-subset of
/// the sample getting one extra copy, r = N - n*floor(N/n)) and every size-n
/// bootstrap subset of the N entries, all equally likely.
inline EnumeratedBootstrap enumerate_srswor_bootstrap(const std::vector<double>& y,
                                                      std::size_t N, double p) {
    const std::size_t n = y.size();
    if (n == 0 || N < n) throw std::invalid_argument("enumerate: bad sizes");
    const std::size_t k = N / n;
    const std::size_t r = N - n * k;

    double sum2 = 0.0, sum4 = 0.0;
    std::size_t outcomes = 0;
    for_each_combination(n, r, [&](std::span<const std::size_t> extra) {
        std::vector<double> pseudo;
        pseudo.reserve(N);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < k; ++c) pseudo.push_back(y[i]);
        for (auto e : extra) pseudo.push_back(y[e]);
        const double theta_star = sppb::finite_population_quantile(pseudo, p);
        for_each_combination(N, n, [&](std::span<const std::size_t> sub) {
            std::vector<double> pick(sub.size());
            for (std::size_t j = 0; j < sub.size(); ++j) pick[j] = pseudo[sub[j]];
            const double diff = sppb::finite_population_quantile(pick, p) - theta_star;
            sum2 += diff * diff;
            sum4 += diff * diff * diff * diff;
            ++outcomes;
        });
    });
    return {sum2 / static_cast<double>(outcomes), sum4 / static_cast<double>(outcomes)};
}

inline double correlation(std::span<const double> a, std::span<const double> b) {
    const double ma = sppb::sample_mean(a), mb = sppb::sample_mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

} // namespace oracle
