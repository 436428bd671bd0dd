#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sppb/math.hpp"
#include "sppb/rng.hpp"

namespace sppb {

/// Smoothing kernel: density k, its CDF K, a sampler drawing from k, and the
/// two moments that enter bandwidth constants,
///   kappa1 = integral of t^2 k(t) dt,   kappa2 = integral of k(t)^2 dt.
struct Kernel {
    std::string name;
    std::function<double(double)> pdf;
    std::function<double(double)> cdf;
    std::function<double(RngStream&)> draw;
    double kappa1 = 0.0;
    double kappa2 = 0.0;
};

inline Kernel gaussian_kernel() {
    Kernel k;
    k.name = "gaussian";
    k.pdf = [](double t) { return normal_pdf(t); };
    k.cdf = [](double t) { return normal_cdf(t); };
    k.draw = [](RngStream& rng) { return rng.normal(); };
    k.kappa1 = 1.0;
    k.kappa2 = 0.5 / std::sqrt(pi_const);
    return k;
}

inline void sample_noise(const Kernel& k, std::size_t count, RngStream& rng,
                         std::vector<double>& out) {
    out.resize(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = k.draw(rng);
}

inline std::vector<double> sample_noise(const Kernel& k, std::size_t count, RngStream& rng) {
    std::vector<double> out;
    sample_noise(k, count, rng, out);
    return out;
}

} // namespace sppb
