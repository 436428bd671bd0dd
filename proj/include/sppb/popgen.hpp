#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sppb/math.hpp"
#include "sppb/rng.hpp"

namespace sppb {

/// Fixed finite population. `x` is the positive size measure driving
/// unequal-probability designs; empty when the generator has none.
struct FinitePopulation {
    std::vector<double> y;
    std::vector<double> x;

    std::size_t size() const { return y.size(); }
    bool has_sizes() const { return !x.empty(); }
};

namespace detail {

/// Marsaglia-Tsang gamma(shape, 1) sampler.
inline double gamma_draw(double shape, RngStream& rng) {
    if (shape < 1.0) {
        const double u = rng.uniform01();
        return gamma_draw(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = rng.normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform01();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

inline double chi_squared_draw(double nu, RngStream& rng) {
    return 2.0 * gamma_draw(0.5 * nu, rng);
}

} // namespace detail

/// Symmetric-ish population y_i = gamma x_i + sigma e_i with x_i ~ chi^2_nu
/// and e_i standard normal; x is the size measure. Defaults give mean 60,
/// variance 216 and corr(y, x) = 1/sqrt(3).
inline FinitePopulation gen_sym(std::size_t N, RngStream& rng, double gamma = 0.6,
                                double nu = 100.0, double sigma = 12.0) {
    if (N == 0) throw std::invalid_argument("gen_sym: N must be positive");
    FinitePopulation pop;
    pop.y.resize(N);
    pop.x.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
        pop.x[i] = detail::chi_squared_draw(nu, rng);
        pop.y[i] = gamma * pop.x[i] + sigma * rng.normal();
    }
    return pop;
}

/// Right-skewed population y_i = x_i^beta e_i with lognormal x and e;
/// x is the size measure. Defaults make y ~ Lognormal(1.5, 1.389).
inline FinitePopulation gen_asym(std::size_t N, RngStream& rng, double beta = 0.5,
                                 double mu_x = 3.0, double sigma2_x = 1.0,
                                 double sigma2_eps = 1.139) {
    if (N == 0) throw std::invalid_argument("gen_asym: N must be positive");
    FinitePopulation pop;
    pop.y.resize(N);
    pop.x.resize(N);
    const double sx = std::sqrt(sigma2_x);
    const double se = std::sqrt(sigma2_eps);
    for (std::size_t i = 0; i < N; ++i) {
        pop.x[i] = std::exp(mu_x + sx * rng.normal());
        pop.y[i] = std::pow(pop.x[i], beta) * std::exp(se * rng.normal());
    }
    return pop;
}

inline FinitePopulation gen_normal(std::size_t N, RngStream& rng) {
    if (N == 0) throw std::invalid_argument("gen_normal: N must be positive");
    FinitePopulation pop;
    pop.y.resize(N);
    for (std::size_t i = 0; i < N; ++i) pop.y[i] = rng.normal();
    return pop;
}

inline FinitePopulation gen_lognormal(std::size_t N, RngStream& rng) {
    if (N == 0) throw std::invalid_argument("gen_lognormal: N must be positive");
    FinitePopulation pop;
    pop.y.resize(N);
    for (std::size_t i = 0; i < N; ++i) pop.y[i] = std::exp(rng.normal());
    return pop;
}

/// First N units of a master population, so nested scenario sizes share a
/// single realization.
inline FinitePopulation take_prefix(const FinitePopulation& pop, std::size_t N) {
    if (N == 0 || N > pop.size())
        throw std::invalid_argument("take_prefix: N must lie in [1, population size]");
    FinitePopulation out;
    out.y.assign(pop.y.begin(), pop.y.begin() + N);
    if (pop.has_sizes()) out.x.assign(pop.x.begin(), pop.x.begin() + N);
    return out;
}

inline void write_population_csv(const FinitePopulation& pop, std::ostream& os) {
    os << (pop.has_sizes() ? "index,y,x\n" : "index,y\n");
    for (std::size_t i = 0; i < pop.size(); ++i) {
        os << i << ',' << format_g17(pop.y[i]);
        if (pop.has_sizes()) os << ',' << format_g17(pop.x[i]);
        os << '\n';
    }
}

inline void write_population_csv(const FinitePopulation& pop, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    write_population_csv(pop, os);
    if (!os) throw std::runtime_error("write failed: " + path);
}

inline FinitePopulation read_population_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("population csv: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const bool with_x = line == "index,y,x";
    if (!with_x && line != "index,y")
        throw std::runtime_error("population csv: header must be 'index,y' or 'index,y,x'");
    FinitePopulation pop;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const char* s = line.c_str();
        char* end = nullptr;
        const auto bad = [&](const char* what) {
            return std::runtime_error(std::string("population csv: ") + what + " at line " +
                                      std::to_string(lineno));
        };
        const unsigned long long idx = std::strtoull(s, &end, 10);
        if (end == s || *end != ',') throw bad("bad index");
        if (idx != pop.y.size()) throw bad("index out of sequence");
        const char* sy = end + 1;
        const double y = std::strtod(sy, &end);
        if (end == sy) throw bad("bad value");
        pop.y.push_back(y);
        if (with_x) {
            if (*end != ',') throw bad("missing x");
            const char* sx = end + 1;
            const double x = std::strtod(sx, &end);
            if (end == sx) throw bad("bad x");
            pop.x.push_back(x);
        }
    }
    if (pop.y.empty()) throw std::runtime_error("population csv: no rows");
    return pop;
}

inline FinitePopulation read_population_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    return read_population_csv(is);
}

} // namespace sppb
