#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sppb/quantile.hpp"

namespace sppb {

using json = nlohmann::json;

struct MethodSpec {
    enum class Type { unsmoothed, fixed, plugin, boot };
    Type type = Type::unsmoothed;
    // fixed: exactly one of the two is set
    double h = -1.0;
    double constant = -1.0;
    // boot
    double c_lo = 0.0, c_hi = 0.0;
    std::size_t m = 50, D = 50;
    std::string label;
};

struct PopulationConfig {
    std::string generator; // sym | asym | normal | lognormal; empty when csv
    std::string csv_path;
    std::size_t size = 7142;
    double gamma = 0.6, nu = 100.0, sigma = 12.0;                    // sym
    double beta = 0.5, mu_x = 3.0, sigma2_x = 1.0, sigma2_eps = 1.139; // asym
};

/// Full description of one simulation study; `seed` drives every random
/// stream, so equal configs give byte-identical reports.
struct StudyConfig {
    PopulationConfig population;
    std::string design = "srswor"; // srswor | poisson | randsys_pps | stratified_srswor
    std::vector<StratumInfo> strata;
    std::size_t n = 0;
    double f = 0.0;  // sampling fraction; scenario population size N = floor(n/f)
    double p = 0.5;  // quantile level
    double alpha = 0.05;
    std::size_t B = 1000;
    std::size_t R = 1000;
    std::size_t mse_samples = 3000;
    std::vector<MethodSpec> methods;
    std::uint64_t seed = 0;
    std::size_t workers = 0; // 0 = SPPB_WORKERS env or 1
    std::string output_dir = "out";

    // floor(n/f), nudged so ratios meant to be whole (f = 1/k) survive
    // binary rounding of f.
    std::size_t scenario_population_size() const {
        const double v = static_cast<double>(n) / f;
        return static_cast<std::size_t>(std::floor(v + v * 1e-12));
    }
};

namespace detail {

inline void expect_keys(const json& j, std::initializer_list<const char*> allowed,
                        const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok)
            throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
    }
}

inline std::string trimmed_number(double v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

inline std::string default_label(const MethodSpec& m) {
    switch (m.type) {
    case MethodSpec::Type::unsmoothed: return "UNSMTHD";
    case MethodSpec::Type::fixed:
        return m.constant >= 0.0 ? "FIXED(" + trimmed_number(m.constant) + ")"
                                 : "FIXED(h=" + trimmed_number(m.h) + ")";
    case MethodSpec::Type::plugin: return "PLUG-IN";
    case MethodSpec::Type::boot: return "BOOT";
    }
    return "?";
}

} // namespace detail

inline void validate(const StudyConfig& c) {
    const auto& pop = c.population;
    if (pop.generator.empty() == pop.csv_path.empty())
        throw std::invalid_argument("config: population needs exactly one of generator/csv");
    if (!pop.generator.empty() && pop.generator != "sym" && pop.generator != "asym" &&
        pop.generator != "normal" && pop.generator != "lognormal")
        throw std::invalid_argument("config: unknown generator '" + pop.generator + "'");
    if (pop.size == 0) throw std::invalid_argument("config: population size must be positive");
    if (c.n == 0) throw std::invalid_argument("config: n must be positive");
    if (!(c.f > 0.0 && c.f <= 1.0)) throw std::invalid_argument("config: f must lie in (0,1]");
    if (!(c.p > 0.0 && c.p < 1.0)) throw std::invalid_argument("config: p must lie in (0,1)");
    if (!(c.alpha > 0.0 && c.alpha < 1.0))
        throw std::invalid_argument("config: alpha must lie in (0,1)");
    if (c.B == 0 || c.R == 0 || c.mse_samples == 0)
        throw std::invalid_argument("config: B, R and mse_samples must be positive");
    const std::size_t N = c.scenario_population_size();
    if (N < c.n) throw std::invalid_argument("config: f implies a population smaller than n");

    if (c.design == "stratified_srswor") {
        if (c.strata.empty()) throw std::invalid_argument("config: stratified design needs strata");
        std::size_t Nsum = 0, nsum = 0;
        for (const auto& st : c.strata) {
            if (st.sample_size == 0 || st.sample_size > st.population_size)
                throw std::invalid_argument("config: bad stratum sizes");
            Nsum += st.population_size;
            nsum += st.sample_size;
        }
        if (nsum != c.n) throw std::invalid_argument("config: stratum sample sizes must sum to n");
        if (Nsum != N)
            throw std::invalid_argument("config: stratum population sizes must sum to floor(n/f)");
    } else if (c.design == "srswor" || c.design == "poisson" || c.design == "randsys_pps") {
        if (!c.strata.empty())
            throw std::invalid_argument("config: strata given for an unstratified design");
    } else {
        throw std::invalid_argument("config: unknown design '" + c.design + "'");
    }

    if (c.methods.empty()) throw std::invalid_argument("config: methods must be nonempty");
    std::vector<std::string> labels;
    for (const auto& m : c.methods) {
        switch (m.type) {
        case MethodSpec::Type::fixed:
            if ((m.h >= 0.0) == (m.constant >= 0.0))
                throw std::invalid_argument("config: fixed method needs exactly one of h/constant");
            break;
        case MethodSpec::Type::plugin:
            if (c.design != "srswor")
                throw std::invalid_argument("config: plugin bandwidth requires the srswor design");
            break;
        case MethodSpec::Type::boot:
            if (!(m.c_lo > 0.0) || m.c_hi < m.c_lo)
                throw std::invalid_argument("config: boot grid needs 0 < c_lo <= c_hi");
            if (m.m == 0 || m.D == 0)
                throw std::invalid_argument("config: boot needs positive m and D");
            break;
        case MethodSpec::Type::unsmoothed: break;
        }
        labels.push_back(m.label);
    }
    std::sort(labels.begin(), labels.end());
    if (std::adjacent_find(labels.begin(), labels.end()) != labels.end())
        throw std::invalid_argument("config: method labels must be unique");
}

inline StudyConfig parse_config(const json& root) {
    // A manifest from a previous run replays as-is.
    const json& j = root.contains("config") ? root.at("config") : root;

    detail::expect_keys(j,
                        {"population", "design", "strata", "n", "f", "p", "alpha", "B", "R",
                         "mse_samples", "methods", "seed", "workers", "output_dir"},
                        "study config");
    for (const char* req : {"population", "n", "f", "methods", "seed"})
        if (!j.contains(req))
            throw std::invalid_argument(std::string("config: missing required key '") + req + "'");

    StudyConfig c;
    const json& jp = j.at("population");
    if (jp.contains("csv")) {
        detail::expect_keys(jp, {"csv"}, "population");
        c.population.csv_path = jp.at("csv").get<std::string>();
    } else {
        detail::expect_keys(
            jp, {"generator", "size", "gamma", "nu", "sigma", "beta", "mu_x", "sigma2_x", "sigma2_eps"},
            "population");
        c.population.generator = jp.value("generator", std::string());
        c.population.size = jp.value("size", c.population.size);
        c.population.gamma = jp.value("gamma", c.population.gamma);
        c.population.nu = jp.value("nu", c.population.nu);
        c.population.sigma = jp.value("sigma", c.population.sigma);
        c.population.beta = jp.value("beta", c.population.beta);
        c.population.mu_x = jp.value("mu_x", c.population.mu_x);
        c.population.sigma2_x = jp.value("sigma2_x", c.population.sigma2_x);
        c.population.sigma2_eps = jp.value("sigma2_eps", c.population.sigma2_eps);
    }

    c.design = j.value("design", c.design);
    if (j.contains("strata")) {
        for (const auto& row : j.at("strata")) {
            if (!row.is_array() || row.size() != 2)
                throw std::invalid_argument("config: strata entries must be [N_l, n_l] pairs");
            c.strata.push_back({row.at(0).get<std::size_t>(), row.at(1).get<std::size_t>()});
        }
    }
    c.n = j.at("n").get<std::size_t>();
    c.f = j.at("f").get<double>();
    c.p = j.value("p", c.p);
    c.alpha = j.value("alpha", c.alpha);
    c.B = j.value("B", c.B);
    c.R = j.value("R", c.R);
    c.mse_samples = j.value("mse_samples", c.mse_samples);
    c.seed = j.at("seed").get<std::uint64_t>();
    c.workers = j.value("workers", c.workers);
    c.output_dir = j.value("output_dir", c.output_dir);

    for (const auto& jm : j.at("methods")) {
        detail::expect_keys(jm, {"type", "h", "constant", "c_lo", "c_hi", "m", "D", "label"},
                            "method");
        MethodSpec m;
        const std::string type = jm.at("type").get<std::string>();
        if (type == "unsmoothed") m.type = MethodSpec::Type::unsmoothed;
        else if (type == "fixed") m.type = MethodSpec::Type::fixed;
        else if (type == "plugin") m.type = MethodSpec::Type::plugin;
        else if (type == "boot") m.type = MethodSpec::Type::boot;
        else throw std::invalid_argument("config: unknown method type '" + type + "'");
        if (jm.contains("h")) m.h = jm.at("h").get<double>();
        if (jm.contains("constant")) m.constant = jm.at("constant").get<double>();
        m.c_lo = jm.value("c_lo", m.c_lo);
        m.c_hi = jm.value("c_hi", m.c_hi);
        m.m = jm.value("m", m.m);
        m.D = jm.value("D", m.D);
        m.label = jm.value("label", std::string());
        if (m.label.empty()) m.label = detail::default_label(m);
        c.methods.push_back(std::move(m));
    }

    validate(c);
    return c;
}

inline StudyConfig parse_config(const std::string& text) {
    return parse_config(json::parse(text));
}

inline json config_to_json(const StudyConfig& c) {
    json j;
    json jp;
    if (!c.population.csv_path.empty()) {
        jp["csv"] = c.population.csv_path;
    } else {
        jp["generator"] = c.population.generator;
        jp["size"] = c.population.size;
        if (c.population.generator == "sym") {
            jp["gamma"] = c.population.gamma;
            jp["nu"] = c.population.nu;
            jp["sigma"] = c.population.sigma;
        } else if (c.population.generator == "asym") {
            jp["beta"] = c.population.beta;
            jp["mu_x"] = c.population.mu_x;
            jp["sigma2_x"] = c.population.sigma2_x;
            jp["sigma2_eps"] = c.population.sigma2_eps;
        }
    }
    j["population"] = jp;
    j["design"] = c.design;
    if (!c.strata.empty()) {
        json js = json::array();
        for (const auto& st : c.strata)
            js.push_back(json::array({st.population_size, st.sample_size}));
        j["strata"] = js;
    }
    j["n"] = c.n;
    j["f"] = c.f;
    j["p"] = c.p;
    j["alpha"] = c.alpha;
    j["B"] = c.B;
    j["R"] = c.R;
    j["mse_samples"] = c.mse_samples;
    j["seed"] = c.seed;
    j["workers"] = c.workers;
    j["output_dir"] = c.output_dir;
    json jms = json::array();
    for (const auto& m : c.methods) {
        json jm;
        switch (m.type) {
        case MethodSpec::Type::unsmoothed: jm["type"] = "unsmoothed"; break;
        case MethodSpec::Type::fixed:
            jm["type"] = "fixed";
            if (m.constant >= 0.0) jm["constant"] = m.constant;
            else jm["h"] = m.h;
            break;
        case MethodSpec::Type::plugin: jm["type"] = "plugin"; break;
        case MethodSpec::Type::boot:
            jm["type"] = "boot";
            jm["c_lo"] = m.c_lo;
            jm["c_hi"] = m.c_hi;
            jm["m"] = m.m;
            jm["D"] = m.D;
            break;
        }
        jm["label"] = m.label;
        jms.push_back(jm);
    }
    j["methods"] = jms;
    return j;
}

} // namespace sppb
