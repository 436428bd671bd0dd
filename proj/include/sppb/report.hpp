#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "sppb/config.hpp"
#include "sppb/study.hpp"
#include "sppb/version.hpp"

namespace sppb {

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot open for writing: " + p.string());
    return os;
}

} // namespace detail

/// Writes the study artifacts into `dir`: metrics.csv, replicates.csv,
/// selected_h.csv / risk_curves.csv when applicable, and manifest.json.
/// Every number is %.17g, timings are deliberately left out, and the
/// manifest replays through `parse_config`, so reruns are byte-identical.
inline void emit_report(const StudyReport& rep, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    {
        auto os = detail::open_out(dir / "metrics.csv");
        os << "method,bias_pct,rrmse_pct,normal_l_pct,normal_u_pct,normal_two_tail_pct,"
              "basic_l_pct,basic_u_pct,basic_two_tail_pct\n";
        for (const auto& m : rep.metrics) {
            os << m.method << ',' << format_g17(m.bias_pct) << ',' << format_g17(m.rrmse_pct)
               << ',' << format_g17(m.normal_l_pct) << ',' << format_g17(m.normal_u_pct) << ','
               << format_g17(m.normal_two_tail_pct) << ',' << format_g17(m.basic_l_pct) << ','
               << format_g17(m.basic_u_pct) << ',' << format_g17(m.basic_two_tail_pct) << '\n';
        }
    }

    {
        auto os = detail::open_out(dir / "replicates.csv");
        os << "replicate,method,v_hat,h,normal_lo,normal_hi,basic_lo,basic_hi\n";
        for (std::size_t r = 0; r < rep.rows.size(); ++r)
            for (std::size_t mi = 0; mi < rep.rows[r].size(); ++mi) {
                const auto& row = rep.rows[r][mi];
                os << r << ',' << rep.config.methods[mi].label << ',' << format_g17(row.v_hat)
                   << ',' << format_g17(row.h) << ',' << format_g17(row.normal.lo) << ','
                   << format_g17(row.normal.hi) << ',' << format_g17(row.basic.lo) << ','
                   << format_g17(row.basic.hi) << '\n';
            }
    }

    bool any_constant = false;
    for (const auto& rrow : rep.rows)
        for (const auto& row : rrow) any_constant |= row.has_constant;
    if (any_constant) {
        auto os = detail::open_out(dir / "selected_h.csv");
        os << "replicate,method,constant\n";
        for (std::size_t r = 0; r < rep.rows.size(); ++r)
            for (std::size_t mi = 0; mi < rep.rows[r].size(); ++mi)
                if (rep.rows[r][mi].has_constant)
                    os << r << ',' << rep.config.methods[mi].label << ','
                       << format_g17(rep.rows[r][mi].constant) << '\n';
    }

    if (!rep.risk_curves.empty()) {
        auto os = detail::open_out(dir / "risk_curves.csv");
        os << "method,constant,mean_risk\n";
        for (const auto& [label, curve] : rep.risk_curves)
            for (const auto& [c, risk] : curve)
                os << label << ',' << format_g17(c) << ',' << format_g17(risk) << '\n';
    }

    {
        json j;
        j["config"] = config_to_json(rep.config);
        j["versions"] = {{"sppb", version}};
        j["true_mse"] = rep.true_mse;
        j["xi"] = rep.xi;
        j["coverage_bands"] = {{"two_tail", {rep.bands.two_tail_lo, rep.bands.two_tail_hi}},
                               {"one_tail", {rep.bands.one_tail_lo, rep.bands.one_tail_hi}}};
        j["sample_redraws"] = rep.sample_redraws;
        auto os = detail::open_out(dir / "manifest.json");
        os << j.dump(2) << '\n';
    }
}

} // namespace sppb
