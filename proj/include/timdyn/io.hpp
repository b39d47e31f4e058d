// Serialization: CSV trajectories and scan tables, JSON reports. All floats
// go out with 17 significant digits so a parsed-back value is bit-identical.

#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "timdyn/analysis.hpp"
#include "timdyn/integrate.hpp"
#include "timdyn/stability.hpp"

namespace timdyn {

using ordered_json = nlohmann::ordered_json;

inline constexpr const char* kTrajectoryCsvHeader = "t,T,I,M";
inline constexpr const char* kScanCsvHeader = "r0,regime,delta_rh,p0_label,pe_label,alpha";

/// Shortest decimal with 17 significant digits; round-trips any finite double.
inline std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os << kTrajectoryCsvHeader << '\n';
    for (const Sample& s : traj.samples)
        os << format_g17(s.t) << ',' << format_g17(s.x.transmission()) << ','
           << format_g17(s.x.perception()) << ',' << format_g17(s.x.memory()) << '\n';
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

inline double parse_double(const std::string& s) {
    const char* begin = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw std::runtime_error("CSV: malformed number '" + s + "'");
    return v;
}

}  // namespace detail

inline std::vector<Sample> read_trajectory_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("CSV: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kTrajectoryCsvHeader)
        throw std::runtime_error("CSV: expected header '" + std::string(kTrajectoryCsvHeader) +
                                 "', got '" + line + "'");
    std::vector<Sample> samples;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 4)
            throw std::runtime_error("CSV: expected 4 fields, got " +
                                     std::to_string(fields.size()));
        const double t = detail::parse_double(fields[0]);
        const Vec3 x = {detail::parse_double(fields[1]), detail::parse_double(fields[2]),
                        detail::parse_double(fields[3])};
        samples.push_back({t, State(x)});
    }
    return samples;
}

inline void write_scan_csv(std::ostream& os, const std::vector<RegimeRecord>& records) {
    os << kScanCsvHeader << '\n';
    for (const RegimeRecord& r : records) {
        os << format_g17(r.r0) << ',' << regime_name(r.regime) << ',';
        if (!std::isnan(r.delta_rh)) os << format_g17(r.delta_rh);
        os << ',' << stability_label_name(r.p0_label) << ',';
        if (r.pe_label) os << stability_label_name(*r.pe_label);
        os << ',';
        if (!std::isnan(r.alpha)) os << format_g17(r.alpha);
        os << '\n';
    }
}

inline ordered_json to_json(const StabilityReport& rep, const State& point) {
    ordered_json j;
    j["branch"] = branch_name(rep.branch);
    j["point"] = {point.transmission(), point.perception(), point.memory()};
    ordered_json eigs = ordered_json::array();
    for (const Complex& ev : rep.eigenvalues)
        eigs.push_back(ordered_json{{"re", ev.real()}, {"im", ev.imag()}});
    j["eigenvalues"] = eigs;
    j["rh_verdict"] = rh_verdict_name(rep.rh_verdict);
    j["label"] = stability_label_name(rep.label);
    return j;
}

/// The `equilibria` report: one entry per branch, ordered [P0, PePlus, PeMinus].
inline ordered_json equilibria_report(const ParamSet& p) {
    ordered_json arr = ordered_json::array();
    for (const Equilibrium& eq : equilibria(p))
        arr.push_back(to_json(classify_equilibrium(p, eq), eq.point));
    return arr;
}

/// Chaos verdict used in the lyapunov report: a conservative band around zero.
inline const char* chaos_label(double lambda1) {
    if (lambda1 > 0.05) return "chaotic";
    if (lambda1 < -0.05) return "non-chaotic";
    return "inconclusive";
}

inline ordered_json lyapunov_report(const ParamSet& p, const LyapunovResult& res) {
    const double trace = -(p.sigma() + 1.0 + p.beta());
    ordered_json j;
    j["exponents"] = {res.exponents[0], res.exponents[1], res.exponents[2]};
    j["sum"] = res.sum;
    j["trace_identity_residual"] = std::abs(res.sum - trace) / std::abs(trace);
    j["regime_label"] = chaos_label(res.exponents[0]);
    j["horizon"] = res.horizon;
    j["renorm_interval"] = res.renorm_interval;
    j["transient_discarded"] = res.transient_discarded;
    j["drift_warning"] = res.drift_warning;
    return j;
}

inline ordered_json trajectory_report(const Trajectory& traj) {
    ordered_json j;
    j["params"] = {{"sigma", traj.params.sigma()},
                   {"r0", traj.params.r0()},
                   {"beta", traj.params.beta()}};
    j["method"] = method_name(traj.meta.method);
    j["accepted_steps"] = traj.meta.accepted_steps;
    j["rejected_steps"] = traj.meta.rejected_steps;
    ordered_json rows = ordered_json::array();
    for (const Sample& s : traj.samples)
        rows.push_back(ordered_json{{"t", s.t},
                                    {"T", s.x.transmission()},
                                    {"I", s.x.perception()},
                                    {"M", s.x.memory()}});
    j["samples"] = rows;
    return j;
}

}  // namespace timdyn
