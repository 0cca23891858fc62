#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "plap/eigensolve.hpp"
#include "plap/minimax.hpp"

namespace plap {

using json = nlohmann::json;

/// Writes a field as CSV "index,(coords...),value" with 17 significant
/// digits, which round-trips finite doubles bitwise.
inline void write_field_file(const Field& u, const Grid& g, const std::string& path) {
    g.require_conforming(u, "write_field_file");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_field_file: cannot open " + path);
    out << "index";
    for (int a = 1; a <= g.dims; ++a) out << ",x" << a;
    out << ",value\n";
    char buf[64];
    for (long j = 0; j < g.num_dofs; ++j) {
        out << j;
        auto xs = g.dof_coords(j);
        for (double x : xs) {
            std::snprintf(buf, sizeof(buf), "%.17g", x);
            out << ',' << buf;
        }
        std::snprintf(buf, sizeof(buf), "%.17g", u[static_cast<std::size_t>(j)]);
        out << ',' << buf << '\n';
    }
    if (!out) throw std::runtime_error("write_field_file: write failed for " + path);
}

inline Field parse_field_file(const std::string& path, const Grid& g) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("parse_field_file: cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("parse_field_file: empty file " + path);
    if (line.rfind("index", 0) != 0 || line.find("value") == std::string::npos)
        throw std::runtime_error("parse_field_file: bad header '" + line + "' in " + path);

    Field u(static_cast<std::size_t>(g.num_dofs));
    long row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (row >= g.num_dofs)
            throw std::runtime_error("parse_field_file: more rows than grid dofs (" +
                                     std::to_string(g.num_dofs) + ") in " + path);
        auto last_comma = line.find_last_of(',');
        if (last_comma == std::string::npos)
            throw std::runtime_error("parse_field_file: malformed row " + std::to_string(row));
        double v = 0.0;
        try {
            v = std::stod(line.substr(last_comma + 1));
        } catch (const std::exception&) {
            throw std::runtime_error("parse_field_file: unreadable value at row " +
                                     std::to_string(row));
        }
        if (!std::isfinite(v))
            throw std::runtime_error("parse_field_file: non-finite value at row " +
                                     std::to_string(row));
        u[static_cast<std::size_t>(row)] = v;
        ++row;
    }
    if (row != g.num_dofs)
        throw std::runtime_error("parse_field_file: row count " + std::to_string(row) +
                                 " does not match grid dofs " + std::to_string(g.num_dofs));
    return u;
}

inline void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_trace_csv: cannot open " + path);
    out << "iteration,phi,cerami,norm\n";
    char buf[256];
    for (const auto& row : trace) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", row.iteration, row.phi,
                      row.cerami, row.norm);
        out << buf;
    }
}

inline json energy_to_json(const EnergyBreakdown& e) {
    return json{{"H", e.H}, {"I", e.I}, {"J", e.J}, {"Phi", e.Phi}, {"norm_W", e.norm_W}};
}

inline json eigenpair_to_json(const EigenPair& p, const std::string& field_file = "") {
    json j{{"lambda", p.lambda},
           {"residual", p.residual},
           {"normalization_defect", p.normalization_defect},
           {"converged", p.converged},
           {"iterations", p.iterations}};
    if (!field_file.empty()) j["field"] = field_file;
    if (!p.message.empty()) j["message"] = p.message;
    return j;
}

inline json spectrum_to_json(const SpectrumEstimate& sp,
                             const std::vector<std::string>& field_files = {}) {
    json values = json::array();
    for (std::size_t i = 0; i < sp.values.size(); ++i) {
        const auto& v = sp.values[i];
        json entry{{"lambda", v.lambda},
                   {"certification", certification_name(v.certification)}};
        if (std::isfinite(v.upper_bound)) entry["upper_bound"] = v.upper_bound;
        if (v.pair) {
            entry["residual"] = v.pair->residual;
            entry["normalization_defect"] = v.pair->normalization_defect;
            entry["converged"] = v.pair->converged;
            if (i < field_files.size() && !field_files[i].empty())
                entry["field"] = field_files[i];
        }
        values.push_back(std::move(entry));
    }
    return json{{"p", sp.p}, {"values", std::move(values)}};
}

inline json geometry_to_json(const LinkingGeometry& g) {
    json j{{"m", g.m},
           {"r_plus", g.r_plus},
           {"r_minus", g.r_minus},
           {"alpha", g.alpha},
           {"cone_certification", g.cone_certification},
           {"membership_projections", g.membership_projections}};
    j["lambda_m"] = std::isfinite(g.lambda_m) ? json(g.lambda_m) : json(nullptr);
    j["lambda_m1"] = std::isfinite(g.lambda_m1) ? json(g.lambda_m1) : json(nullptr);
    return j;
}

inline json result_to_json(const CriticalPointResult& r, const std::string& field_file = "",
                           const std::string& trace_file = "") {
    json j{{"value", r.value},
           {"cerami", r.cerami},
           {"iterations", r.iterations},
           {"classification", r.classification},
           {"converged", r.converged},
           {"minimax_estimate", r.minimax_estimate},
           {"boundary_max_phi", r.boundary_max_phi},
           {"boundary_violations", r.boundary_violations},
           {"geometry", geometry_to_json(r.geometry)}};
    if (!field_file.empty()) j["field"] = field_file;
    if (!trace_file.empty()) j["trace"] = trace_file;
    if (!r.message.empty()) j["message"] = r.message;
    return j;
}

inline json report_to_json(const SolutionReport& rep) {
    return json{{"cerami", rep.cerami},
                {"strong_residual_max", rep.strong_residual_max},
                {"strong_residual_l2", rep.strong_residual_l2},
                {"phi", rep.phi},
                {"norm_W", rep.norm_w},
                {"nontrivial", rep.nontrivial},
                {"cone_position", rep.cone_position},
                {"level_consistent", rep.level_consistent}};
}

inline json freport_to_json(const FConditionReport& rep) {
    auto cond = [](const ConditionCheck& c) {
        return json{{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}};
    };
    return json{{"f1_growth", cond(rep.f1_growth)},
                {"f1_sign", cond(rep.f1_sign)},
                {"f2_superlinear", cond(rep.f2_superlinear)},
                {"f3_small_o", cond(rep.f3_small_o)},
                {"f4_scaling", cond(rep.f4_scaling)},
                {"growth_constant", rep.growth_constant},
                {"all_pass", rep.all_pass()},
                {"note", rep.note}};
}

inline void write_json_file(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_json_file: cannot open " + path);
    out << j.dump(2) << '\n';
}

} // namespace plap
