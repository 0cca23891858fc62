#pragma once

#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "plap/eigensolve.hpp"
#include "plap/minimax.hpp"
#include "plap/problem.hpp"

namespace plap {

/// Configuration file: nested key-value text, '#' comments, strict mode
/// (unknown keys are rejected with their line number).
///
///   command = solve
///   problem { p = 2  ... f { kind = pure-power  q = 4 } }
///   grid { kind = periodic-1d  nodes = 256  length = 1 }
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace cfgdetail {

struct Node {
    struct Entry {
        std::string value;
        int line = 0;
        std::unique_ptr<Node> child;
        bool used = false;
    };
    std::map<std::string, Entry> entries;
    int line = 0;
};

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline Node parse_tree(std::istream& in) {
    Node root;
    std::vector<Node*> stack{&root};
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = raw;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line == "}") {
            if (stack.size() == 1)
                throw ConfigError("config line " + std::to_string(lineno) + ": unmatched '}'");
            stack.pop_back();
            continue;
        }
        if (line.back() == '{') {
            std::string name = trim(line.substr(0, line.size() - 1));
            if (name.empty())
                throw ConfigError("config line " + std::to_string(lineno) + ": section needs a name");
            auto& e = stack.back()->entries[name];
            if (e.child || !e.value.empty())
                throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" +
                                  name + "'");
            e.line = lineno;
            e.child = std::make_unique<Node>();
            e.child->line = lineno;
            stack.push_back(e.child.get());
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected 'key = value', got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
        auto& e = stack.back()->entries[key];
        if (e.child || !e.value.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key +
                              "'");
        e.value = value;
        e.line = lineno;
    }
    if (stack.size() != 1) throw ConfigError("config: unterminated section (missing '}')");
    return root;
}

class Reader {
public:
    Reader(Node& node, std::string path) : node_(&node), path_(std::move(path)) {}

    std::optional<std::string> get(const std::string& key) {
        auto it = node_->entries.find(key);
        if (it == node_->entries.end()) return std::nullopt;
        if (it->second.child)
            throw ConfigError(path_ + "." + key + " (line " + std::to_string(it->second.line) +
                              "): expected a value, found a section");
        it->second.used = true;
        return it->second.value;
    }

    std::string require(const std::string& key) {
        auto v = get(key);
        if (!v) throw ConfigError(path_ + ": missing required key '" + key + "'");
        return *v;
    }

    double number(const std::string& key, double fallback) {
        auto v = get(key);
        if (!v) return fallback;
        return to_number(key, *v);
    }

    double require_number(const std::string& key) { return to_number(key, require(key)); }

    long integer(const std::string& key, long fallback) {
        auto v = get(key);
        if (!v) return fallback;
        double d = to_number(key, *v);
        long l = static_cast<long>(d);
        if (static_cast<double>(l) != d)
            throw ConfigError(path_ + "." + key + ": expected an integer, got '" + *v + "'");
        return l;
    }

    std::vector<double> number_list(const std::string& key, std::vector<double> fallback) {
        auto v = get(key);
        if (!v) return fallback;
        std::vector<double> out;
        std::stringstream ss(*v);
        std::string tok;
        while (std::getline(ss, tok, ',')) out.push_back(to_number(key, trim(tok)));
        if (out.empty()) throw ConfigError(path_ + "." + key + ": empty list");
        return out;
    }

    std::optional<Reader> section(const std::string& key) {
        auto it = node_->entries.find(key);
        if (it == node_->entries.end()) return std::nullopt;
        if (!it->second.child)
            throw ConfigError(path_ + "." + key + " (line " + std::to_string(it->second.line) +
                              "): expected a section, found a value");
        it->second.used = true;
        return Reader(*it->second.child, path_ + "." + key);
    }

    void reject_unknown() const {
        for (const auto& [key, e] : node_->entries) {
            if (!e.used)
                throw ConfigError(path_ + ": unknown key '" + key + "' at line " +
                                  std::to_string(e.line));
            if (e.child) Reader(*e.child, path_ + "." + key).reject_unknown();
        }
    }

private:
    Node* node_;
    std::string path_;

    double to_number(const std::string& key, const std::string& v) {
        try {
            std::size_t used = 0;
            double d = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument("trailing");
            return d;
        } catch (const std::exception&) {
            throw ConfigError(path_ + "." + key + ": expected a number, got '" + v + "'");
        }
    }
};

} // namespace cfgdetail

enum class Command { Eval, Eigen, Solve, Verify, Study };

struct StudyConfig {
    Command command = Command::Eigen;  // eigen or solve per point
    std::string parameter;             // nodes | length | lambda | path-nodes | samples
    std::vector<double> values;
};

/// The full, validated run configuration.
struct RunConfig {
    Command command = Command::Verify;
    std::uint64_t seed = 12345;
    int threads = 1;
    std::string output_dir = "out";
    std::string field_path;  // eval / verify-solution input

    // raw problem descriptor (kept for study sweeps that rebuild the spec)
    double p = 2.0;
    double lambda = 0.0;
    std::string b_text = "1";
    std::string v_text = "1";
    NonlinearityKind f_kind = NonlinearityKind::PurePower;
    double f_q = 4.0;
    double f_coeff = 1.0;
    double f_theta = 1.0;
    std::string f_expr;

    GridSpec grid;

    double tol_eigen = -1.0;  // <0: p-dependent default
    double tol_solve = -1.0;

    int eigen_count = 4;
    int eigen_multistart = 8;

    int path_nodes = 41;
    int samples = 200;
    int max_iterations = 5000;

    std::optional<StudyConfig> study;

    double eigen_tolerance() const { return tol_eigen > 0.0 ? tol_eigen : default_eigen_tol(p); }
    double solve_tolerance() const {
        return tol_solve > 0.0 ? tol_solve : solve_tolerance_default(p);
    }

    NonlinearitySpec nonlinearity() const {
        switch (f_kind) {
            case NonlinearityKind::PurePower: return NonlinearitySpec::pure_power(f_q);
            case NonlinearityKind::ScaledPower: return NonlinearitySpec::scaled_power(f_q, f_coeff);
            case NonlinearityKind::CustomSampled: {
                auto f = NonlinearitySpec::custom(Expr::parse(f_expr, grid.dims), f_q, f_theta);
                return f;
            }
        }
        throw ConfigError("invalid nonlinearity kind");
    }

    /// Builds and validates the problem instance (throws on contract breaks).
    ProblemSpec problem() const {
        return ProblemSpec::make(grid, p, lambda, CoefficientSpec::expression(b_text),
                                 CoefficientSpec::expression(v_text), nonlinearity());
    }
};

inline Command parse_command(const std::string& s) {
    if (s == "eval") return Command::Eval;
    if (s == "eigen") return Command::Eigen;
    if (s == "solve") return Command::Solve;
    if (s == "verify") return Command::Verify;
    if (s == "study") return Command::Study;
    throw ConfigError("unknown command '" + s + "' (expected eval|eigen|solve|verify|study)");
}

inline RunConfig parse_run_config(std::istream& in) {
    cfgdetail::Node tree = cfgdetail::parse_tree(in);
    cfgdetail::Reader root(tree, "config");
    RunConfig cfg;

    cfg.command = parse_command(root.require("command"));
    cfg.seed = static_cast<std::uint64_t>(root.integer("seed", 12345));
    cfg.threads = static_cast<int>(root.integer("threads", 1));
    if (auto v = root.get("output")) cfg.output_dir = *v;
    if (auto v = root.get("field")) cfg.field_path = *v;

    if (auto prob = root.section("problem")) {
        cfg.p = prob->number("p", 2.0);
        cfg.lambda = prob->number("lambda", 0.0);
        if (auto v = prob->get("b")) cfg.b_text = *v;
        if (auto v = prob->get("V")) cfg.v_text = *v;
        if (auto fsec = prob->section("f")) {
            std::string kind = "pure-power";
            if (auto v = fsec->get("kind")) kind = *v;
            if (kind == "pure-power") cfg.f_kind = NonlinearityKind::PurePower;
            else if (kind == "scaled-power") cfg.f_kind = NonlinearityKind::ScaledPower;
            else if (kind == "custom-sampled") cfg.f_kind = NonlinearityKind::CustomSampled;
            else throw ConfigError("config.problem.f.kind: unknown kind '" + kind + "'");
            cfg.f_q = fsec->number("q", 4.0);
            cfg.f_coeff = fsec->number("coeff", 1.0);
            cfg.f_theta = fsec->number("theta", 1.0);
            if (auto v = fsec->get("expr")) cfg.f_expr = *v;
            if (cfg.f_kind == NonlinearityKind::CustomSampled && cfg.f_expr.empty())
                throw ConfigError("config.problem.f: custom-sampled kind requires 'expr'");
        }
    }

    // grid defaults: n = 256 on the circle, n = 64 per axis with L = 8 for boxes
    if (auto gsec = root.section("grid")) {
        std::string kind = "periodic-1d";
        if (auto v = gsec->get("kind")) kind = *v;
        if (kind == "periodic-1d") {
            cfg.grid.kind = GridKind::Periodic1d;
            cfg.grid.dims = 1;
        } else if (kind == "box-nd") {
            cfg.grid.kind = GridKind::BoxNd;
            cfg.grid.dims = static_cast<int>(gsec->integer("dims", 2));
        } else {
            throw ConfigError("config.grid.kind: unknown kind '" + kind +
                              "' (expected periodic-1d|box-nd)");
        }
        double default_n = cfg.grid.kind == GridKind::Periodic1d ? 256 : 64;
        double default_len = cfg.grid.kind == GridKind::Periodic1d ? 1.0 : 8.0;
        auto nodes = gsec->number_list("nodes", {default_n});
        auto lengths = gsec->number_list("length", {default_len});
        cfg.grid.nodes_per_axis.clear();
        for (double n : nodes) {
            long l = static_cast<long>(n);
            if (static_cast<double>(l) != n)
                throw ConfigError("config.grid.nodes: expected integers");
            cfg.grid.nodes_per_axis.push_back(static_cast<int>(l));
        }
        cfg.grid.extents = lengths;
    } else {
        cfg.grid = GridSpec::periodic_1d(256, 1.0);
    }

    if (auto tsec = root.section("tolerances")) {
        cfg.tol_eigen = tsec->number("eigen", -1.0);
        cfg.tol_solve = tsec->number("solve", -1.0);
    }
    if (auto esec = root.section("eigen")) {
        cfg.eigen_count = static_cast<int>(esec->integer("count", 4));
        cfg.eigen_multistart = static_cast<int>(esec->integer("multistart", 8));
    }
    if (auto ssec = root.section("solve")) {
        cfg.path_nodes = static_cast<int>(ssec->integer("path-nodes", 41));
        cfg.samples = static_cast<int>(ssec->integer("samples", 200));
        cfg.max_iterations = static_cast<int>(ssec->integer("max-iterations", 5000));
    }
    if (auto stsec = root.section("study")) {
        StudyConfig st;
        std::string cmd = "eigen";
        if (auto v = stsec->get("command")) cmd = *v;
        st.command = parse_command(cmd);
        if (st.command != Command::Eigen && st.command != Command::Solve)
            throw ConfigError("config.study.command: only eigen|solve supported");
        st.parameter = stsec->require("parameter");
        if (st.parameter != "nodes" && st.parameter != "length" && st.parameter != "lambda" &&
            st.parameter != "path-nodes" && st.parameter != "samples")
            throw ConfigError("config.study.parameter: expected nodes|length|lambda|path-nodes|samples");
        st.values = stsec->number_list("values", {});
        cfg.study = std::move(st);
    }
    if (cfg.command == Command::Study && !cfg.study)
        throw ConfigError("config: command = study requires a study section");
    if (cfg.command == Command::Eval && cfg.field_path.empty())
        throw ConfigError("config: command = eval requires 'field = <csv path>'");

    root.reject_unknown();

    // early validation of the problem contract with config-level diagnostics
    try {
        (void)cfg.problem();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config.problem: ") + e.what());
    }
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_run_config(in);
}

} // namespace plap
