#pragma once

#include "errors.hpp"
#include "grid.hpp"
#include "model.hpp"
#include "solvers.hpp"
#include "time_mesh.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace qspde {

enum class ExperimentKind { Equivalence, IdentitySuite, AssumptionAudit, Convergence, OracleSanity };

/// Full experiment description; every field has a runnable default (the
/// desk-scale SKT equivalence study) and maps 1:1 onto a dotted config key.
struct ExperimentConfig {
    // model.*
    std::string model_name = "skt";
    double alpha1 = 1, alpha2 = 1, beta1 = 1, beta2 = 1;
    double gamma1 = 2, gamma2 = 2, delta1 = 0.5, delta2 = 0.5;
    double theta11 = 1, theta12 = 1, theta21 = 1, theta22 = 1;
    std::string b_kind = "two_plus_tanh";  // bounded-diffusion coefficient shape
    double b_value = 1.0;                  // used by b_kind = "const"
    double kappa = 1.0, bound_C = 3.0;     // declared ellipticity window
    double box_lo = -4.0, box_hi = 4.0;    // state box the window is checked on
    // grid.*
    double L = 1.0;
    int N = 48;
    std::string bc;  // "" = take the model's natural boundary condition
    // mesh.*
    double T = 0.25;
    int K = 1024;
    // noise.*
    int M = 8;
    double c0 = 0.05;
    double decay = 1.0;
    bool multiplicative = false;
    uint64_t seed0 = 0;
    int n_seeds = 16;
    // init.*
    std::string init_kind = "zero";  // zero | skt_bump | sine | const
    double init_value = 1.0;
    // solver.*
    SolverConfig solver;
    // experiment.*
    ExperimentKind kind = ExperimentKind::Equivalence;
    std::string out_dir = "out";
    int levels = 3;
    int threads = 1;
};

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline double conf_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
    }
}

inline int conf_int(const std::string& key, const std::string& v) {
    const double d = conf_double(key, v);
    const int i = static_cast<int>(std::llround(d));
    if (d != i) throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
    return i;
}

inline uint64_t conf_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const unsigned long long u = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return u;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects a nonnegative integer, got '" + v + "'");
    }
}

inline bool conf_bool(const std::string& key, const std::string& v) {
    std::string s = v;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

inline ExperimentKind conf_kind(const std::string& v) {
    if (v == "equivalence") return ExperimentKind::Equivalence;
    if (v == "identity_suite" || v == "identities") return ExperimentKind::IdentitySuite;
    if (v == "assumption_audit" || v == "check") return ExperimentKind::AssumptionAudit;
    if (v == "convergence") return ExperimentKind::Convergence;
    if (v == "oracle_sanity") return ExperimentKind::OracleSanity;
    throw ConfigError("config: unknown experiment kind '" + v + "'");
}

} // namespace detail

inline const char* to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::Equivalence: return "equivalence";
        case ExperimentKind::IdentitySuite: return "identity_suite";
        case ExperimentKind::AssumptionAudit: return "assumption_audit";
        case ExperimentKind::Convergence: return "convergence";
        case ExperimentKind::OracleSanity: return "oracle_sanity";
    }
    return "?";
}

/// Apply one `key = value` assignment. Unknown keys are hard errors so that
/// config typos cannot silently fall back to defaults.
inline void apply_config_entry(ExperimentConfig& c, const std::string& key,
                               const std::string& value) {
    using detail::conf_bool;
    using detail::conf_double;
    using detail::conf_int;
    using detail::conf_u64;
    if (key == "model.name") c.model_name = value;
    else if (key == "model.alpha1") c.alpha1 = conf_double(key, value);
    else if (key == "model.alpha2") c.alpha2 = conf_double(key, value);
    else if (key == "model.beta1") c.beta1 = conf_double(key, value);
    else if (key == "model.beta2") c.beta2 = conf_double(key, value);
    else if (key == "model.gamma1") c.gamma1 = conf_double(key, value);
    else if (key == "model.gamma2") c.gamma2 = conf_double(key, value);
    else if (key == "model.delta1") c.delta1 = conf_double(key, value);
    else if (key == "model.delta2") c.delta2 = conf_double(key, value);
    else if (key == "model.theta11") c.theta11 = conf_double(key, value);
    else if (key == "model.theta12") c.theta12 = conf_double(key, value);
    else if (key == "model.theta21") c.theta21 = conf_double(key, value);
    else if (key == "model.theta22") c.theta22 = conf_double(key, value);
    else if (key == "model.b") c.b_kind = value;
    else if (key == "model.b_value") c.b_value = conf_double(key, value);
    else if (key == "model.kappa") c.kappa = conf_double(key, value);
    else if (key == "model.C") c.bound_C = conf_double(key, value);
    else if (key == "model.box_lo") c.box_lo = conf_double(key, value);
    else if (key == "model.box_hi") c.box_hi = conf_double(key, value);
    else if (key == "grid.L") c.L = conf_double(key, value);
    else if (key == "grid.N") c.N = conf_int(key, value);
    else if (key == "grid.bc") c.bc = value;
    else if (key == "mesh.T") c.T = conf_double(key, value);
    else if (key == "mesh.K") c.K = conf_int(key, value);
    else if (key == "noise.M") c.M = conf_int(key, value);
    else if (key == "noise.c0") c.c0 = conf_double(key, value);
    else if (key == "noise.decay") c.decay = conf_double(key, value);
    else if (key == "noise.multiplicative") c.multiplicative = conf_bool(key, value);
    else if (key == "noise.seed0") c.seed0 = conf_u64(key, value);
    else if (key == "noise.n_seeds") c.n_seeds = conf_int(key, value);
    else if (key == "init.kind") c.init_kind = value;
    else if (key == "init.value") c.init_value = conf_double(key, value);
    else if (key == "solver.theta") c.solver.theta = conf_double(key, value);
    else if (key == "solver.fp_tol") c.solver.fp_tol = conf_double(key, value);
    else if (key == "solver.fp_max_iter") c.solver.fp_max_iter = conf_int(key, value);
    else if (key == "solver.include_drift") c.solver.include_drift = conf_bool(key, value);
    else if (key == "solver.relax") c.solver.relax = conf_double(key, value);
    else if (key == "solver.output_stride") c.solver.output_stride = conf_int(key, value);
    else if (key == "experiment.kind") c.kind = detail::conf_kind(value);
    else if (key == "experiment.out_dir") c.out_dir = value;
    else if (key == "experiment.levels") c.levels = conf_int(key, value);
    else if (key == "experiment.threads") c.threads = conf_int(key, value);
    else throw ConfigError("config: unknown key '" + key + "'");
}

/// Parse flat `key = value` text ('#' starts a comment, blank lines skipped).
inline ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) +
                              " is not a 'key = value' assignment");
        apply_config_entry(cfg, detail::trim(line.substr(0, eq)),
                           detail::trim(line.substr(eq + 1)));
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// Instantiate the model named by the config.
inline DiffusionModel make_model(const ExperimentConfig& c) {
    NoiseSpec ns;
    ns.modes_per_species = c.M;
    ns.c0 = c.c0;
    ns.decay = c.decay;
    ns.multiplicative = c.multiplicative;
    if (c.model_name == "skt")
        return skt_model({c.alpha1, c.alpha2}, {c.beta1, c.beta2}, {c.gamma1, c.gamma2},
                         {c.delta1, c.delta2},
                         {{{c.theta11, c.theta12}, {c.theta21, c.theta22}}}, ns);
    if (c.model_name == "linear_heat") return linear_heat_model(ns);
    if (c.model_name == "bounded_diffusion") {
        std::function<double(double)> b;
        double lo = c.kappa, hi = c.bound_C;
        if (c.b_kind == "two_plus_tanh") {
            b = [](double x) { return 2.0 + std::tanh(x); };
        } else if (c.b_kind == "const") {
            const double v = c.b_value;
            b = [v](double) { return v; };
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        } else {
            throw ConfigError("config: unknown bounded-diffusion coefficient '" + c.b_kind +
                              "' (expected two_plus_tanh or const)");
        }
        return bounded_diffusion_model(b, lo, hi, ns, {c.box_lo, c.box_hi});
    }
    throw ConfigError("config: unknown model '" + c.model_name +
                      "' (expected skt, bounded_diffusion or linear_heat)");
}

/// Grid consistent with the model: the boundary condition defaults to the
/// model's own and a mismatching explicit grid.bc is rejected.
inline SpatialGrid make_grid(const ExperimentConfig& c, const DiffusionModel& model) {
    Bc bc = model.bc;
    if (!c.bc.empty()) {
        if (c.bc == "dirichlet") bc = Bc::Dirichlet;
        else if (c.bc == "neumann") bc = Bc::Neumann;
        else throw ConfigError("config: grid.bc must be dirichlet or neumann");
        if (bc != model.bc)
            throw ConfigError("config: grid.bc conflicts with the model's boundary condition");
    }
    return build_grid(c.L, c.N, bc, model.n_species);
}

inline TimeMesh make_mesh(const ExperimentConfig& c) { return TimeMesh(0.0, c.T, c.K); }

/// Initial field by name. skt_bump is a smooth positive two-species profile;
/// sine is the scaled ground mode on every species; const fills init.value.
inline Vec make_initial_state(const ExperimentConfig& c, const SpatialGrid& grid) {
    Vec u0 = Vec::Zero(grid.dim());
    if (c.init_kind == "zero") return u0;
    if (c.init_kind == "const") {
        u0.setConstant(c.init_value);
        return u0;
    }
    if (c.init_kind == "sine") {
        for (int s = 0; s < grid.n_species; ++s)
            for (int j = 0; j < grid.N; ++j)
                u0[s * grid.N + j] = c.init_value * std::sin(M_PI * grid.node(j) / grid.L);
        return u0;
    }
    if (c.init_kind == "skt_bump") {
        if (grid.n_species != 2)
            throw ConfigError("config: init.kind skt_bump needs a two-species model");
        for (int j = 0; j < grid.N; ++j) {
            const double x = grid.node(j);
            u0[j] = 0.3 * (1.0 + std::cos(2.0 * M_PI * x / grid.L));
            u0[grid.N + j] = 0.2;
        }
        return u0;
    }
    throw ConfigError("config: unknown init.kind '" + c.init_kind +
                      "' (expected zero, const, sine or skt_bump)");
}

/// Cross-field checks that individual setters cannot see.
inline void validate_config(const ExperimentConfig& c) {
    if (c.N < 2) throw ConfigError("config: grid.N must be >= 2");
    if (!(c.L > 0)) throw ConfigError("config: grid.L must be positive");
    if (c.K < 1) throw ConfigError("config: mesh.K must be >= 1");
    if (!(c.T > 0)) throw ConfigError("config: mesh.T must be positive");
    if (c.M < 1) throw ConfigError("config: noise.M must be >= 1");
    if (c.n_seeds < 1) throw ConfigError("config: noise.n_seeds must be >= 1");
    if (c.levels < 1) throw ConfigError("config: experiment.levels must be >= 1");
    if (c.threads < 1) throw ConfigError("config: experiment.threads must be >= 1");
    if (c.out_dir.empty()) throw ConfigError("config: experiment.out_dir must not be empty");
    detail::check_solver_config(c.solver);
}

} // namespace qspde
