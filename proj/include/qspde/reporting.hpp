#pragma once

#include "config.hpp"
#include "errors.hpp"
#include "version.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace qspde {

/// One row of metrics.csv. Failed seeds keep NaN metrics plus the failure
/// text (emitted as a comment so data rows stay fixed-width).
struct SeedMetrics {
    uint64_t seed = 0;
    double gap_supL2 = std::nan("");
    double weak_res_static = std::nan("");
    double weak_res_evo = std::nan("");
    double mild_res = std::nan("");
    int iters = 0;
    double min_state = std::nan("");
    double runtime_s = 0;
    double max_ratio = std::nan("");  // worst fixed-point contraction ratio
    bool fp_converged = false;        // fixed point met tol within the budget
    bool failed = false;
    std::string failure;
};

struct RefinementRow {
    int level = 0;          // K of this level
    double dt = 0;
    double gap = 0;         // aggregate cross-solver (or vs-oracle) gap
    double observed_order = std::nan("");  // log2(gap_coarser / gap)
};

struct CheckRow {
    std::string check;
    double value = 0;
    double threshold = 0;
    bool pass = false;
};

struct ExperimentReport {
    ExperimentConfig cfg;
    std::vector<SeedMetrics> seeds;
    std::vector<RefinementRow> refinement;
    std::vector<CheckRow> checks;
    std::vector<std::string> notes;  // human-readable summary lines
    int exit_code = 0;

    // convergence detail: per-level K and per-level-per-seed values (NaN on
    // failed seeds), kept for reporting and downstream gating
    std::vector<int> level_ks;
    std::vector<std::vector<double>> gaps_by_level;
    std::vector<std::vector<double>> mres_by_level;
    std::vector<std::vector<double>> sres_by_level;
    std::vector<std::vector<double>> eres_by_level;
};

namespace detail {

inline std::string timestamp_utc() {
    char buf[32];
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::ofstream open_out(const std::string& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    const std::string path = dir + "/" + name;
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file " + path);
    return out;
}

} // namespace detail

/// metrics.csv: '#' comment header (timestamp isolated there), one row per
/// seed sorted by seed. Data rows are deterministic given (config, seeds)
/// except for the runtime_s column.
inline void write_metrics_csv(const ExperimentReport& rep, const std::string& dir) {
    auto out = detail::open_out(dir, "metrics.csv");
    out << "# qspde " << version_string << " " << to_string(rep.cfg.kind)
        << " run at " << detail::timestamp_utc() << "\n";
    out << "# model = " << rep.cfg.model_name << ", N = " << rep.cfg.N
        << ", K = " << rep.cfg.K << ", T = " << detail::fmt_g(rep.cfg.T)
        << ", modes/species = " << rep.cfg.M << "\n";
    for (const auto& s : rep.seeds)
        if (s.failed)
            out << "# seed " << s.seed << " failed: " << s.failure << "\n";
    out << "seed,gap_supL2,weak_res_static,weak_res_evo,mild_res,iters,min_state,runtime_s\n";
    for (const auto& s : rep.seeds) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%llu,%.12g,%.12g,%.12g,%.12g,%d,%.12g,%.3f",
                      static_cast<unsigned long long>(s.seed), s.gap_supL2,
                      s.weak_res_static, s.weak_res_evo, s.mild_res, s.iters,
                      s.min_state, s.runtime_s);
        out << buf << "\n";
    }
}

inline void write_refinement_csv(const ExperimentReport& rep, const std::string& dir) {
    auto out = detail::open_out(dir, "refinement.csv");
    out << "# qspde " << version_string << " refinement table ("
        << to_string(rep.cfg.kind) << ") at " << detail::timestamp_utc() << "\n";
    out << "level,dt,gap,observed_order\n";
    for (const auto& r : rep.refinement) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%.12g", r.level, r.dt, r.gap,
                      r.observed_order);
        out << buf << "\n";
    }
}

inline void write_checks_csv(const ExperimentReport& rep, const std::string& dir) {
    auto out = detail::open_out(dir, "checks.csv");
    out << "# qspde " << version_string << " checks (" << to_string(rep.cfg.kind)
        << ") at " << detail::timestamp_utc() << "\n";
    out << "check,value,threshold,pass\n";
    for (const auto& c : rep.checks)
        out << c.check << "," << detail::fmt_g(c.value) << ","
            << detail::fmt_g(c.threshold) << "," << (c.pass ? 1 : 0) << "\n";
}

/// report.txt: self-describing human summary of the run.
inline void write_report_txt(const ExperimentReport& rep, const std::string& dir) {
    auto out = detail::open_out(dir, "report.txt");
    const auto& c = rep.cfg;
    out << "qspde " << version_string << " | experiment: " << to_string(c.kind)
        << " | " << detail::timestamp_utc() << "\n";
    out << "model " << c.model_name << ", grid N=" << c.N << " (L=" << detail::fmt_g(c.L)
        << "), mesh K=" << c.K << " (T=" << detail::fmt_g(c.T) << "), modes/species="
        << c.M << " (c_k = " << detail::fmt_g(c.c0) << "/k^" << detail::fmt_g(c.decay)
        << (c.multiplicative ? ", multiplicative" : ", additive") << ")\n";
    out << "seeds " << c.seed0 << ".." << (c.seed0 + c.n_seeds - 1) << ", init "
        << c.init_kind << ", fp_tol " << detail::fmt_g(c.solver.fp_tol) << "\n\n";
    for (const auto& line : rep.notes) out << line << "\n";
    if (!rep.checks.empty()) {
        out << "\nchecks (value | threshold | verdict):\n";
        for (const auto& ck : rep.checks)
            out << "  " << (ck.pass ? "[ok]  " : "[FAIL]") << " " << ck.check << ": "
                << detail::fmt_g(ck.value) << " | " << detail::fmt_g(ck.threshold) << "\n";
    }
    out << "\nexit code " << rep.exit_code << "\n";
}

} // namespace qspde
