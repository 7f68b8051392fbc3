// Command-line driver: run configured experiments, or launch one of the
// built-in check suites, and report through the documented exit codes
// (0 pass, 2 threshold failure, 3 bad config, 4 all seeds blew up).

#include <qspde/qspde.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <string>

namespace {

/// "a..b" (inclusive) or a single "a".
void apply_seed_range(qspde::ExperimentConfig& cfg, const std::string& spec) {
    const auto pos = spec.find("..");
    try {
        if (pos == std::string::npos) {
            cfg.seed0 = std::stoull(spec);
            cfg.n_seeds = 1;
            return;
        }
        const uint64_t a = std::stoull(spec.substr(0, pos));
        const uint64_t b = std::stoull(spec.substr(pos + 2));
        if (b < a) throw qspde::ConfigError("--seeds: range must be ascending");
        cfg.seed0 = a;
        cfg.n_seeds = static_cast<int>(b - a + 1);
    } catch (const std::invalid_argument&) {
        throw qspde::ConfigError("--seeds: expected 'a..b' or a single integer");
    } catch (const std::out_of_range&) {
        throw qspde::ConfigError("--seeds: value out of range");
    }
}

int dispatch(const qspde::ExperimentConfig& cfg) {
    const qspde::ExperimentReport rep = qspde::run_experiment(cfg);
    for (const auto& line : rep.notes) std::printf("%s\n", line.c_str());
    int failed = 0;
    for (const auto& c : rep.checks)
        if (!c.pass) {
            std::printf("[FAIL] %s: %.6g (threshold %.6g)\n", c.check.c_str(), c.value,
                        c.threshold);
            ++failed;
        }
    std::printf("artifacts in %s (exit %d)\n", cfg.out_dir.c_str(), rep.exit_code);
    return rep.exit_code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"quasilinear SPDE solver bench: weak Galerkin vs pathwise mild"};
    app.require_subcommand(1);

    std::string config_path, out_dir, seed_spec;
    int threads = 0, levels = 0;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* c = sub->add_option("--config", config_path, "config file (key = value)");
        if (config_required) c->required();
        sub->add_option("--out", out_dir, "output directory (overrides experiment.out_dir)");
        return sub;
    };

    auto add_seeded = [&](CLI::App* sub) {
        sub->add_option("--seeds", seed_spec,
                        "seed range a..b (inclusive) or a single seed");
        sub->add_option("--threads", threads, "worker threads for the seed loop");
        return sub;
    };

    add_seeded(add_common(app.add_subcommand("run", "run the configured experiment"), true));

    add_common(app.add_subcommand("check", "audit the structural assumptions"), false);
    add_common(app.add_subcommand("identities",
                                  "deterministic identity / calculus check suite"),
               false);
    auto* conv = add_seeded(add_common(
        app.add_subcommand("convergence", "dyadic time-mesh refinement study"), false));
    conv->add_option("--levels", levels, "number of dyadic levels (finest = mesh.K)");

    app.add_subcommand("version", "print the library version");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : qspde::exit_config;
    }

    try {
        if (app.got_subcommand("version")) {
            std::printf("qspde %s\n", qspde::version_string);
            return 0;
        }
        qspde::ExperimentConfig cfg;
        if (!config_path.empty()) cfg = qspde::load_config(config_path);
        if (app.got_subcommand("check")) cfg.kind = qspde::ExperimentKind::AssumptionAudit;
        if (app.got_subcommand("identities")) cfg.kind = qspde::ExperimentKind::IdentitySuite;
        if (app.got_subcommand("convergence")) {
            cfg.kind = qspde::ExperimentKind::Convergence;
            if (levels > 0) cfg.levels = levels;
        }
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (!seed_spec.empty()) apply_seed_range(cfg, seed_spec);
        if (threads > 0) cfg.threads = threads;
        return dispatch(cfg);
    } catch (const qspde::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return qspde::exit_config;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
