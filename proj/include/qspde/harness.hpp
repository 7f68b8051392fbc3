#pragma once

#include "assumptions.hpp"
#include "config.hpp"
#include "evolution.hpp"
#include "fractional.hpp"
#include "noise.hpp"
#include "reporting.hpp"
#include "solvers.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <numbers>
#include <thread>
#include <vector>

namespace qspde {

inline constexpr int exit_ok = 0;
inline constexpr int exit_threshold = 2;  // a gated check failed
inline constexpr int exit_config = 3;     // bad config / CLI input
inline constexpr int exit_blowup = 4;     // every seed failed to solve

namespace detail {

/// Static work queue over seed indices. Results land in pre-sized slots, so
/// workers never contend; the first exception (if any) is rethrown.
template <class Fn>
void parallel_for_seeds(int n, int threads, Fn&& fn) {
    threads = std::clamp(threads, 1, n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex mtx;
    auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mtx);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

inline double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void push_max(std::vector<CheckRow>& out, std::string name, double v, double thr) {
    out.push_back({std::move(name), v, thr, v <= thr});
}

inline void push_min(std::vector<CheckRow>& out, std::string name, double v, double thr) {
    out.push_back({std::move(name), v, thr, v >= thr});
}

inline void push_band(std::vector<CheckRow>& out, const std::string& name, double v,
                      double lo, double hi) {
    push_min(out, name + "_lower", v, lo);
    push_max(out, name + "_upper", v, hi);
}

inline double mean_finite(const std::vector<double>& v) {
    double s = 0;
    int n = 0;
    for (double x : v)
        if (std::isfinite(x)) s += x, ++n;
    return n ? s / n : std::nan("");
}

inline double max_finite(const std::vector<double>& v) {
    double s = -std::numeric_limits<double>::infinity();
    for (double x : v)
        if (std::isfinite(x)) s = std::max(s, x);
    return std::isfinite(s) ? s : std::nan("");
}

inline double median_finite(std::vector<double> v) {
    std::erase_if(v, [](double x) { return !std::isfinite(x); });
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline bool all_pass(const std::vector<CheckRow>& rows) {
    return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.pass; });
}

inline std::string fmt_note(const char* fmt, double a, double b = 0, double c = 0) {
    char buf[200];
    std::snprintf(buf, sizeof buf, fmt, a, b, c);
    return buf;
}

} // namespace detail

// ---------------------------------------------------------------------------
// equivalence study: weak Galerkin vs quasilinear pathwise mild, shared noise
// ---------------------------------------------------------------------------

inline ExperimentReport run_equivalence(const ExperimentConfig& cfg) {
    const DiffusionModel model = make_model(cfg);
    const SpatialGrid grid = make_grid(cfg, model);
    const TimeMesh mesh = make_mesh(cfg);
    const Vec u0 = make_initial_state(cfg, grid);

    ExperimentReport rep;
    rep.cfg = cfg;
    rep.seeds.assign(cfg.n_seeds, {});

    detail::parallel_for_seeds(cfg.n_seeds, cfg.threads, [&](int i) {
        SeedMetrics& sm = rep.seeds[i];
        sm.seed = cfg.seed0 + i;
        const auto tic = std::chrono::steady_clock::now();
        try {
            const NoisePath path = sample_path(sm.seed, mesh, model.n_modes());
            const Trajectory wk = solve_weak_galerkin(model, u0, path, grid, cfg.solver);
            FixedPointStats st;
            const Trajectory md =
                solve_quasilinear_fixed_point(model, u0, path, grid, cfg.solver, &st);
            sm.iters = st.iterations;
            sm.fp_converged = st.converged;
            if (!st.ratios.empty())
                sm.max_ratio = *std::max_element(st.ratios.begin(), st.ratios.end());
            sm.gap_supL2 = sup_distance(wk, md, grid) / (1.0 + sup_norm(wk, grid));
            sm.weak_res_static =
                weak_residual(md, model, path, grid, mesh.K, ResidualMode::Static)
                    .weak_residual_static;
            sm.weak_res_evo =
                weak_residual(md, model, path, grid, mesh.K, ResidualMode::EvolutionTest)
                    .weak_residual_evolution;
            sm.mild_res = mild_residual(wk, model, path, grid, mesh.K);
            sm.min_state = std::min(wk.min_state(), md.min_state());
        } catch (const SolverError& e) {
            sm.failed = true;
            sm.failure = e.what();
        }
        sm.runtime_s = detail::elapsed_s(tic);
    });

    std::vector<double> gaps, iters;
    int n_ok = 0;
    for (const auto& s : rep.seeds)
        if (!s.failed) {
            ++n_ok;
            gaps.push_back(s.gap_supL2);
            iters.push_back(s.iters);
        }

    rep.refinement.push_back(
        {cfg.K, mesh.dt(), detail::mean_finite(gaps), std::nan("")});
    rep.notes.push_back(detail::fmt_note("seeds solved: %.0f of %.0f", n_ok, cfg.n_seeds));
    if (n_ok) {
        rep.notes.push_back(detail::fmt_note(
            "normalized cross-solver sup-L2 gap: mean %.3e, max %.3e",
            detail::mean_finite(gaps), detail::max_finite(gaps)));
        rep.notes.push_back(detail::fmt_note(
            "fixed-point iterations: mean %.1f, max %.0f", detail::mean_finite(iters),
            detail::max_finite(iters)));
    }
    rep.exit_code = n_ok == 0 ? exit_blowup : exit_ok;
    return rep;
}

// ---------------------------------------------------------------------------
// convergence study: the equivalence gap and cross-residuals across a dyadic
// time-mesh hierarchy driven by one refinement-consistent noise path per seed
// ---------------------------------------------------------------------------

inline ExperimentReport run_convergence(const ExperimentConfig& cfg) {
    const DiffusionModel model = make_model(cfg);
    const SpatialGrid grid = make_grid(cfg, model);
    const Vec u0 = make_initial_state(cfg, grid);

    const int n_lvl = cfg.levels;
    if (n_lvl < 2 || n_lvl > 8)
        throw ConfigError("convergence: experiment.levels must be in [2, 8]");
    const int div = 1 << (n_lvl - 1);
    if (cfg.K % div != 0 || cfg.K / div < 2)
        throw ConfigError("convergence: mesh.K must be divisible by 2^(levels-1) "
                          "with at least 2 steps on the coarsest level");

    ExperimentReport rep;
    rep.cfg = cfg;
    rep.seeds.assign(cfg.n_seeds, {});
    rep.level_ks.resize(n_lvl);
    for (int l = 0; l < n_lvl; ++l) rep.level_ks[l] = cfg.K >> (n_lvl - 1 - l);
    auto blank = std::vector<std::vector<double>>(
        n_lvl, std::vector<double>(cfg.n_seeds, std::nan("")));
    rep.gaps_by_level = blank;
    rep.mres_by_level = blank;
    rep.sres_by_level = blank;
    rep.eres_by_level = blank;

    detail::parallel_for_seeds(cfg.n_seeds, cfg.threads, [&](int i) {
        SeedMetrics& sm = rep.seeds[i];
        sm.seed = cfg.seed0 + i;
        const auto tic = std::chrono::steady_clock::now();
        try {
            std::vector<NoisePath> paths(n_lvl);
            paths[n_lvl - 1] =
                sample_path(sm.seed, TimeMesh(0.0, cfg.T, cfg.K), model.n_modes());
            for (int l = n_lvl - 2; l >= 0; --l) paths[l] = coarsen_path(paths[l + 1], 2);

            bool conv = true;
            for (int l = 0; l < n_lvl; ++l) {
                const NoisePath& path = paths[l];
                const int kl = rep.level_ks[l];
                const Trajectory wk = solve_weak_galerkin(model, u0, path, grid, cfg.solver);
                FixedPointStats st;
                const Trajectory md =
                    solve_quasilinear_fixed_point(model, u0, path, grid, cfg.solver, &st);
                const bool ratios_ok = std::all_of(st.ratios.begin(), st.ratios.end(),
                                                   [](double r) { return r < 1.0; });
                conv = conv && st.converged && st.iterations <= 10 && ratios_ok;
                rep.gaps_by_level[l][i] =
                    sup_distance(wk, md, grid) / (1.0 + sup_norm(wk, grid));
                rep.mres_by_level[l][i] = mild_residual(wk, model, path, grid, kl);
                rep.sres_by_level[l][i] =
                    weak_residual(md, model, path, grid, kl, ResidualMode::Static)
                        .weak_residual_static;
                rep.eres_by_level[l][i] =
                    weak_residual(md, model, path, grid, kl, ResidualMode::EvolutionTest)
                        .weak_residual_evolution;
                if (l == n_lvl - 1) {
                    sm.iters = st.iterations;
                    if (!st.ratios.empty())
                        sm.max_ratio = *std::max_element(st.ratios.begin(), st.ratios.end());
                    sm.gap_supL2 = rep.gaps_by_level[l][i];
                    sm.weak_res_static = rep.sres_by_level[l][i];
                    sm.weak_res_evo = rep.eres_by_level[l][i];
                    sm.mild_res = rep.mres_by_level[l][i];
                    sm.min_state = std::min(wk.min_state(), md.min_state());
                }
            }
            sm.fp_converged = conv;
        } catch (const SolverError& e) {
            sm.failed = true;
            sm.failure = e.what();
            sm.fp_converged = false;
        }
        sm.runtime_s = detail::elapsed_s(tic);
    });

    int n_ok = 0, n_conv = 0, n_mono = 0;
    for (int i = 0; i < cfg.n_seeds; ++i) {
        if (!rep.seeds[i].failed) ++n_ok;
        if (!rep.seeds[i].fp_converged) continue;
        ++n_conv;
        bool mono = true;
        for (int l = 0; l + 1 < n_lvl; ++l)
            mono = mono && rep.gaps_by_level[l + 1][i] < rep.gaps_by_level[l][i];
        if (mono) ++n_mono;
    }
    if (n_ok == 0) {
        rep.exit_code = exit_blowup;
        rep.notes.push_back("all seeds failed; see metrics comments");
        return rep;
    }

    auto& ck = rep.checks;
    detail::push_min(ck, "converged_seed_fraction", double(n_conv) / cfg.n_seeds, 0.9);
    detail::push_min(ck, "monotone_gap_fraction_of_converged",
                     n_conv ? double(n_mono) / n_conv : 0.0, 0.9);

    // per-level means over converged seeds only
    auto level_means = [&](const std::vector<std::vector<double>>& by_level) {
        std::vector<double> m(n_lvl, std::nan(""));
        for (int l = 0; l < n_lvl; ++l) {
            double s = 0;
            int n = 0;
            for (int i = 0; i < cfg.n_seeds; ++i)
                if (rep.seeds[i].fp_converged && std::isfinite(by_level[l][i]))
                    s += by_level[l][i], ++n;
            if (n) m[l] = s / n;
        }
        return m;
    };
    const auto gap_means = level_means(rep.gaps_by_level);
    const struct {
        const char* name;
        const std::vector<std::vector<double>>* data;
    } families[] = {{"mild_residual_of_weak", &rep.mres_by_level},
                    {"static_weak_residual", &rep.sres_by_level},
                    {"evolution_weak_residual", &rep.eres_by_level}};
    for (const auto& fam : families) {
        const auto m = level_means(*fam.data);
        double worst_step = 0;
        for (int l = 0; l + 1 < n_lvl; ++l) worst_step = std::max(worst_step, m[l + 1] / m[l]);
        detail::push_max(ck, std::string(fam.name) + "_mean_step_growth_max", worst_step, 1.10);
        detail::push_max(ck, std::string(fam.name) + "_mean_net_ratio", m.back() / m.front(),
                         1.0);
    }

    for (int l = 0; l < n_lvl; ++l) {
        RefinementRow row;
        row.level = rep.level_ks[l];
        row.dt = cfg.T / rep.level_ks[l];
        row.gap = gap_means[l];
        if (l > 0) row.observed_order = std::log2(gap_means[l - 1] / gap_means[l]);
        rep.refinement.push_back(row);
    }

    rep.notes.push_back(detail::fmt_note("seeds solved: %.0f of %.0f; converged: %.0f",
                                         n_ok, cfg.n_seeds, n_conv));
    rep.notes.push_back(detail::fmt_note(
        "finest-level gap: mean %.3e; strictly decreasing for %.0f of the converged",
        gap_means[n_lvl - 1], n_mono));
    rep.exit_code = detail::all_pass(ck) ? exit_ok : exit_threshold;
    return rep;
}

// ---------------------------------------------------------------------------
// oracle sanity: on a state-independent model the mild recursion must track
// the exact discrete convolution; gap halves with the time step
// ---------------------------------------------------------------------------

inline ExperimentReport run_oracle_sanity(const ExperimentConfig& cfg) {
    const DiffusionModel model = make_model(cfg);
    {
        const Vec p0 = Vec::Zero(model.n_species);
        const Vec p1 = Vec::Constant(model.n_species, 1.0);
        if (model.noise.multiplicative ||
            (model.B(p0) - model.B(p1)).cwiseAbs().maxCoeff() > 1e-12)
            throw ConfigError("oracle sanity: needs additive noise and a "
                              "state-independent diffusion coefficient");
    }
    if (cfg.K % 2 != 0 || cfg.K < 4)
        throw ConfigError("oracle sanity: mesh.K must be even and >= 4");
    const SpatialGrid grid = make_grid(cfg, model);
    const Vec u0 = make_initial_state(cfg, grid);

    ExperimentReport rep;
    rep.cfg = cfg;
    rep.seeds.assign(cfg.n_seeds, {});
    rep.level_ks = {cfg.K / 2, cfg.K, 2 * cfg.K};
    const int n_lvl = 3;
    rep.gaps_by_level.assign(n_lvl, std::vector<double>(cfg.n_seeds, std::nan("")));
    std::vector<double> wgaps(cfg.n_seeds, std::nan("")), cons(cfg.n_seeds, std::nan(""));

    detail::parallel_for_seeds(cfg.n_seeds, cfg.threads, [&](int i) {
        SeedMetrics& sm = rep.seeds[i];
        sm.seed = cfg.seed0 + i;
        const auto tic = std::chrono::steady_clock::now();
        try {
            std::vector<NoisePath> paths(n_lvl);
            paths[2] = sample_path(sm.seed, TimeMesh(0.0, cfg.T, 2 * cfg.K), model.n_modes());
            paths[1] = coarsen_path(paths[2], 2);
            paths[0] = coarsen_path(paths[2], 4);
            for (int l = 0; l < n_lvl; ++l) {
                const NoisePath& path = paths[l];
                const int kl = rep.level_ks[l];
                const std::vector<Vec> frozen(kl + 1, u0);
                const MildSweep sw = linear_mild_sweep(frozen, model, u0, path, grid);
                const Trajectory z = exact_convolution_oracle(model, u0, path, grid);
                Trajectory md;
                md.mesh = path.mesh;
                md.states = sw.states;
                md.tag = SolverTag::LinearMild;
                md.seed = sm.seed;
                const double denom = sup_norm(z, grid);
                rep.gaps_by_level[l][i] = sup_distance(md, z, grid) / denom;
                if (l == 1) {
                    const Trajectory wk =
                        solve_weak_galerkin(model, u0, path, grid, cfg.solver);
                    wgaps[i] = sup_distance(wk, z, grid) / denom;
                    cons[i] = sw.consistency(grid);
                    sm.gap_supL2 = rep.gaps_by_level[l][i];
                    sm.weak_res_static =
                        weak_residual(md, model, path, grid, kl, ResidualMode::Static)
                            .weak_residual_static;
                    sm.weak_res_evo =
                        weak_residual(md, model, path, grid, kl, ResidualMode::EvolutionTest)
                            .weak_residual_evolution;
                    sm.mild_res = mild_residual(wk, model, path, grid, kl);
                    sm.min_state = std::min(md.min_state(), wk.min_state());
                }
            }
        } catch (const SolverError& e) {
            sm.failed = true;
            sm.failure = e.what();
        }
        sm.runtime_s = detail::elapsed_s(tic);
    });

    int n_ok = 0;
    for (const auto& s : rep.seeds)
        if (!s.failed) ++n_ok;
    if (n_ok == 0) {
        rep.exit_code = exit_blowup;
        rep.notes.push_back("all seeds failed; see metrics comments");
        return rep;
    }

    std::vector<double> f_coarse(cfg.n_seeds, std::nan("")), f_fine(cfg.n_seeds, std::nan(""));
    for (int i = 0; i < cfg.n_seeds; ++i) {
        f_coarse[i] = rep.gaps_by_level[0][i] / rep.gaps_by_level[1][i];
        f_fine[i] = rep.gaps_by_level[1][i] / rep.gaps_by_level[2][i];
    }
    auto& ck = rep.checks;
    detail::push_max(ck, "mild_oracle_gap_max", detail::max_finite(rep.gaps_by_level[1]),
                     0.02);
    detail::push_max(ck, "weak_oracle_gap_max", detail::max_finite(wgaps), 0.05);
    detail::push_band(ck, "halving_factor_median_coarse", detail::median_finite(f_coarse),
                      1.6, 2.4);
    detail::push_band(ck, "halving_factor_median_fine", detail::median_finite(f_fine), 1.6,
                      2.4);
    detail::push_max(ck, "mild_identity_consistency_max", detail::max_finite(cons), 1e-3);

    for (int l = 0; l < n_lvl; ++l) {
        RefinementRow row;
        row.level = rep.level_ks[l];
        row.dt = cfg.T / rep.level_ks[l];
        row.gap = detail::mean_finite(rep.gaps_by_level[l]);
        if (l > 0)
            row.observed_order = std::log2(detail::mean_finite(rep.gaps_by_level[l - 1]) /
                                           row.gap);
        rep.refinement.push_back(row);
    }
    rep.notes.push_back(detail::fmt_note("seeds solved: %.0f of %.0f", n_ok, cfg.n_seeds));
    rep.notes.push_back(detail::fmt_note(
        "mild-vs-oracle gap at the base mesh: mean %.3e, max %.3e",
        detail::mean_finite(rep.gaps_by_level[1]), detail::max_finite(rep.gaps_by_level[1])));
    rep.exit_code = detail::all_pass(ck) ? exit_ok : exit_threshold;
    return rep;
}

// ---------------------------------------------------------------------------
// identity suite: deterministic batteries with pinned tolerances
// ---------------------------------------------------------------------------

namespace detail {

/// Frozen two-species cross-diffusion battery used by the deterministic
/// checks: small Neumann grid, unit parameters, two smooth positive states.
struct FrozenBattery {
    DiffusionModel model;
    SpatialGrid grid;
    std::vector<Vec> states;
};

inline FrozenBattery frozen_cross_diffusion_battery(int n_per_species = 8) {
    FrozenBattery b{skt_model({1, 1}, {1, 1}, {1, 1}, {0.5, 0.5}, {{{1, 1}, {1, 1}}}, {}),
                    build_grid(1.0, n_per_species, Bc::Neumann, 2),
                    {}};
    const int n = n_per_species;
    Vec s1(2 * n), s2(2 * n);
    for (int j = 0; j < n; ++j) {
        const double x = b.grid.node(j);
        s1[j] = 1.0 + 0.3 * std::sin(2.0 * std::numbers::pi * x);
        s1[n + j] = 0.8 + 0.2 * std::cos(std::numbers::pi * x);
        s2[j] = 0.6 + 0.1 * x;
        s2[n + j] = 1.2 - 0.4 * x * x;
    }
    b.states = {s1, s2};
    return b;
}

inline Vec deterministic_unit_vector(int m, GaussianStream& gs) {
    Vec v(m);
    for (int i = 0; i < m; ++i) v[i] = gs.next();
    return v / v.norm();
}

} // namespace detail

/// Fundamental-identity residuals: the scalar battery pins the absolute
/// size, the frozen operator battery pins the second-order decay.
inline void identity_checks(std::vector<CheckRow>& ck) {
    {
        Mat a(1, 1);
        a << -1.0;
        const Vec one = Vec::Ones(1);
        for (int k : {128, 256, 512}) {
            const auto fam = build_family(a, TimeMesh(0.0, 1.0, k));
            detail::push_max(ck, "identity_residual_scalar_K" + std::to_string(k),
                             fundamental_identity_residual(fam, one, one, k), 1e-4);
            detail::push_max(ck, "propagator_scalar_terminal_error_K" + std::to_string(k),
                             std::abs(apply_propagator(fam, k, 0, one)[0] - std::exp(-1.0)),
                             1e-12);
        }
    }
    const auto bat = detail::frozen_cross_diffusion_battery();
    detail::GaussianStream gs(12345);
    const Vec x = detail::deterministic_unit_vector(bat.grid.dim(), gs);
    const Vec xs = detail::deterministic_unit_vector(bat.grid.dim(), gs);
    for (size_t op = 0; op < bat.states.size(); ++op) {
        const Mat a = assemble_operator(bat.model, bat.states[op], bat.grid).A;
        std::vector<double> rs;
        for (int k : {512, 1024, 2048, 4096}) {
            const auto fam = build_family(a, TimeMesh(0.0, 0.25, k));
            rs.push_back(fundamental_identity_residual(fam, x, xs, k));
        }
        const std::string tag = "identity_order2_factor_op" + std::to_string(op);
        for (size_t j = 0; j + 1 < rs.size(); ++j)
            detail::push_band(ck, tag + "_" + std::to_string(j), rs[j] / rs[j + 1], 3.3, 4.7);
        detail::push_max(ck, "identity_residual_op" + std::to_string(op) + "_K4096",
                         rs.back(), 1e-3);
    }
}

/// Evolution-family structure: exact identity, cocycle accumulation,
/// first-order forward-difference generator defect, sup (t-s)||A U||
/// stability, and the parabolic-smoothing constant against its closed form.
inline void t_property_checks(std::vector<CheckRow>& ck) {
    const auto bat = detail::frozen_cross_diffusion_battery();
    const Mat a0 = assemble_operator(bat.model, bat.states[0], bat.grid).A;
    {
        const auto fam = build_family(a0, TimeMesh(0.0, 0.25, 512));
        const auto rep = check_T_properties(fam, 100);
        detail::push_max(ck, "t1_identity_deviation", rep.t1_dev, 1e-14);
        detail::push_max(ck, "t2_cocycle_rel_defect", rep.t2_rel_dev, 1e-12);
    }
    {
        // diagonal coefficient path a_l(t) = -(1 + l/4 + t): order-1 defect
        std::vector<double> rs;
        for (int k : {128, 256, 512}) {
            const TimeMesh mesh(0.0, 1.0, k);
            std::vector<Mat> path(k + 1);
            for (int i = 0; i <= k; ++i) {
                Vec d(4);
                for (int l = 0; l < 4; ++l) d[l] = -(1.0 + l / 4.0 + mesh.node(i));
                path[i] = d.asDiagonal();
            }
            rs.push_back(check_T_properties(build_family(path, mesh), 0).t5_residual);
        }
        for (size_t j = 0; j + 1 < rs.size(); ++j)
            detail::push_band(ck, "t5_halving_factor_diag_" + std::to_string(j),
                              rs[j] / rs[j + 1], 1.7, 2.3);
        detail::push_max(ck, "t5_residual_diag_K512", rs.back(), 2e-2);
    }
    {
        std::vector<double> rs;
        for (int k : {512, 1024, 2048}) {
            const auto fam = build_family(a0, TimeMesh(0.0, 0.25, k));
            rs.push_back(check_T_properties(fam, 0, std::max(1, k / 16)).t5_residual);
        }
        for (size_t j = 0; j + 1 < rs.size(); ++j)
            detail::push_band(ck, "t5_halving_factor_frozen_op_" + std::to_string(j),
                              rs[j] / rs[j + 1], 1.7, 2.3);
    }
    {
        // scalar a(t) = -1 - t on [0,1]: sup (t-s)|a U| finite and mesh-stable
        std::vector<double> vals;
        for (int k : {256, 512}) {
            const TimeMesh mesh(0.0, 1.0, k);
            std::vector<Mat> path(k + 1);
            for (int i = 0; i <= k; ++i) {
                Mat a(1, 1);
                a << -(1.0 + mesh.node(i));
                path[i] = a;
            }
            vals.push_back(check_T_properties(build_family(path, mesh), 0, 1).sup_tAU);
        }
        detail::push_max(ck, "sup_tAU_scalar_K512", vals[1], 1.2);
        detail::push_max(ck, "sup_tAU_refinement_drift", std::abs(vals[0] / vals[1] - 1.0),
                         0.10);
    }
    {
        // pure Dirichlet Laplacian: sup tau^g ||U S^g|| == (2e)^{-1/2} for g = 1/2
        const DiffusionModel heat = linear_heat_model();
        const SpatialGrid hg = build_grid(1.0, 16, Bc::Dirichlet, 1);
        const Mat a = assemble_operator(heat, Vec::Zero(16), hg).A;
        const int k = 256;
        const auto fam = build_family(a, TimeMesh(0.0, 1.0, k));
        const auto sm = smoothing_diagnostics(fam, 0.5, 0.5, 0.5, k);
        const double closed = 1.0 / std::sqrt(2.0 * std::numbers::e);
        detail::push_band(ck, "smoothing_gamma_sup", sm.gamma_sup, closed - 1e-3,
                          closed + 1e-3);
        detail::push_max(ck, "smoothing_lambda_sup", sm.lambda_sup, 0.5);
    }
}

/// Fractional calculus: law of exponents, quadrature-vs-spectral agreement,
/// and the resolvent-growth norm against its eigenvector closed form.
inline void fractional_checks(std::vector<CheckRow>& ck) {
    const DiffusionModel heat = linear_heat_model();
    const SpatialGrid hg = build_grid(1.0, 16, Bc::Dirichlet, 1);
    const OperatorMatrix op = make_operator(assemble_operator(heat, Vec::Zero(16), hg).A, true);
    const Mat s = -op.A;

    const Mat s03 = fractional_power_matrix(op, 0.3);
    const Mat s07 = fractional_power_matrix(op, 0.7);
    detail::push_max(ck, "law_of_exponents_rel",
                     spectral_norm(Mat(s03 * s07 - s)) / spectral_norm(s), 1e-8);

    for (const double alpha : {0.25, 0.5, 0.75}) {
        const Mat sp = fractional_power_matrix(op, alpha, FracMethod::Spectral);
        const Mat dq = fractional_power_matrix(op, alpha, FracMethod::DunfordQuadrature);
        char name[64];
        std::snprintf(name, sizeof name, "quadrature_vs_spectral_a%02.0f", 100 * alpha);
        detail::push_max(ck, name, spectral_norm(Mat(dq - sp)) / spectral_norm(sp), 1e-6);
    }

    const auto rho = default_rho_grid(op);
    auto closed_form = [](double alpha, double mu) {
        return std::pow(alpha, alpha) * std::pow(1.0 - alpha, 1.0 - alpha) *
               std::pow(mu, alpha);
    };
    const int mid = op.dim() / 2;
    for (const double alpha : {0.25, 0.5, 0.75}) {
        const double mu = -op.eig[mid];
        const double got = dalpha_norm(op, op.eigvec.col(mid), alpha, rho);
        char name[64];
        std::snprintf(name, sizeof name, "dalpha_closed_form_a%02.0f", 100 * alpha);
        detail::push_max(ck, name, std::abs(got - closed_form(alpha, mu)) / closed_form(alpha, mu),
                         1e-3);
    }
    for (const int idx : {0, op.dim() - 1}) {
        const double mu = -op.eig[idx];
        const double got = dalpha_norm(op, op.eigvec.col(idx), 0.5, rho);
        detail::push_max(ck, "dalpha_closed_form_a50_mode" + std::to_string(idx),
                         std::abs(got - closed_form(0.5, mu)) / closed_form(0.5, mu), 1e-3);
    }
}

inline ExperimentReport run_identity_suite(const ExperimentConfig& cfg) {
    ExperimentReport rep;
    rep.cfg = cfg;
    const auto tic = std::chrono::steady_clock::now();
    identity_checks(rep.checks);
    t_property_checks(rep.checks);
    fractional_checks(rep.checks);
    int n_fail = 0;
    for (const auto& c : rep.checks)
        if (!c.pass) ++n_fail;
    rep.notes.push_back(detail::fmt_note("identity suite: %.0f checks, %.0f failed",
                                         rep.checks.size(), n_fail));
    rep.notes.push_back(detail::fmt_note("wall time: %.2f s", detail::elapsed_s(tic)));
    rep.exit_code = n_fail == 0 ? exit_ok : exit_threshold;
    return rep;
}

// ---------------------------------------------------------------------------
// assumption audit: measured structural constants of the concrete models
// ---------------------------------------------------------------------------

inline void audit_checks(std::vector<CheckRow>& ck) {
    // cross-diffusion system: ellipticity on positive states, constructor guard
    {
        const DiffusionModel skt =
            skt_model({1, 1}, {1, 1}, {2, 2}, {0.5, 0.5}, {{{1, 1}, {1, 1}}}, {});
        const SpatialGrid sg = build_grid(1.0, 16, Bc::Neumann, 2);
        const int n = 16;
        Vec s1(2 * n), s2(2 * n);
        for (int j = 0; j < n; ++j) {
            const double x = sg.node(j);
            s1[j] = 1.0 + 0.3 * std::sin(2.0 * std::numbers::pi * x);
            s1[n + j] = 0.8 + 0.2 * std::cos(std::numbers::pi * x);
            s2[j] = 0.6 + 0.1 * x;
            s2[n + j] = 1.2 - 0.4 * x * x;
        }
        const auto rep =
            check_assumptions(skt, {s1, s2, Vec::Ones(2 * n)}, sg, sector_lambda_samples());
        detail::push_min(ck, "skt_kappa_positive", rep.kappa_est, 1e-6);
        detail::push_min(ck, "skt_sectorial", rep.sectorial_ok ? 1.0 : 0.0, 1.0);
        detail::push_max(ck, "skt_resolvent_bound", rep.resolvent_M, 1e6);

        bool rejected = false;
        try {
            skt_model({1, 1}, {1, 1}, {std::sqrt(8.1), 2}, {0.5, 0.5}, {{{1, 1}, {1, 1}}}, {});
        } catch (const ConfigError&) {
            rejected = true;
        }
        bool accepted = true;
        try {
            skt_model({1, 1}, {1, 1}, {std::sqrt(7.9), 2}, {0.5, 0.5}, {{{1, 1}, {1, 1}}}, {});
        } catch (const ConfigError&) {
            accepted = false;
        }
        detail::push_min(ck, "skt_constructor_rejects_supercritical_cross_diffusion",
                         rejected ? 1.0 : 0.0, 1.0);
        detail::push_min(ck, "skt_constructor_accepts_subcritical_cross_diffusion",
                         accepted ? 1.0 : 0.0, 1.0);
    }

    // bounded scalar diffusion b = 2 + tanh: declared window kappa=1, C=3
    const DiffusionModel bd = bounded_diffusion_model(
        [](double v) { return 2.0 + std::tanh(v); }, 1.0, 3.0, {});
    const SpatialGrid bg = build_grid(1.0, 20, Bc::Dirichlet, 1);
    {
        Vec ramp(20);
        for (int j = 0; j < 20; ++j) ramp[j] = -4.0 + 8.0 * bg.node(j);
        const std::vector<Vec> box_states = {Vec::Constant(20, -4.0), Vec::Zero(20),
                                             Vec::Constant(20, 4.0), ramp};
        const auto rep = check_assumptions(bd, box_states, bg, sector_lambda_samples());
        detail::push_band(ck, "bounded_diffusion_kappa_est", rep.kappa_est, 1.0 - 1e-6, 1.1);
        detail::push_max(ck, "bounded_diffusion_continuity_M", rep.continuity_M, 3.0 + 1e-6);
        detail::push_max(ck, "bounded_diffusion_resolvent_bound", rep.resolvent_M, 1e6);
        detail::push_min(ck, "bounded_diffusion_sectorial", rep.sectorial_ok ? 1.0 : 0.0, 1.0);
    }

    // time regularity along a drift-free trajectory from a steep ramp
    {
        const TimeMesh mesh(0.0, 0.25, 128);
        const NoisePath quiet =
            path_from_increments(Mat::Zero(mesh.K, bd.n_modes()), mesh);
        Vec u0(20);
        for (int j = 0; j < 20; ++j) u0[j] = -4.0 + 8.0 * bg.node(j);
        const Trajectory wk = solve_weak_galerkin(bd, u0, quiet, bg);
        std::vector<Vec> samples;
        for (int i = 0; i <= mesh.K; i += mesh.K / 8) samples.push_back(wk.states[i]);
        const auto rep = check_assumptions(bd, samples, bg, sector_lambda_samples());
        detail::push_min(ck, "time_regularity_nu_plus_delta", rep.nu + rep.delta, 1.0);
        detail::push_band(ck, "time_regularity_delta", rep.delta, 0.1, 3.0);
        detail::push_max(ck, "state_lipschitz_quotient", rep.lipschitz_L, 1e6);
    }

    // pathwise Hoelder seminorm of a Brownian mode: stable under refinement
    {
        const NoisePath path = sample_path(7, TimeMesh(0.0, 1.0, 2048), 1);
        Trajectory fine, coarse;
        fine.mesh = path.mesh;
        coarse.mesh = TimeMesh(0.0, 1.0, 1024);
        for (int i = 0; i <= 2048; ++i) {
            Vec v(1);
            v << path.cumulative(i, 0);
            fine.states.push_back(v);
            if (i % 2 == 0) coarse.states.push_back(v);
        }
        const double sem_f = hoelder_seminorm(fine, 0.4, 1.0);
        const double sem_c = hoelder_seminorm(coarse, 0.4, 1.0);
        detail::push_max(ck, "hoelder_seminorm_refinement_growth", sem_f / sem_c - 1.0, 0.25);
    }

    // truncated-noise tail beyond the default 8 modes per species
    {
        const DiffusionModel skt =
            skt_model({1, 1}, {1, 1}, {2, 2}, {0.5, 0.5}, {{{1, 1}, {1, 1}}}, {});
        detail::push_max(ck, "hs_tail_beyond_truncation", hs_tail(skt), 1e-2);
    }
}

inline ExperimentReport run_assumption_audit(const ExperimentConfig& cfg) {
    ExperimentReport rep;
    rep.cfg = cfg;
    const auto tic = std::chrono::steady_clock::now();
    audit_checks(rep.checks);
    int n_fail = 0;
    for (const auto& c : rep.checks)
        if (!c.pass) ++n_fail;
    rep.notes.push_back(detail::fmt_note("assumption audit: %.0f checks, %.0f failed",
                                         rep.checks.size(), n_fail));
    rep.notes.push_back(detail::fmt_note("wall time: %.2f s", detail::elapsed_s(tic)));
    rep.exit_code = n_fail == 0 ? exit_ok : exit_threshold;
    return rep;
}

// ---------------------------------------------------------------------------

/// Run the configured experiment and write its artifacts into cfg.out_dir.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    validate_config(cfg);
    ExperimentReport rep;
    switch (cfg.kind) {
        case ExperimentKind::Equivalence: rep = run_equivalence(cfg); break;
        case ExperimentKind::Convergence: rep = run_convergence(cfg); break;
        case ExperimentKind::OracleSanity: rep = run_oracle_sanity(cfg); break;
        case ExperimentKind::IdentitySuite: rep = run_identity_suite(cfg); break;
        case ExperimentKind::AssumptionAudit: rep = run_assumption_audit(cfg); break;
    }
    const bool seeded = cfg.kind == ExperimentKind::Equivalence ||
                        cfg.kind == ExperimentKind::Convergence ||
                        cfg.kind == ExperimentKind::OracleSanity;
    if (seeded) {
        write_metrics_csv(rep, cfg.out_dir);
        write_refinement_csv(rep, cfg.out_dir);
    }
    if (!rep.checks.empty()) write_checks_csv(rep, cfg.out_dir);
    write_report_txt(rep, cfg.out_dir);
    return rep;
}

} // namespace qspde
