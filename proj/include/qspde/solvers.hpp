#pragma once

#include "errors.hpp"
#include "evolution.hpp"
#include "grid.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "noise.hpp"
#include "operators.hpp"
#include "trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace qspde {

struct SolverConfig {
    double theta = 1.0;       // implicitness of the weak stepper (1 = backward Euler)
    double fp_tol = 1e-8;     // fixed-point stop: sup-over-mesh L2 distance
    int fp_max_iter = 20;
    bool include_drift = true;
    int output_stride = 1;    // keep every stride-th node of the returned trajectory
    double relax = 1.0;       // fixed-point damping (1 = plain Picard)
};

/// Defects of a trajectory against the weak and mild formulations; the two
/// product-rule correction terms of the moving-test-function form are
/// reported separately.
struct ResidualReport {
    double weak_residual_static = 0;
    double weak_residual_evolution = 0;
    double mild_residual = 0;
    double l1_term = 0;
    double l2_term = 0;
};

enum class ResidualMode { Static, EvolutionTest };

/// Thrown when the Picard loop exhausts fp_max_iter; carries the contraction
/// history and the last two iterates for post-mortem inspection.
struct FixedPointError : SolverError {
    std::vector<double> ratios;
    std::vector<Vec> last_iterate;
    std::vector<Vec> previous_iterate;

    FixedPointError(const std::string& msg, int iters, std::vector<double> ratios_,
                    std::vector<Vec> last, std::vector<Vec> prev)
        : SolverError(msg, iters), ratios(std::move(ratios_)),
          last_iterate(std::move(last)), previous_iterate(std::move(prev)) {}
};

struct FixedPointStats {
    int iterations = 0;
    bool converged = false;
    std::vector<double> distances;  // d_k = sup_j ||v_k - v_{k-1}||_h
    std::vector<double> ratios;     // d_{k+1} / d_k over positive d_k
};

namespace detail {

inline void check_solver_config(const SolverConfig& cfg) {
    if (cfg.theta < 0.0 || cfg.theta > 1.0)
        throw ConfigError("solver config: theta must lie in [0, 1]");
    if (!(cfg.fp_tol > 0.0)) throw ConfigError("solver config: fp_tol must be positive");
    if (cfg.fp_max_iter < 1) throw ConfigError("solver config: fp_max_iter must be >= 1");
    if (cfg.output_stride < 1)
        throw ConfigError("solver config: output_stride must be >= 1");
    if (!(cfg.relax > 0.0) || cfg.relax > 1.0)
        throw ConfigError("solver config: relax must lie in (0, 1]");
}

inline void guard_state(const Vec& u, int step) {
    if (!u.allFinite() || u.cwiseAbs().maxCoeff() > 1e6)
        throw BlowUpError("solver: state exceeded the blow-up guard (sup |u| > 1e6) at step " +
                              std::to_string(step), step);
}

inline void apply_output_stride(Trajectory& traj, int stride) {
    if (stride <= 1) return;
    const int k = traj.mesh.K;
    if (k % stride != 0)
        throw ConfigError("solver config: output_stride must divide K");
    std::vector<Vec> kept;
    kept.reserve(k / stride + 1);
    for (int i = 0; i <= k; i += stride) kept.push_back(std::move(traj.states[i]));
    traj.states = std::move(kept);
    traj.mesh = TimeMesh(traj.mesh.t0, traj.mesh.T, k / stride);
}

} // namespace detail

/// One frozen-coefficient pathwise-mild sweep: all O(K) accumulators plus
/// their terminal values, which feed the internal consistency diagnostic.
struct MildSweep {
    std::vector<Vec> states;  // u(t_j), j = 0..K
    Mat W;                    // U(T, 0)
    Mat M;                    // accumulated \int U(T,s) A(s) ds (left rectangles)
    Vec C;                    // accumulated \int U(T,s) A(s) I(s) ds
    Vec I;                    // terminal forward integral ito(0, K)

    /// || M I - (W - Id) I ||_h: the quadrature defect of the identity that
    /// collapses the double integral, evaluated at the terminal time.
    double consistency(const SpatialGrid& grid) const {
        const Mat id = Mat::Identity(W.rows(), W.cols());
        return grid.norm(M * I - (W - id) * I);
    }
};

/// Evaluate the frozen-coefficient mild formula on every mesh node:
/// u(t) = U(t,0)(u0 + I(t)) - [M(t) I(t) - C(t)] + D(t), with
/// M_{j+1} = P_j (M_j + dt A_j), C_{j+1} = P_j (C_j + dt A_j I_j) (I_j before
/// its update), W_{j+1} = P_j W_j, and trapezoidal Bochner drift
/// D_{j+1} = P_j (D_j + dt/2 F_j) + dt/2 F_{j+1}. Streams one propagator at a
/// time; never materializes the O(K^2) family.
inline MildSweep linear_mild_sweep(const std::vector<Vec>& frozen,
                                   const DiffusionModel& model, const Vec& u0,
                                   const NoisePath& path, const SpatialGrid& grid,
                                   const SolverConfig& cfg = {}) {
    detail::check_solver_config(cfg);
    const int k = path.steps(), m = grid.dim();
    if (static_cast<int>(frozen.size()) != k + 1)
        throw ConfigError("mild solver: frozen path must supply K+1 states");
    if (u0.size() != m) throw ConfigError("mild solver: initial state dimension mismatch");
    const double dt = path.mesh.dt();
    const Mat sig = noise_mode_matrix(model, grid);
    const bool drift = cfg.include_drift && model.has_drift();

    MildSweep sw;
    sw.states.assign(k + 1, Vec());
    sw.states[0] = u0;
    sw.W = Mat::Identity(m, m);
    sw.M = Mat::Zero(m, m);
    sw.C = Vec::Zero(m);
    sw.I = Vec::Zero(m);
    Vec d_acc = Vec::Zero(m);
    Vec f_cur = drift ? drift_field(model, grid, frozen[0]) : Vec();
    for (int j = 0; j < k; ++j) {
        const Mat a = assemble_operator(model, frozen[j], grid).A;
        const Mat p = detail::step_propagator(a, dt, j);
        sw.M = p * (sw.M + dt * a);
        sw.C = p * (sw.C + dt * (a * sw.I));
        sw.W = p * sw.W;
        if (drift) {
            Vec f_next = drift_field(model, grid, frozen[j + 1]);
            d_acc = p * (d_acc + 0.5 * dt * f_cur) + 0.5 * dt * f_next;
            f_cur = std::move(f_next);
        }
        sw.I += sigma_increment(model, sig, frozen[j], path.increments.row(j).transpose());
        Vec u = sw.W * (u0 + sw.I) - (sw.M * sw.I - sw.C);
        if (drift) u += d_acc;
        detail::guard_state(u, j + 1);
        sw.states[j + 1] = std::move(u);
    }
    return sw;
}

/// Mild evaluation of the linear problem with coefficients frozen along a
/// supplied state path.
inline Trajectory solve_linear_pathwise_mild(const std::vector<Vec>& frozen,
                                             const DiffusionModel& model, const Vec& u0,
                                             const NoisePath& path, const SpatialGrid& grid,
                                             const SolverConfig& cfg = {}) {
    Trajectory traj;
    traj.mesh = path.mesh;
    traj.tag = SolverTag::LinearMild;
    traj.seed = path.seed;
    traj.states = linear_mild_sweep(frozen, model, u0, path, grid, cfg).states;
    traj.metadata = "linear pathwise mild";
    detail::apply_output_stride(traj, cfg.output_stride);
    return traj;
}

/// Semi-implicit Galerkin stepper for the weak form:
/// (I - theta dt A_{u_i}) u_{i+1} = (I + (1-theta) dt A_{u_i}) u_i
///                                  + dt F(u_i) + sigma(u_i) dW_i.
/// Adapted by construction: step i uses increments up to i only.
inline Trajectory solve_weak_galerkin(const DiffusionModel& model, const Vec& u0,
                                      const NoisePath& path, const SpatialGrid& grid,
                                      const SolverConfig& cfg = {}) {
    detail::check_solver_config(cfg);
    const int k = path.steps(), m = grid.dim();
    if (u0.size() != m) throw ConfigError("weak solver: initial state dimension mismatch");
    const double dt = path.mesh.dt();
    const Mat sig = noise_mode_matrix(model, grid);
    const Mat id = Mat::Identity(m, m);
    const bool drift = cfg.include_drift && model.has_drift();

    Trajectory traj;
    traj.mesh = path.mesh;
    traj.tag = SolverTag::WeakGalerkin;
    traj.seed = path.seed;
    traj.states.assign(k + 1, Vec());
    traj.states[0] = u0;
    for (int i = 0; i < k; ++i) {
        const Vec& u = traj.states[i];
        const Mat a = assemble_operator(model, u, grid).A;
        Vec rhs = u + sigma_increment(model, sig, u, path.increments.row(i).transpose());
        if (cfg.theta < 1.0) rhs += (1.0 - cfg.theta) * dt * (a * u);
        if (drift) rhs += dt * drift_field(model, grid, u);
        const Mat lhs = id - cfg.theta * dt * a;
        Vec un = lhs.partialPivLu().solve(rhs);
        if (!un.allFinite() || (lhs * un - rhs).norm() > 1e-8 * (rhs.norm() + 1.0))
            throw SolverError("weak solver: implicit step matrix is singular at step " +
                                  std::to_string(i), i);
        detail::guard_state(un, i + 1);
        traj.states[i + 1] = std::move(un);
    }
    traj.metadata = "weak galerkin, theta = " + std::to_string(cfg.theta);
    detail::apply_output_stride(traj, cfg.output_stride);
    return traj;
}

/// Picard loop for the quasilinear problem: freeze coefficients at the
/// previous iterate (initially u0 held constant in time), solve the linear
/// mild problem, repeat until the sup-over-mesh L2 update drops below fp_tol.
/// The converged count includes the confirming solve.
inline Trajectory solve_quasilinear_fixed_point(const DiffusionModel& model, const Vec& u0,
                                                const NoisePath& path, const SpatialGrid& grid,
                                                const SolverConfig& cfg = {},
                                                FixedPointStats* stats = nullptr) {
    detail::check_solver_config(cfg);
    const int k = path.steps();
    if (u0.size() != grid.dim())
        throw ConfigError("fixed point: initial state dimension mismatch");

    std::vector<Vec> prev(k + 1, u0);
    std::vector<Vec> cur;
    FixedPointStats st;
    double d_prev = -1.0;
    for (int it = 1; it <= cfg.fp_max_iter; ++it) {
        cur = linear_mild_sweep(prev, model, u0, path, grid, cfg).states;
        double d = 0;
        for (int j = 0; j <= k; ++j) d = std::max(d, grid.norm(cur[j] - prev[j]));
        st.distances.push_back(d);
        if (d_prev > 0) st.ratios.push_back(d / d_prev);
        st.iterations = it;
        if (d <= cfg.fp_tol) {
            st.converged = true;
            prev = std::move(cur);
            break;
        }
        if (it == cfg.fp_max_iter) {
            if (stats) *stats = st;
            throw FixedPointError("fixed point: no convergence to tolerance within " +
                                      std::to_string(cfg.fp_max_iter) + " iterations",
                                  st.iterations, st.ratios, std::move(cur), std::move(prev));
        }
        if (cfg.relax == 1.0) {
            std::swap(prev, cur);
        } else {
            for (int j = 0; j <= k; ++j)
                prev[j] = (1.0 - cfg.relax) * prev[j] + cfg.relax * cur[j];
        }
        d_prev = d;
    }
    if (stats) *stats = st;

    Trajectory traj;
    traj.mesh = path.mesh;
    traj.tag = SolverTag::PathwiseMild;
    traj.seed = path.seed;
    traj.states = std::move(prev);
    traj.iterations_used = st.iterations;
    traj.metadata = "quasilinear fixed point, iterations = " + std::to_string(st.iterations);
    detail::apply_output_stride(traj, cfg.output_stride);
    return traj;
}

/// Exact discrete stochastic convolution for autonomous coefficients:
/// Z_{j+1} = P (Z_j + sigma dW_j), i.e. Z_j = P^j u0 + sum_i P^{j-i} sigma dW_i.
/// The reference the mild and weak solvers are measured against in the
/// degenerate (state-independent) case.
inline Trajectory exact_convolution_oracle(const DiffusionModel& model, const Vec& u0,
                                           const NoisePath& path, const SpatialGrid& grid) {
    const int k = path.steps();
    const Mat a = assemble_operator(model, u0, grid).A;
    const Mat p = detail::step_propagator(a, path.mesh.dt(), 0);
    const Mat sig = noise_mode_matrix(model, grid);
    Trajectory traj;
    traj.mesh = path.mesh;
    traj.tag = SolverTag::ExactOracle;
    traj.seed = path.seed;
    traj.states.assign(k + 1, Vec());
    traj.states[0] = u0;
    for (int j = 0; j < k; ++j) {
        const Vec& z = traj.states[j];
        traj.states[j + 1] =
            p * (z + sigma_increment(model, sig, z, path.increments.row(j).transpose()));
        detail::guard_state(traj.states[j + 1], j + 1);
    }
    traj.metadata = "exact discrete stochastic convolution";
    return traj;
}

namespace detail {

/// Forward integrals I_j = ito(0, j) for j = 0..t, left-frozen at the
/// trajectory's own states.
inline std::vector<Vec> ito_prefix(const DiffusionModel& model, const Trajectory& traj,
                                   const NoisePath& path, const SpatialGrid& grid, int t) {
    const Mat sig = noise_mode_matrix(model, grid);
    std::vector<Vec> is(t + 1);
    is[0] = Vec::Zero(grid.dim());
    for (int j = 0; j < t; ++j)
        is[j + 1] = is[j] + sigma_increment(model, sig, traj.states[j],
                                            path.increments.row(j).transpose());
    return is;
}

} // namespace detail

/// Defect of the trajectory in the weak formulation at node t_index.
/// Static mode tests against raw coordinate basis vectors:
///   <u(t),x> - <u0,x> - int <A(u_s) u_s, x> ds - int <F(u_s), x> ds - <I(t),x>,
/// max over a stride of 8 test vectors. EvolutionTest mode moves the test
/// function along the adjoint family, phi(s) = U(t,s)^T x*, with x* the
/// h-normalized solutions of A(u_t)^T x* = e_i (stride of 4); its two
/// product-rule correction integrals land in l1_term/l2_term. All time
/// integrals are composite trapezoids on the mesh.
inline ResidualReport weak_residual(const Trajectory& traj, const DiffusionModel& model,
                                    const NoisePath& path, const SpatialGrid& grid,
                                    int t_index, ResidualMode mode) {
    const int k = path.steps(), m = grid.dim();
    if (static_cast<int>(traj.states.size()) != k + 1)
        throw ConfigError("weak_residual: trajectory and path mesh disagree");
    if (t_index < 0 || t_index > k)
        throw std::out_of_range("weak_residual: t_index outside the mesh");
    const int t = t_index;
    const double dt = path.mesh.dt();
    const double h = grid.h;
    const bool drift = model.has_drift();

    ResidualReport rep;
    if (mode == ResidualMode::Static) {
        std::vector<Vec> au(t + 1);
        for (int j = 0; j <= t; ++j)
            au[j] = assemble_operator(model, traj.states[j], grid).A * traj.states[j];
        Vec r = traj.states[t] - traj.states[0] - trapezoid(au, dt);
        if (drift) {
            std::vector<Vec> fg(t + 1);
            for (int j = 0; j <= t; ++j) fg[j] = drift_field(model, grid, traj.states[j]);
            r -= trapezoid(fg, dt);
        }
        r -= ito_integral(model, traj.states, path, 0, t, grid);
        const int stride = std::max(1, m / 8);
        for (int i = 0; i < m; i += stride)
            rep.weak_residual_static = std::max(rep.weak_residual_static, std::abs(h * r[i]));
        return rep;
    }

    // EvolutionTest: store the step propagators once, recompute operators on
    // the fly in the backward sweep; all test columns advance together.
    std::vector<Mat> ps(t);
    for (int j = 0; j < t; ++j)
        ps[j] = detail::step_propagator(assemble_operator(model, traj.states[j], grid).A,
                                        dt, j);
    const std::vector<Vec> is = detail::ito_prefix(model, traj, path, grid, t);

    const Mat a_t = assemble_operator(model, traj.states[t], grid).A;
    Eigen::PartialPivLU<Mat> lu(a_t.transpose());
    const int stride = std::max(1, m / 4);
    std::vector<int> picks;
    for (int i = 0; i < m; i += stride) picks.push_back(i);
    const int q = static_cast<int>(picks.size());
    Mat xs(m, q);
    for (int c = 0; c < q; ++c) {
        Vec e = Vec::Zero(m);
        e[picks[c]] = 1.0;
        Vec x = lu.solve(e);
        if (!x.allFinite())
            throw SolverError("weak_residual: terminal operator not invertible", t);
        xs.col(c) = x / grid.norm(x);
    }

    Mat a_g(t + 1, q), l1_g(t + 1, q), l2_g(t + 1, q), f_g(t + 1, q);
    Mat phi = xs;
    Vec phi0_dot_u0(q);
    for (int j = t; j >= 0; --j) {
        const Mat a_j = assemble_operator(model, traj.states[j], grid).A;
        const Vec au = a_j * traj.states[j];
        const Mat phip = -(a_j.transpose() * phi);
        for (int c = 0; c < q; ++c) {
            a_g(j, c) = -h * au.dot(phi.col(c));
            l1_g(j, c) = h * traj.states[j].dot(phip.col(c));
            l2_g(j, c) = h * is[j].dot(phip.col(c));
            f_g(j, c) = drift ? h * drift_field(model, grid, traj.states[j]).dot(phi.col(c))
                              : 0.0;
        }
        if (j == 0)
            for (int c = 0; c < q; ++c) phi0_dot_u0[c] = h * traj.states[0].dot(phi.col(c));
        else
            phi = ps[j - 1].transpose() * phi;
    }
    auto trapz_col = [&](const Mat& g, int c) {
        double acc = 0.5 * (g(0, c) + g(t, c));
        for (int j = 1; j < t; ++j) acc += g(j, c);
        return t >= 1 ? dt * acc : 0.0;
    };
    for (int c = 0; c < q; ++c) {
        const double l1 = trapz_col(l1_g, c);
        const double l2 = -trapz_col(l2_g, c);
        const double r = h * traj.states[t].dot(xs.col(c)) - phi0_dot_u0[c] +
                         trapz_col(a_g, c) - l1 - l2 - trapz_col(f_g, c) -
                         h * is[t].dot(xs.col(c));
        rep.weak_residual_evolution = std::max(rep.weak_residual_evolution, std::abs(r));
        rep.l1_term = std::max(rep.l1_term, std::abs(l1));
        rep.l2_term = std::max(rep.l2_term, std::abs(l2));
    }
    return rep;
}

/// || u(t) - RHS(mild formula) ||_h with the family rebuilt from the
/// trajectory's own states; small by construction for fixed-point output,
/// a genuine equivalence measure for the weak solver's output.
inline double mild_residual(const Trajectory& traj, const DiffusionModel& model,
                            const NoisePath& path, const SpatialGrid& grid, int t_index) {
    const int k = path.steps();
    if (static_cast<int>(traj.states.size()) != k + 1)
        throw ConfigError("mild_residual: trajectory and path mesh disagree");
    if (t_index < 0 || t_index > k)
        throw std::out_of_range("mild_residual: t_index outside the mesh");
    const MildSweep sw = linear_mild_sweep(traj.states, model, traj.states[0], path, grid);
    return grid.norm(traj.states[t_index] - sw.states[t_index]);
}

} // namespace qspde
