#include <doctest.h>
#include <qspde/qspde.hpp>

#include <cmath>

using namespace qspde;

namespace {

DiffusionModel small_skt() {
    NoiseSpec ns;
    ns.modes_per_species = 4;
    ns.c0 = 0.05;
    return skt_model({1, 1}, {1, 1}, {2, 2}, {0.5, 0.5}, {{{1, 1}, {1, 1}}}, ns);
}

} // namespace

TEST_CASE("zero noise from the zero state stays identically zero") {
    const DiffusionModel heat = linear_heat_model();
    const SpatialGrid g = build_grid(1.0, 10, Bc::Dirichlet, 1);
    const TimeMesh mesh(0.0, 0.5, 32);
    const NoisePath quiet = path_from_increments(Mat::Zero(32, heat.n_modes()), mesh);
    const Vec u0 = Vec::Zero(10);

    const Trajectory wk = solve_weak_galerkin(heat, u0, quiet, g);
    FixedPointStats st;
    const Trajectory md = solve_quasilinear_fixed_point(heat, u0, quiet, g, {}, &st);

    for (const auto& u : wk.states) CHECK(u.cwiseAbs().maxCoeff() == 0.0);
    for (const auto& u : md.states) CHECK(u.cwiseAbs().maxCoeff() == 0.0);
    CHECK(st.converged);
    CHECK(st.iterations == 1);  // the confirming solve is counted
    CHECK(sup_distance(wk, md, g) == 0.0);
    CHECK(mild_residual(wk, heat, quiet, g, 32) == 0.0);
    const auto rs = weak_residual(md, heat, quiet, g, 32, ResidualMode::Static);
    CHECK(rs.weak_residual_static == 0.0);
    const auto re = weak_residual(md, heat, quiet, g, 32, ResidualMode::EvolutionTest);
    CHECK(re.weak_residual_evolution == 0.0);
}

TEST_CASE("state-independent coefficients converge in exactly two sweeps") {
    const DiffusionModel heat = linear_heat_model();
    const SpatialGrid g = build_grid(1.0, 12, Bc::Dirichlet, 1);
    const TimeMesh mesh(0.0, 0.25, 64);
    const NoisePath path = sample_path(9, mesh, heat.n_modes());
    Vec u0(12);
    for (int j = 0; j < 12; ++j) u0[j] = 0.5 * std::sin(M_PI * g.node(j));

    FixedPointStats st;
    const Trajectory md = solve_quasilinear_fixed_point(heat, u0, path, g, {}, &st);
    CHECK(st.converged);
    CHECK(st.iterations == 2);  // one productive sweep plus its confirmation
    CHECK(st.distances.size() == 2);
    CHECK(st.distances[1] == 0.0);
    CHECK(md.iterations_used == 2);
    CHECK(md.tag == SolverTag::PathwiseMild);

    // the linear fixed point equals the one-pass mild evaluation
    const std::vector<Vec> flat(65, u0);
    const Trajectory direct = solve_linear_pathwise_mild(flat, heat, u0, path, g);
    CHECK(direct.tag == SolverTag::LinearMild);
    CHECK(sup_distance(md, direct, g) == 0.0);
}

TEST_CASE("implicit stepper reproduces the discrete heat decay") {
    const DiffusionModel heat = linear_heat_model();
    const int n = 64, k = 64;
    const SpatialGrid g = build_grid(1.0, n, Bc::Dirichlet, 1);
    const TimeMesh mesh(0.0, 0.1, k);
    const NoisePath quiet = path_from_increments(Mat::Zero(k, heat.n_modes()), mesh);
    Vec u0(n);
    for (int j = 0; j < n; ++j) u0[j] = std::sin(M_PI * g.node(j));
    CHECK(g.norm(u0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));

    const Trajectory t1 = solve_weak_galerkin(heat, u0, quiet, g);  // theta = 1
    const Vec expected = 0.3755970060 * u0;  // (1 + dt*mu_h)^(-K) on the ground mode
    CHECK(g.norm(t1.back() - expected) / g.norm(expected) <= 1e-8);
    // the discrete factor approximates the continuum decay exp(-pi^2 T)
    const double analytic = std::exp(-M_PI * M_PI * 0.1);
    CHECK(std::abs(t1.back()[n / 2] / u0[n / 2] - analytic) / analytic <= 0.01);

    // theta = 1/2 follows its own one-mode amplification formula
    SolverConfig half;
    half.theta = 0.5;
    const Trajectory t2 = solve_weak_galerkin(heat, u0, quiet, g, half);
    const Mat a = assemble_operator(heat, u0, g).A;
    const double mu = -(a * u0)[n / 2] / u0[n / 2];
    const double dt = mesh.dt();
    const double amp = std::pow((1.0 - 0.5 * dt * mu) / (1.0 + 0.5 * dt * mu), k);
    CHECK(g.norm(t2.back() - amp * u0) / std::abs(amp) <= 1e-10);
}

TEST_CASE("convolution oracle recursion checks out by hand at two steps") {
    const DiffusionModel heat = linear_heat_model();
    const SpatialGrid g = build_grid(1.0, 6, Bc::Dirichlet, 1);
    const TimeMesh mesh(0.0, 0.2, 2);
    const NoisePath path = sample_path(4, mesh, heat.n_modes());
    Vec u0 = Vec::Constant(6, 0.3);

    const Trajectory z = exact_convolution_oracle(heat, u0, path, g);
    const Mat a = assemble_operator(heat, u0, g).A;
    const Mat p = expm(mesh.dt() * a);
    const Mat sig = noise_mode_matrix(heat, g);
    const Vec z1 = p * (u0 + sig * path.increments.row(0).transpose());
    const Vec z2 = p * (z1 + sig * path.increments.row(1).transpose());
    CHECK((z.states[1] - z1).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((z.states[2] - z2).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(z.tag == SolverTag::ExactOracle);
}

TEST_CASE("dimension and mesh validation errors") {
    const DiffusionModel heat = linear_heat_model();
    const SpatialGrid g = build_grid(1.0, 8, Bc::Dirichlet, 1);
    const TimeMesh mesh(0.0, 0.25, 16);
    const NoisePath path = sample_path(1, mesh, heat.n_modes());

    CHECK_THROWS_AS(solve_weak_galerkin(heat, Vec::Zero(5), path, g), ConfigError);
    CHECK_THROWS_AS(solve_quasilinear_fixed_point(heat, Vec::Zero(5), path, g),
                    ConfigError);
    CHECK_THROWS_AS(
        linear_mild_sweep(std::vector<Vec>(10, Vec::Zero(8)), heat, Vec::Zero(8), path, g),
        ConfigError);
    CHECK_THROWS_AS(
        linear_mild_sweep(std::vector<Vec>(17, Vec::Zero(8)), heat, Vec::Zero(5), path, g),
        ConfigError);

    Trajectory short_traj;
    short_traj.mesh = TimeMesh(0.0, 0.25, 8);
    short_traj.states.assign(9, Vec::Zero(8));
    CHECK_THROWS_AS(weak_residual(short_traj, heat, path, g, 8, ResidualMode::Static),
                    ConfigError);
    CHECK_THROWS_AS(mild_residual(short_traj, heat, path, g, 8), ConfigError);

    const Trajectory wk = solve_weak_galerkin(heat, Vec::Zero(8), path, g);
    CHECK_THROWS_AS(weak_residual(wk, heat, path, g, 17, ResidualMode::Static),
                    std::out_of_range);
    CHECK_THROWS_AS(weak_residual(wk, heat, path, g, -1, ResidualMode::EvolutionTest),
                    std::out_of_range);
    CHECK_THROWS_AS(mild_residual(wk, heat, path, g, 17), std::out_of_range);
}

TEST_CASE("solver configuration is validated up front") {
    const DiffusionModel heat = linear_heat_model();
    const SpatialGrid g = build_grid(1.0, 6, Bc::Dirichlet, 1);
    const NoisePath path = sample_path(1, TimeMesh(0.0, 0.25, 8), heat.n_modes());
    const Vec u0 = Vec::Zero(6);
    auto with = [&](auto mutate) {
        SolverConfig c;
        mutate(c);
        return solve_weak_galerkin(heat, u0, path, g, c);
    };
    CHECK_THROWS_AS(with([](SolverConfig& c) { c.theta = -0.1; }), ConfigError);
    CHECK_THROWS_AS(with([](SolverConfig& c) { c.theta = 1.1; }), ConfigError);
    CHECK_THROWS_AS(with([](SolverConfig& c) { c.fp_tol = 0.0; }), ConfigError);
    CHECK_THROWS_AS(with([](SolverConfig& c) { c.fp_max_iter = 0; }), ConfigError);
    CHECK_THROWS_AS(with([](SolverConfig& c) { c.output_stride = 0; }), ConfigError);
    CHECK_THROWS_AS(with([](SolverConfig& c) { c.relax = 0.0; }), ConfigError);
    CHECK_THROWS_AS(with([](SolverConfig& c) { c.relax = 1.5; }), ConfigError);
}

TEST_CASE("output stride keeps every stride-th node") {
    const DiffusionModel heat = linear_heat_model();
    const SpatialGrid g = build_grid(1.0, 8, Bc::Dirichlet, 1);
    const NoisePath path = sample_path(2, TimeMesh(0.0, 0.25, 16), heat.n_modes());
    Vec u0 = Vec::Constant(8, 0.1);

    const Trajectory full = solve_weak_galerkin(heat, u0, path, g);
    SolverConfig thin;
    thin.output_stride = 4;
    const Trajectory strided = solve_weak_galerkin(heat, u0, path, g, thin);
    REQUIRE(strided.states.size() == 5);
    CHECK(strided.mesh.K == 4);
    CHECK(strided.mesh.T == full.mesh.T);
    for (int i = 0; i <= 4; ++i)
        CHECK((strided.states[i] - full.states[4 * i]).cwiseAbs().maxCoeff() == 0.0);

    SolverConfig broken;
    broken.output_stride = 3;  // does not divide K = 16
    CHECK_THROWS_AS(solve_weak_galerkin(heat, u0, path, g, broken), ConfigError);
}

TEST_CASE("drift blow-up trips the guard in both solvers") {
    DiffusionModel rocket;
    rocket.name = "rocket";
    rocket.n_species = 1;
    rocket.bc = Bc::Dirichlet;
    rocket.B = [](const Vec&) -> Mat { return Mat::Identity(1, 1); };
    rocket.gamma = Vec::Zero(1);
    rocket.F = [](const Vec&) -> Vec { return Vec::Constant(1, 1e9); };
    rocket.mode_weight = make_mode_weights(1, rocket.noise);
    const SpatialGrid g = build_grid(1.0, 6, Bc::Dirichlet, 1);
    const NoisePath path = sample_path(3, TimeMesh(0.0, 1.0, 4), rocket.n_modes());
    const Vec u0 = Vec::Zero(6);
    CHECK_THROWS_AS(solve_weak_galerkin(rocket, u0, path, g), BlowUpError);
    CHECK_THROWS_AS(solve_quasilinear_fixed_point(rocket, u0, path, g), BlowUpError);
}

TEST_CASE("exhausted iteration budget raises a diagnosable error") {
    const DiffusionModel skt = small_skt();
    const SpatialGrid g = build_grid(1.0, 12, Bc::Neumann, 2);
    const TimeMesh mesh(0.0, 0.25, 32);
    const NoisePath path = sample_path(5, mesh, skt.n_modes());
    const Vec u0 = Vec::Constant(24, 0.5);

    SolverConfig strict;
    strict.fp_max_iter = 1;
    bool threw = false;
    try {
        solve_quasilinear_fixed_point(skt, u0, path, g, strict);
    } catch (const FixedPointError& e) {
        threw = true;
        CHECK(e.step == 1);
        CHECK(e.ratios.empty());
        CHECK(e.last_iterate.size() == 33);
        CHECK(e.previous_iterate.size() == 33);
    }
    CHECK(threw);
}

TEST_CASE("quasilinear fixed point contracts on the cross-diffusion model") {
    const DiffusionModel skt = small_skt();
    const SpatialGrid g = build_grid(1.0, 12, Bc::Neumann, 2);
    const TimeMesh mesh(0.0, 0.25, 64);
    const NoisePath path = sample_path(5, mesh, skt.n_modes());
    const Vec u0 = Vec::Constant(24, 0.5);

    FixedPointStats st;
    const Trajectory md = solve_quasilinear_fixed_point(skt, u0, path, g, {}, &st);
    CHECK(st.converged);
    CHECK(st.iterations >= 2);
    CHECK(st.iterations <= 10);
    for (const double r : st.ratios) CHECK(r < 1.0);

    // converged output nearly solves its own frozen-coefficient formula
    CHECK(mild_residual(md, skt, path, g, 64) <= 1e-6);

    // and stays close to the direct weak discretization of the same path
    const Trajectory wk = solve_weak_galerkin(skt, u0, path, g);
    CHECK(sup_distance(wk, md, g) / (1.0 + sup_norm(wk, g)) <= 0.05);

    // the terminal consistency defect of the underlying sweep shrinks with
    // the step; at this coarse mesh (K = 64) it sits near 7e-3
    const MildSweep sw = linear_mild_sweep(md.states, skt, u0, path, g);
    CHECK(sw.consistency(g) <= 2e-2);
}

TEST_CASE("damped iteration follows the relaxed contraction") {
    const DiffusionModel heat = linear_heat_model();
    const SpatialGrid g = build_grid(1.0, 10, Bc::Dirichlet, 1);
    const NoisePath path = sample_path(8, TimeMesh(0.0, 0.25, 32), heat.n_modes());
    Vec u0 = Vec::Constant(10, 0.2);

    SolverConfig damped;
    damped.relax = 0.5;
    damped.fp_tol = 1e-3;
    FixedPointStats st;
    const Trajectory md = solve_quasilinear_fixed_point(heat, u0, path, g, damped, &st);
    CHECK(st.converged);
    CHECK(st.iterations > 2);  // damping slows the linear one-shot convergence
    for (const double r : st.ratios) CHECK(r == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(md.states.size() == 33);
}
