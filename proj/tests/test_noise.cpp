#include <doctest.h>
#include <qspde/qspde.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace qspde;

TEST_CASE("sampled path shapes, cumulative sums and determinism") {
    const TimeMesh mesh(0.0, 0.5, 64);
    const NoisePath p = sample_path(11, mesh, 5);
    CHECK(p.increments.rows() == 64);
    CHECK(p.increments.cols() == 5);
    CHECK(p.cumulative.rows() == 65);
    CHECK(p.cumulative.row(0).cwiseAbs().maxCoeff() == 0.0);
    // consecutive cumulative rows differ by the increment up to one rounding
    for (int i = 0; i < 64; ++i)
        CHECK((p.cumulative.row(i + 1) - p.cumulative.row(i) - p.increments.row(i))
                  .cwiseAbs()
                  .maxCoeff() <= 1e-14);

    const NoisePath q = sample_path(11, mesh, 5);
    CHECK((p.increments - q.increments).cwiseAbs().maxCoeff() == 0.0);
    const NoisePath r = sample_path(12, mesh, 5);
    CHECK((p.increments - r.increments).cwiseAbs().maxCoeff() > 0.0);

    CHECK_THROWS_AS(sample_path(11, mesh, 0), ConfigError);
    CHECK_THROWS_AS(path_from_increments(Mat::Zero(10, 2), mesh), ConfigError);
}

TEST_CASE("increments are standard normal after removing the step scale") {
    const int k = 10000;
    const NoisePath p = sample_path(2024, TimeMesh(0.0, 1.0, k), 1);
    const double sdt = std::sqrt(p.mesh.dt());
    double mean = 0, var = 0;
    for (int i = 0; i < k; ++i) mean += p.increments(i, 0) / sdt;
    mean /= k;
    for (int i = 0; i < k; ++i) {
        const double z = p.increments(i, 0) / sdt - mean;
        var += z * z;
    }
    var /= (k - 1);
    CHECK(std::abs(mean) <= 0.04);
    CHECK(var >= 0.94);
    CHECK(var <= 1.06);
}

TEST_CASE("coarsening sums fine increments exactly") {
    const NoisePath fine = sample_path(3, TimeMesh(0.0, 1.0, 32), 3);
    const NoisePath coarse = coarsen_path(fine, 2);
    CHECK(coarse.mesh.K == 16);
    CHECK(coarse.mesh.T == 1.0);
    CHECK(coarse.seed == fine.seed);
    for (int i = 0; i < 16; ++i)
        for (int g = 0; g < 3; ++g)
            CHECK(coarse.increments(i, g) ==
                  fine.increments(2 * i, g) + fine.increments(2 * i + 1, g));

    const NoisePath by4 = coarsen_path(fine, 4);
    const NoisePath twice = coarsen_path(coarse, 2);
    CHECK((by4.increments - twice.increments).cwiseAbs().maxCoeff() <= 1e-15);

    CHECK_THROWS_AS(coarsen_path(fine, 5), ConfigError);
    CHECK_THROWS_AS(coarsen_path(fine, 0), ConfigError);
}

TEST_CASE("mode matrix carries weighted eigenprofiles in species blocks") {
    NoiseSpec ns;
    ns.modes_per_species = 3;
    ns.c0 = 0.2;
    ns.decay = 1.0;

    const DiffusionModel heat = linear_heat_model(ns);
    const SpatialGrid gd = build_grid(1.0, 10, Bc::Dirichlet, 1);
    const Mat sig_d = noise_mode_matrix(heat, gd);
    REQUIRE(sig_d.rows() == 10);
    REQUIRE(sig_d.cols() == 3);
    for (int k = 1; k <= 3; ++k)
        for (int j = 0; j < 10; ++j)
            CHECK(sig_d(j, k - 1) ==
                  doctest::Approx((0.2 / k) * std::sqrt(2.0) *
                                  std::sin(k * M_PI * gd.node(j)))
                      .epsilon(1e-14));

    const DiffusionModel skt =
        skt_model({1, 1}, {1, 1}, {1, 1}, {0.5, 0.5}, {{{1, 1}, {1, 1}}}, ns);
    const SpatialGrid gn = build_grid(1.0, 8, Bc::Neumann, 2);
    const Mat sig_n = noise_mode_matrix(skt, gn);
    REQUIRE(sig_n.rows() == 16);
    REQUIRE(sig_n.cols() == 6);
    // mode 4 = species 1, wavenumber 2: cosine profile in the second block only
    CHECK(sig_n.block(0, 3, 8, 3).cwiseAbs().maxCoeff() == 0.0);
    CHECK(sig_n.block(8, 0, 8, 3).cwiseAbs().maxCoeff() == 0.0);
    for (int j = 0; j < 8; ++j)
        CHECK(sig_n(8 + j, 4) ==
              doctest::Approx((0.2 / 2) * std::sqrt(2.0) *
                              std::cos(2 * M_PI * gn.node(j)))
                  .epsilon(1e-14));
}

TEST_CASE("multiplicative noise scales the owning species' state pointwise") {
    NoiseSpec ns;
    ns.modes_per_species = 2;
    ns.multiplicative = true;
    const DiffusionModel skt =
        skt_model({1, 1}, {1, 1}, {1, 1}, {0.5, 0.5}, {{{1, 1}, {1, 1}}}, ns);
    const SpatialGrid g = build_grid(1.0, 6, Bc::Neumann, 2);
    Vec state(12);
    for (int i = 0; i < 12; ++i) state[i] = 1.0 + 0.1 * i;

    NoiseSpec ns_add = ns;
    ns_add.multiplicative = false;
    const DiffusionModel skt_add =
        skt_model({1, 1}, {1, 1}, {1, 1}, {0.5, 0.5}, {{{1, 1}, {1, 1}}}, ns_add);
    for (int mode = 0; mode < 4; ++mode) {
        const Vec mul = sigma_apply(skt, state, mode, g);
        const Vec add = sigma_apply(skt_add, state, mode, g);
        const int s = mode / 2;
        for (int j = 0; j < 6; ++j) {
            CHECK(mul[s * 6 + j] ==
                  doctest::Approx(add[s * 6 + j] * state[s * 6 + j]).epsilon(1e-14));
            CHECK(mul[(1 - s) * 6 + j] == 0.0);
        }
    }
    CHECK_THROWS_AS(sigma_apply(skt, state, 4, g), std::out_of_range);
    CHECK_THROWS_AS(sigma_apply(skt, state, -1, g), std::out_of_range);
}

TEST_CASE("forward integral telescopes and respects index bounds") {
    const DiffusionModel heat = linear_heat_model();
    const SpatialGrid g = build_grid(1.0, 12, Bc::Dirichlet, 1);
    const TimeMesh mesh(0.0, 1.0, 40);
    const NoisePath p = sample_path(5, mesh, heat.n_modes());
    const std::vector<Vec> flat(41, Vec::Zero(12));

    const Vec whole = ito_integral(heat, flat, p, 0, 40, g);
    const Vec a = ito_integral(heat, flat, p, 0, 17, g);
    const Vec b = ito_integral(heat, flat, p, 17, 40, g);
    CHECK((whole - a - b).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(ito_integral(heat, flat, p, 13, 13, g).cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS(ito_integral(heat, flat, p, 8, 3, g), std::invalid_argument);
    CHECK_THROWS_AS(ito_integral(heat, flat, p, 0, 41, g), std::out_of_range);

    // multiplicative version splits across ranges the same way
    NoiseSpec ns;
    ns.multiplicative = true;
    const DiffusionModel mheat = linear_heat_model(ns);
    std::vector<Vec> states(41);
    for (int i = 0; i <= 40; ++i)
        states[i] = Vec::Constant(12, 1.0 + 0.01 * i);
    const NoisePath q = sample_path(6, mesh, mheat.n_modes());
    const Vec w2 = ito_integral(mheat, states, q, 0, 40, g);
    const Vec a2 = ito_integral(mheat, states, q, 0, 11, g);
    const Vec b2 = ito_integral(mheat, states, q, 11, 40, g);
    CHECK((w2 - a2 - b2).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("mean normalized integral energy approaches the isometry value") {
    NoiseSpec ns;
    ns.modes_per_species = 4;
    ns.c0 = 0.3;
    const DiffusionModel heat = linear_heat_model(ns);
    const SpatialGrid g = build_grid(1.0, 16, Bc::Dirichlet, 1);
    const TimeMesh mesh(0.0, 1.0, 16);
    const double denom = mesh.T * hs_norm_sq(heat, Vec::Zero(16), g);
    const std::vector<Vec> flat(17, Vec::Zero(16));
    double acc = 0;
    const int n = 4000;
    for (int s = 0; s < n; ++s) {
        const NoisePath p = sample_path(1000 + s, mesh, heat.n_modes());
        const Vec i_t = ito_integral(heat, flat, p, 0, 16, g);
        acc += g.h * i_t.squaredNorm();
    }
    const double ratio = acc / n / denom;
    CHECK(ratio >= 0.9);
    CHECK(ratio <= 1.1);
}

TEST_CASE("truncated operator energy matches the weight sum exactly") {
    // the discrete mode profiles are orthonormal in the h-inner product, so
    // the Hilbert-Schmidt sum collapses to sum of squared weights
    NoiseSpec ns;
    ns.modes_per_species = 6;
    ns.c0 = 0.05;
    ns.decay = 1.0;
    const DiffusionModel heat = linear_heat_model(ns);
    const SpatialGrid gd = build_grid(1.0, 16, Bc::Dirichlet, 1);
    double expect = 0;
    for (int k = 1; k <= 6; ++k) expect += std::pow(0.05 / k, 2);
    CHECK(hs_norm_sq(heat, Vec::Zero(16), gd) == doctest::Approx(expect).epsilon(1e-12));

    const DiffusionModel skt =
        skt_model({1, 1}, {1, 1}, {1, 1}, {0.5, 0.5}, {{{1, 1}, {1, 1}}}, ns);
    const SpatialGrid gn = build_grid(1.0, 16, Bc::Neumann, 2);
    CHECK(hs_norm_sq(skt, Vec::Zero(32), gn) ==
          doctest::Approx(2.0 * expect).epsilon(1e-12));
}

TEST_CASE("truncation tail has the frozen reference value") {
    NoiseSpec ns;  // defaults: M = 8, c0 = 0.05, decay = 1
    const DiffusionModel skt =
        skt_model({1, 1}, {1, 1}, {2, 2}, {0.5, 0.5}, {{{1, 1}, {1, 1}}}, ns);
    CHECK(hs_tail(skt) == doctest::Approx(5.87560073473e-4).epsilon(1e-6));

    NoiseSpec flat = ns;
    flat.decay = 0.5;
    const DiffusionModel bad = linear_heat_model(flat);
    CHECK_THROWS_AS(hs_tail(bad), ConfigError);
}

TEST_CASE("hoelder seminorm basics and validation") {
    Trajectory t;
    t.mesh = TimeMesh(0.0, 1.0, 2);
    t.states = {Vec::Zero(2), Vec::Ones(2), Vec::Zero(2)};
    // adjacent pairs dominate: ||(1,1)|| / 0.5^0.5
    CHECK(hoelder_seminorm(t, 0.5, 1.0) ==
          doctest::Approx(std::sqrt(2.0) / std::sqrt(0.5)).epsilon(1e-12));
    const SpatialGrid g = build_grid(1.0, 2, Bc::Neumann, 1);
    CHECK(hoelder_seminorm(t, 0.5, g) ==
          doctest::Approx(std::sqrt(g.h) * std::sqrt(2.0) / std::sqrt(0.5)).epsilon(1e-12));
    CHECK_THROWS_AS(hoelder_seminorm(t, 0.0, 1.0), ConfigError);
    CHECK_THROWS_AS(hoelder_seminorm(t, 1.5, 1.0), ConfigError);
}

TEST_CASE("path csv roundtrip preserves every increment bit-exactly") {
    const NoisePath p = sample_path(42, TimeMesh(0.0, 0.25, 12), 4);
    const std::string file = "test_path_roundtrip.csv";
    save_path_csv(p, file);
    const NoisePath q = load_path_csv(file);
    CHECK(q.seed == 42);
    CHECK(q.mesh.K == 12);
    CHECK(q.mesh.T == 0.25);
    CHECK(q.n_modes == 4);
    CHECK((p.increments - q.increments).cwiseAbs().maxCoeff() == 0.0);
    std::filesystem::remove(file);
    CHECK_THROWS_AS(load_path_csv("no_such_file.csv"), ConfigError);
}
