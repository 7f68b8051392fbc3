#pragma once

#include "errors.hpp"
#include "grid.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace qspde {

/// Noise truncation: modes k = 1..M per species with weights c_k = c0 / k^decay.
/// Multiplicative models scale each mode by the nodal state of its species.
struct NoiseSpec {
    int modes_per_species = 8;
    double c0 = 0.05;
    double decay = 1.0;
    bool multiplicative = false;
};

/// A concrete SPDE system: diffusion matrix B(u), reaction rates, drift and
/// the truncated noise structure. Immutable once built by a factory below.
struct DiffusionModel {
    std::string name;
    int n_species = 1;
    Bc bc = Bc::Dirichlet;
    std::function<Mat(const Vec&)> B;  // point state (length n) -> n x n block
    Vec gamma;                         // per-species reaction rates, >= 0
    std::function<Vec(const Vec&)> F;  // point drift (length n); empty = none
    bool demand_definite = false;      // assembly rejects indefinite B blocks
    NoiseSpec noise;
    std::vector<double> mode_weight;   // c for mode s*M + (k-1)
    std::vector<std::string> constraints;  // validated parameter conditions

    bool has_drift() const { return static_cast<bool>(F); }
    int n_modes() const { return n_species * noise.modes_per_species; }
};

/// Nodal drift field F(u) on the whole grid (species-major layout).
inline Vec drift_field(const DiffusionModel& model, const SpatialGrid& grid,
                       const Vec& u) {
    const int n = grid.n_species, N = grid.N;
    Vec out = Vec::Zero(grid.dim());
    if (!model.F) return out;
    Vec pt(n);
    for (int j = 0; j < N; ++j) {
        for (int s = 0; s < n; ++s) pt[s] = u[s * N + j];
        const Vec f = model.F(pt);
        for (int s = 0; s < n; ++s) out[s * N + j] = f[s];
    }
    return out;
}

inline std::vector<double> make_mode_weights(int n_species, const NoiseSpec& ns) {
    std::vector<double> w(static_cast<size_t>(n_species) * ns.modes_per_species);
    for (int s = 0; s < n_species; ++s)
        for (int k = 1; k <= ns.modes_per_species; ++k)
            w[s * ns.modes_per_species + (k - 1)] = ns.c0 / std::pow(double(k), ns.decay);
    return w;
}

/// Two-species cross-diffusion population model with Lotka-Volterra drift.
///
/// B(u) = [[a1 + 2 b1 u1 + g1 u2, g1 u1], [g2 u2, a2 + 2 b2 u2 + g2 u1]],
/// Gamma = diag(d1, d2), F(u) = (2 d1 u1 - t11 u1^2 - t12 u1 u2,
///                               2 d2 u2 - t21 u1 u2 - t22 u2^2), no-flux bc.
/// Construction enforces g_i^2 < 8 a_i b_i (positive definiteness of the
/// symmetrized diffusion block on nonnegative states).
inline DiffusionModel skt_model(std::array<double, 2> alpha,
                                std::array<double, 2> beta,
                                std::array<double, 2> gamma,
                                std::array<double, 2> delta,
                                std::array<std::array<double, 2>, 2> theta,
                                NoiseSpec noise = {}) {
    for (int i = 0; i < 2; ++i) {
        if (!(alpha[i] > 0) || !(beta[i] > 0) || !(delta[i] > 0))
            throw ConfigError("skt: alpha, beta, delta must be positive");
        if (gamma[i] < 0) throw ConfigError("skt: gamma must be nonnegative");
        for (int j = 0; j < 2; ++j)
            if (!(theta[i][j] > 0)) throw ConfigError("skt: theta must be positive");
        if (!(gamma[i] * gamma[i] < 8.0 * alpha[i] * beta[i])) {
            char buf[160];
            std::snprintf(buf, sizeof buf,
                          "skt: cross-diffusion condition gamma%d^2 < 8*alpha%d*beta%d "
                          "violated (%g >= %g)",
                          i + 1, i + 1, i + 1, gamma[i] * gamma[i],
                          8.0 * alpha[i] * beta[i]);
            throw ConfigError(buf);
        }
    }
    DiffusionModel m;
    m.name = "skt";
    m.n_species = 2;
    m.bc = Bc::Neumann;
    m.B = [=](const Vec& u) {
        Mat b(2, 2);
        b(0, 0) = alpha[0] + 2.0 * beta[0] * u[0] + gamma[0] * u[1];
        b(0, 1) = gamma[0] * u[0];
        b(1, 0) = gamma[1] * u[1];
        b(1, 1) = alpha[1] + 2.0 * beta[1] * u[1] + gamma[1] * u[0];
        return b;
    };
    m.gamma = Vec(2);
    m.gamma << delta[0], delta[1];
    m.F = [=](const Vec& u) {
        Vec f(2);
        f[0] = 2.0 * delta[0] * u[0] - theta[0][0] * u[0] * u[0] - theta[0][1] * u[0] * u[1];
        f[1] = 2.0 * delta[1] * u[1] - theta[1][0] * u[0] * u[1] - theta[1][1] * u[1] * u[1];
        return f;
    };
    m.noise = noise;
    m.mode_weight = make_mode_weights(2, noise);
    m.constraints = {"gamma1^2 < 8*alpha1*beta1", "gamma2^2 < 8*alpha2*beta2"};
    return m;
}

/// Scalar quasilinear model u_t = div(b(u) grad u) + noise with a uniformly
/// positive bounded coefficient kappa <= b <= C, Dirichlet boundary, no drift.
/// The bounds are verified by sampling b over state_box at construction.
inline DiffusionModel bounded_diffusion_model(std::function<double(double)> b,
                                              double kappa, double C,
                                              NoiseSpec noise = {},
                                              std::pair<double, double> state_box = {-4.0, 4.0}) {
    if (!(kappa > 0) || !(C >= kappa))
        throw ConfigError("bounded_diffusion: need 0 < kappa <= C");
    const int samples = 2001;
    for (int i = 0; i < samples; ++i) {
        const double xi = state_box.first +
                          (state_box.second - state_box.first) * i / (samples - 1);
        const double v = b(xi);
        if (!std::isfinite(v) || v < kappa - 1e-8 || v > C + 1e-8) {
            char buf[128];
            std::snprintf(buf, sizeof buf,
                          "bounded_diffusion: b(%g) = %g outside [%g, %g]",
                          xi, v, kappa, C);
            throw ConfigError(buf);
        }
    }
    DiffusionModel m;
    m.name = "bounded_diffusion";
    m.n_species = 1;
    m.bc = Bc::Dirichlet;
    m.B = [b = std::move(b)](const Vec& u) {
        Mat blk(1, 1);
        blk(0, 0) = b(u[0]);
        return blk;
    };
    m.gamma = Vec::Zero(1);
    m.demand_definite = true;
    m.noise = noise;
    m.mode_weight = make_mode_weights(1, noise);
    m.constraints = {"kappa*I <= B(xi) <= C*I sampled over the state box"};
    return m;
}

/// Constant-coefficient heat model (b == 1): the degenerate linear instance
/// used as the exactly-solvable oracle case.
inline DiffusionModel linear_heat_model(NoiseSpec noise = {}) {
    DiffusionModel m = bounded_diffusion_model([](double) { return 1.0; },
                                               1.0, 1.0, noise);
    m.name = "linear_heat";
    return m;
}

} // namespace qspde
