#pragma once

#include "errors.hpp"
#include "grid.hpp"
#include "model.hpp"
#include "time_mesh.hpp"
#include "trajectory.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qspde {

/// Truncated cylindrical Wiener path: per-mode Brownian increments on the
/// mesh plus their running sums. Immutable after sampling; identical
/// (seed, mesh, M) reproduce bit-identical arrays.
struct NoisePath {
    TimeMesh mesh;
    int n_modes = 0;
    uint64_t seed = 0;
    Mat increments;  // K x M, entry (i,k) ~ Normal(0, dt)
    Mat cumulative;  // (K+1) x M, row 0 zero, consecutive diffs = increments

    int steps() const { return mesh.K; }
};

namespace detail {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Standard normals via Box-Muller on (0,1] uniforms, one cached spare.
/// Kept explicit (rather than std::normal_distribution) so the stream is
/// identical across standard-library implementations.
struct GaussianStream {
    std::mt19937_64 eng;
    double spare = 0;
    bool has_spare = false;

    explicit GaussianStream(uint64_t seed) : eng(splitmix64(seed)) {}

    double unit() {  // uniform on (0, 1]
        return (double((eng() >> 11)) + 1.0) * 0x1p-53;
    }
    double next() {
        if (has_spare) {
            has_spare = false;
            return spare;
        }
        const double r = std::sqrt(-2.0 * std::log(unit()));
        const double a = 2.0 * M_PI * unit();
        spare = r * std::sin(a);
        has_spare = true;
        return r * std::cos(a);
    }
};

inline Mat cumulative_of(const Mat& inc) {
    Mat cum = Mat::Zero(inc.rows() + 1, inc.cols());
    for (int i = 0; i < inc.rows(); ++i) cum.row(i + 1) = cum.row(i) + inc.row(i);
    return cum;
}

} // namespace detail

/// Draw a K x M increment table row-major (time outer, mode inner).
inline NoisePath sample_path(uint64_t seed, const TimeMesh& mesh, int n_modes) {
    if (n_modes < 1) throw ConfigError("sample_path: need at least one mode");
    NoisePath path;
    path.mesh = mesh;
    path.n_modes = n_modes;
    path.seed = seed;
    path.increments.resize(mesh.K, n_modes);
    detail::GaussianStream g(seed);
    const double sdt = std::sqrt(mesh.dt());
    for (int i = 0; i < mesh.K; ++i)
        for (int k = 0; k < n_modes; ++k) path.increments(i, k) = sdt * g.next();
    path.cumulative = detail::cumulative_of(path.increments);
    return path;
}

inline NoisePath path_from_increments(const Mat& inc, const TimeMesh& mesh,
                                      uint64_t seed = 0) {
    if (inc.rows() != mesh.K)
        throw ConfigError("path_from_increments: increment rows must equal K");
    NoisePath path;
    path.mesh = mesh;
    path.n_modes = static_cast<int>(inc.cols());
    path.seed = seed;
    path.increments = inc;
    path.cumulative = detail::cumulative_of(inc);
    return path;
}

/// Coarsen by an integer factor: coarse increments are exact sums of fine
/// ones, so refinement studies share one Brownian path across levels.
inline NoisePath coarsen_path(const NoisePath& fine, int factor = 2) {
    if (factor < 1 || fine.mesh.K % factor != 0)
        throw ConfigError("coarsen_path: factor must divide K");
    const int kc = fine.mesh.K / factor;
    Mat inc = Mat::Zero(kc, fine.n_modes);
    for (int i = 0; i < kc; ++i)
        for (int r = 0; r < factor; ++r) inc.row(i) += fine.increments.row(i * factor + r);
    return path_from_increments(inc, TimeMesh(fine.mesh.t0, fine.mesh.T, kc), fine.seed);
}

/// Columns sigma(.)e_g for the additive part: mode g = s*M + (k-1) acts on
/// species s with profile c_g * sqrt(2) sin(k pi x / L) (Dirichlet) or the
/// cosine analogue (Neumann), zero on other species.
inline Mat noise_mode_matrix(const DiffusionModel& model, const SpatialGrid& grid) {
    const int mps = model.noise.modes_per_species;
    Mat sig = Mat::Zero(grid.dim(), model.n_modes());
    for (int s = 0; s < model.n_species; ++s)
        for (int k = 1; k <= mps; ++k) {
            const int g = s * mps + (k - 1);
            const double c = model.mode_weight[g];
            for (int j = 0; j < grid.N; ++j) {
                const double arg = k * M_PI * grid.node(j) / grid.L;
                const double e = std::sqrt(2.0) *
                                 (grid.bc == Bc::Dirichlet ? std::sin(arg) : std::cos(arg));
                sig(s * grid.N + j, g) = c * e;
            }
        }
    return sig;
}

/// Nodal sigma_k(x, u(x)) for one mode (state-independent unless the model
/// declares multiplicative noise, in which case the profile scales the
/// state of the mode's own species pointwise).
inline Vec sigma_apply(const DiffusionModel& model, const Vec& state, int mode,
                       const SpatialGrid& grid) {
    if (mode < 0 || mode >= model.n_modes())
        throw std::out_of_range("sigma_apply: mode out of range");
    const int mps = model.noise.modes_per_species;
    const int s = mode / mps, k = mode % mps + 1;
    Vec out = Vec::Zero(grid.dim());
    const double c = model.mode_weight[mode];
    for (int j = 0; j < grid.N; ++j) {
        const double arg = k * M_PI * grid.node(j) / grid.L;
        double v = c * std::sqrt(2.0) *
                   (grid.bc == Bc::Dirichlet ? std::sin(arg) : std::cos(arg));
        if (model.noise.multiplicative) v *= state[s * grid.N + j];
        out[s * grid.N + j] = v;
    }
    return out;
}

/// One noise kick sigma(state) dW given a precomputed mode matrix and one
/// increment row.
inline Vec sigma_increment(const DiffusionModel& model, const Mat& sig, const Vec& state,
                           const Vec& dw_row) {
    Vec v = sig * dw_row;
    if (model.noise.multiplicative) v = v.cwiseProduct(state);
    return v;
}

/// Left-endpoint (Ito) sum over [t_from, t_to); additive models reduce to a
/// telescoped cumulative difference, which keeps additivity across splits
/// exact. traj_states must cover indices up to i_to-1 for multiplicative runs.
inline Vec ito_integral(const DiffusionModel& model, const std::vector<Vec>& traj_states,
                        const NoisePath& path, int i_from, int i_to,
                        const SpatialGrid& grid) {
    if (i_from > i_to)
        throw std::invalid_argument("ito_integral: need i_from <= i_to");
    if (i_from < 0 || i_to > path.steps())
        throw std::out_of_range("ito_integral: index outside the mesh");
    const Mat sig = noise_mode_matrix(model, grid);
    if (!model.noise.multiplicative)
        return sig * (path.cumulative.row(i_to) - path.cumulative.row(i_from)).transpose();
    Vec acc = Vec::Zero(grid.dim());
    for (int i = i_from; i < i_to; ++i)
        acc += sigma_increment(model, sig, traj_states[i], path.increments.row(i).transpose());
    return acc;
}

/// Squared Hilbert-Schmidt norm sum_g ||sigma(u)e_g||_h^2 of the truncated
/// operator at a given state.
inline double hs_norm_sq(const DiffusionModel& model, const Vec& state,
                         const SpatialGrid& grid) {
    const Mat sig = noise_mode_matrix(model, grid);
    double total = 0;
    for (int g = 0; g < model.n_modes(); ++g) {
        Vec col = sig.col(g);
        if (model.noise.multiplicative) col = col.cwiseProduct(state);
        total += grid.h * col.squaredNorm();
    }
    return total;
}

/// Truncation tail sum_species sum_{k>M} c_k^2 (direct partial sum plus an
/// integral remainder); requires decay > 1/2 for convergence.
inline double hs_tail(const DiffusionModel& model) {
    const auto& ns = model.noise;
    if (!(ns.decay > 0.5))
        throw ConfigError("hs_tail: mode weights need decay > 1/2 to be square-summable");
    const int cut = 1000000;
    double tail = 0;
    for (int k = ns.modes_per_species + 1; k <= cut; ++k)
        tail += std::pow(ns.c0 / std::pow(double(k), ns.decay), 2);
    tail += ns.c0 * ns.c0 * std::pow(double(cut), 1.0 - 2.0 * ns.decay) / (2.0 * ns.decay - 1.0);
    return model.n_species * tail;
}

/// max over mesh pairs of ||u(t_j) - u(t_i)|| / |t_j - t_i|^exponent.
/// Weighted by sqrt(h_weight) so callers can pass the grid spacing to get
/// the discrete L2 norm; a bounded-under-refinement diagnostic.
inline double hoelder_seminorm(const Trajectory& traj, double exponent,
                               double h_weight = 1.0) {
    if (!(exponent > 0.0) || exponent > 1.0)
        throw ConfigError("hoelder_seminorm: exponent must lie in (0, 1]");
    const double dt = traj.mesh.dt();
    const int k = static_cast<int>(traj.states.size()) - 1;
    double worst = 0;
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j <= k; ++j) {
            const double num = std::sqrt(h_weight) * (traj.states[j] - traj.states[i]).norm();
            worst = std::max(worst, num / std::pow((j - i) * dt, exponent));
        }
    return worst;
}

inline double hoelder_seminorm(const Trajectory& traj, double exponent,
                               const SpatialGrid& grid) {
    return hoelder_seminorm(traj, exponent, grid.h);
}

/// Flat CSV dump: header comments carry (seed, mesh, M); one row per step,
/// increments row-major.
inline void save_path_csv(const NoisePath& path, const std::string& file) {
    std::ofstream out(file);
    if (!out) throw ConfigError("save_path_csv: cannot open " + file);
    char buf[64];
    out << "# noise path\n";
    std::snprintf(buf, sizeof buf, "%llu", static_cast<unsigned long long>(path.seed));
    out << "# seed = " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.17g %.17g %d", path.mesh.t0, path.mesh.T, path.mesh.K);
    out << "# mesh = " << buf << "\n";
    out << "# modes = " << path.n_modes << "\n";
    for (int i = 0; i < path.increments.rows(); ++i) {
        for (int g = 0; g < path.increments.cols(); ++g) {
            std::snprintf(buf, sizeof buf, "%.17g", path.increments(i, g));
            out << (g ? "," : "") << buf;
        }
        out << "\n";
    }
}

inline NoisePath load_path_csv(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("load_path_csv: cannot open " + file);
    uint64_t seed = 0;
    double t0 = 0, tend = 1;
    int k = 0, modes = 0;
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string key, eq;
            ls >> key >> eq;
            if (key == "seed") ls >> seed;
            else if (key == "mesh") ls >> t0 >> tend >> k;
            else if (key == "modes") ls >> modes;
            continue;
        }
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    if (rows.empty() || k != static_cast<int>(rows.size()) ||
        modes != static_cast<int>(rows[0].size()))
        throw ConfigError("load_path_csv: malformed path file " + file);
    Mat inc(k, modes);
    for (int i = 0; i < k; ++i)
        for (int g = 0; g < modes; ++g) inc(i, g) = rows[i][g];
    return path_from_increments(inc, TimeMesh(t0, tend, k), seed);
}

} // namespace qspde
