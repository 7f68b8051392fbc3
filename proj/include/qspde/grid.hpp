#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace qspde {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Bc { Dirichlet, Neumann };

/// One-dimensional grid shared by all species, plus the discrete gradient.
///
/// Dirichlet: nodes x_j = (j+1)h, j = 0..N-1 with h = L/(N+1); the gradient
/// has E = N+1 edges, the boundary rows pick up the (zero) ghost values.
/// Neumann: cell centers x_j = (j+1/2)h with h = L/N; the gradient has the
/// E = N-1 interior edges only (zero flux through the boundary).
struct SpatialGrid {
    double L = 1.0;
    int N = 2;            // dof per species
    Bc bc = Bc::Dirichlet;
    int n_species = 1;
    double h = 0.0;
    Mat D;                // per-species gradient, E x N
    Mat G;                // species-blockdiag gradient, (n*E) x (n*N)

    int dim() const { return n_species * N; }
    int edges() const { return static_cast<int>(D.rows()); }

    /// Grid coordinate of node j (same for every species).
    double node(int j) const {
        return bc == Bc::Dirichlet ? (j + 1) * h : (j + 0.5) * h;
    }

    /// Mesh-weighted inner product <u,v>_h = h * sum_i u_i v_i.
    double inner(const Vec& u, const Vec& v) const { return h * u.dot(v); }
    double norm(const Vec& u) const { return std::sqrt(inner(u, u)); }

    /// Discrete H1 norm: sqrt(|u|_h^2 + h*|Gu|^2).
    double norm_h1(const Vec& u) const {
        const Vec gu = G * u;
        return std::sqrt(h * (u.squaredNorm() + gu.squaredNorm()));
    }
};

inline SpatialGrid build_grid(double L, int N, Bc bc, int n_species = 1) {
    if (!(L > 0.0))
        throw std::invalid_argument("grid: domain length must be positive");
    if (N < 2)
        throw std::invalid_argument("grid: need at least 2 dof per species");
    if (n_species < 1)
        throw std::invalid_argument("grid: need at least one species");

    SpatialGrid g;
    g.L = L;
    g.N = N;
    g.bc = bc;
    g.n_species = n_species;
    g.h = bc == Bc::Dirichlet ? L / (N + 1) : L / N;

    const int E = bc == Bc::Dirichlet ? N + 1 : N - 1;
    g.D = Mat::Zero(E, N);
    const double ih = 1.0 / g.h;
    if (bc == Bc::Dirichlet) {
        // edge e sits between node e-1 and node e; ghost values vanish.
        for (int e = 0; e < E; ++e) {
            if (e - 1 >= 0) g.D(e, e - 1) = -ih;
            if (e < N) g.D(e, e) = ih;
        }
    } else {
        for (int e = 0; e < E; ++e) {
            g.D(e, e) = -ih;
            g.D(e, e + 1) = ih;
        }
    }

    g.G = Mat::Zero(n_species * E, n_species * N);
    for (int s = 0; s < n_species; ++s)
        g.G.block(s * E, s * N, E, N) = g.D;
    return g;
}

} // namespace qspde
