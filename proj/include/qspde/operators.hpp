#pragma once

#include "errors.hpp"
#include "grid.hpp"
#include "linalg.hpp"
#include "model.hpp"

#include <cassert>
#include <cmath>
#include <string>

namespace qspde {

/// Discretized A_v at one frozen state: dense matrix with optional spectral
/// cache (symmetric instances only). Immutable after make_operator.
struct OperatorMatrix {
    Mat A;
    bool symmetric = false;
    bool has_spectrum = false;
    Vec eig;     // ascending eigenvalues of A (cache, symmetric only)
    Mat eigvec;  // orthonormal eigenvectors (columns)

    int dim() const { return static_cast<int>(A.rows()); }
};

/// Wrap a matrix; the spectral cache is computed here or never (solver hot
/// loops assemble thousands of operators, so nothing spectral runs eagerly).
inline OperatorMatrix make_operator(Mat a, bool with_spectrum = false) {
    OperatorMatrix op;
    const double scale = a.cwiseAbs().maxCoeff();
    op.symmetric = (a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(scale, 1.0);
    op.A = std::move(a);
    if (with_spectrum && op.symmetric) {
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (op.A + op.A.transpose()));
        op.has_spectrum = true;
        op.eig = es.eigenvalues();
        op.eigvec = es.eigenvectors();
    }
    return op;
}

/// Largest eigenvalue of the symmetric part (dissipativity probe).
inline double sym_part_max_eig(const OperatorMatrix& op) {
    if (op.has_spectrum) return op.eig.maxCoeff();
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (op.A + op.A.transpose()),
                                          Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

namespace detail {

/// Edge state: average of the two adjacent nodal states; under Dirichlet the
/// boundary edges average against the homogeneous boundary value.
inline void edge_state(const SpatialGrid& g, const Vec& u, int e, Vec& out) {
    const int n = g.n_species, N = g.N;
    for (int s = 0; s < n; ++s) {
        if (g.bc == Bc::Dirichlet) {
            const double ul = e > 0 ? u[s * N + e - 1] : 0.0;
            const double ur = e < N ? u[s * N + e] : 0.0;
            out[s] = 0.5 * (ul + ur);
        } else {
            out[s] = 0.5 * (u[s * N + e] + u[s * N + e + 1]);
        }
    }
}

/// Node indices and gradient weights of one edge row of D.
inline int edge_support(const SpatialGrid& g, int e, int idx[2], double wgt[2]) {
    const double ih = 1.0 / g.h;
    if (g.bc == Bc::Dirichlet) {
        int cnt = 0;
        if (e > 0) { idx[cnt] = e - 1; wgt[cnt++] = -ih; }
        if (e < g.N) { idx[cnt] = e; wgt[cnt++] = ih; }
        return cnt;
    }
    idx[0] = e; wgt[0] = -ih;
    idx[1] = e + 1; wgt[1] = ih;
    return 2;
}

inline bool block_positive_definite(const Mat& b) {
    const Mat s = 0.5 * (b + b.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(s, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() > 0.0;
}

} // namespace detail

/// Assemble the discrete quasilinear operator at a frozen state:
/// A = -(G^T W_B G) - Gamma (x) I, with B evaluated at edge-midpoint states.
/// The exact duality bilinear_form(v, w1, w2) = <-A_v w1, w2>_h holds by
/// construction.
inline OperatorMatrix assemble_operator(const DiffusionModel& model, const Vec& state,
                                        const SpatialGrid& grid, bool include_gamma = true,
                                        bool with_spectrum = false) {
    const int n = grid.n_species, N = grid.N, m = grid.dim();
    assert(model.n_species == n);
    if (state.size() != m)
        throw ConfigError("assemble_operator: state dimension mismatch");

    Mat a = Mat::Zero(m, m);
    Vec ue(n);
    int idx[2];
    double wgt[2];
    for (int e = 0; e < grid.edges(); ++e) {
        detail::edge_state(grid, state, e, ue);
        const Mat b = model.B(ue);
        if (!b.allFinite())
            throw AssemblyError("assemble_operator: non-finite diffusion block at edge " +
                                    std::to_string(e), e);
        if (model.demand_definite && !detail::block_positive_definite(b))
            throw AssemblyError("assemble_operator: indefinite diffusion block at edge " +
                                    std::to_string(e), e);
        const int cnt = detail::edge_support(grid, e, idx, wgt);
        // A -= B[s,s'] * D_e(i) D_e(j) on the coupled species blocks
        for (int s = 0; s < n; ++s)
            for (int sp = 0; sp < n; ++sp)
                for (int i = 0; i < cnt; ++i)
                    for (int j = 0; j < cnt; ++j)
                        a(s * N + idx[i], sp * N + idx[j]) -= b(s, sp) * wgt[i] * wgt[j];
    }
    if (include_gamma)
        for (int s = 0; s < n; ++s)
            for (int j = 0; j < N; ++j) a(s * N + j, s * N + j) -= model.gamma[s];
    return make_operator(std::move(a), with_spectrum);
}

/// The bilinear form a(v; w1, w2) = <B(v) grad w1, grad w2>_h + <Gamma w1, w2>_h,
/// evaluated edge-wise with the same midpoint states as assemble_operator.
inline double bilinear_form(const DiffusionModel& model, const Vec& v, const Vec& w1,
                            const Vec& w2, const SpatialGrid& grid) {
    const int n = grid.n_species, N = grid.N, m = grid.dim();
    if (v.size() != m || w1.size() != m || w2.size() != m)
        throw ConfigError("bilinear_form: field dimension mismatch");
    const Vec g1 = grid.G * w1;
    const Vec g2 = grid.G * w2;
    const int E = grid.edges();
    Vec ue(n);
    double acc = 0.0;
    for (int e = 0; e < E; ++e) {
        detail::edge_state(grid, v, e, ue);
        const Mat b = model.B(ue);
        for (int s = 0; s < n; ++s)
            for (int sp = 0; sp < n; ++sp)
                acc += b(s, sp) * g1[sp * E + e] * g2[s * E + e];
    }
    for (int s = 0; s < n; ++s)
        for (int j = 0; j < N; ++j)
            acc += model.gamma[s] * w1[s * N + j] * w2[s * N + j];
    return grid.h * acc;
}

} // namespace qspde
