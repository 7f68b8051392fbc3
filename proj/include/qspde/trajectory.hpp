#pragma once

#include "grid.hpp"
#include "time_mesh.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace qspde {

enum class SolverTag { WeakGalerkin, PathwiseMild, LinearMild, ExactOracle };

/// Nodal states u(t_i) for i = 0..K on a fixed grid/mesh pair.
struct Trajectory {
    TimeMesh mesh;
    std::vector<Vec> states;  // K+1 entries, each of grid dimension
    SolverTag tag = SolverTag::PathwiseMild;
    uint64_t seed = 0;        // noise path seed that produced this trajectory
    int iterations_used = 0;  // fixed-point iterations (0 for direct solvers)
    std::string metadata;     // free-form solver provenance

    const Vec& at(int i) const { return states[i]; }
    const Vec& back() const { return states.back(); }

    /// Smallest nodal value over the whole trajectory (positivity monitor).
    double min_state() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& u : states) m = std::min(m, u.minCoeff());
        return m;
    }
};

/// sup_i ||u(t_i) - v(t_i)||_h for trajectories on the same mesh/grid.
inline double sup_distance(const Trajectory& a, const Trajectory& b,
                           const SpatialGrid& grid) {
    double d = 0;
    const int n = static_cast<int>(std::min(a.states.size(), b.states.size()));
    for (int i = 0; i < n; ++i) d = std::max(d, grid.norm(a.states[i] - b.states[i]));
    return d;
}

inline double sup_norm(const Trajectory& a, const SpatialGrid& grid) {
    double d = 0;
    for (const auto& u : a.states) d = std::max(d, grid.norm(u));
    return d;
}

} // namespace qspde
