#pragma once

#include <stdexcept>

namespace qspde {

/// Uniform time mesh t_i = t0 + i*dt, i = 0..K.
struct TimeMesh {
    double t0 = 0.0;
    double T = 1.0;
    int K = 1;

    TimeMesh() = default;
    TimeMesh(double t0_, double T_, int K_) : t0(t0_), T(T_), K(K_) {
        if (!(T > t0) || K < 1)
            throw std::invalid_argument("time mesh: need T > t0 and K >= 1");
    }

    double dt() const { return (T - t0) / K; }
    double node(int i) const { return t0 + i * dt(); }
};

} // namespace qspde
