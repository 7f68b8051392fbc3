#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <vector>

namespace qspde {

/// Matrix exponential (scaling-and-squaring with diagonal Pade).
inline Eigen::MatrixXd expm(const Eigen::MatrixXd& a) { return a.exp(); }

/// Spectral norm (largest singular value) via the Gram matrix; accurate for
/// the top singular value and much cheaper than a full SVD at these sizes.
inline double spectral_norm(const Eigen::MatrixXd& a) {
    if (a.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.transpose() * a,
                                                      Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

inline double spectral_norm(const Eigen::MatrixXcd& a) {
    if (a.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a.adjoint() * a,
                                                       Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

/// Composite trapezoid of sampled values on a uniform mesh with spacing dt.
inline double trapezoid(const std::vector<double>& g, double dt) {
    const int k = static_cast<int>(g.size()) - 1;
    if (k <= 0) return 0.0;
    double acc = 0.5 * (g.front() + g.back());
    for (int i = 1; i < k; ++i) acc += g[i];
    return dt * acc;
}

inline Eigen::VectorXd trapezoid(const std::vector<Eigen::VectorXd>& g, double dt) {
    const int k = static_cast<int>(g.size()) - 1;
    if (k <= 0) return Eigen::VectorXd::Zero(g.empty() ? 0 : g.front().size());
    Eigen::VectorXd acc = 0.5 * (g.front() + g.back());
    for (int i = 1; i < k; ++i) acc += g[i];
    return dt * acc;
}

/// Least-squares slope of y against x (used by the regularity regressions).
inline double regression_slope(const std::vector<double>& x,
                               const std::vector<double>& y) {
    const int n = static_cast<int>(x.size());
    double mx = 0, my = 0;
    for (int i = 0; i < n; ++i) { mx += x[i]; my += y[i]; }
    mx /= n; my /= n;
    double sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    return sxy / sxx;
}

} // namespace qspde
