#pragma once

#include "errors.hpp"
#include "operators.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

namespace qspde {

enum class FracMethod { Spectral, DunfordQuadrature };

namespace detail {

/// Modulus range of spectrum(-A); rejects operators whose negated spectrum
/// touches the closed left half-plane (no sectorial calculus there).
inline std::pair<double, double> sectorial_bounds(const OperatorMatrix& op) {
    if (op.has_spectrum) {
        const double lo = -op.eig.maxCoeff();
        const double hi = -op.eig.minCoeff();
        if (!(lo > 0.0))
            throw std::domain_error("fractional power: operator is not sectorial "
                                    "(eigenvalue with nonnegative real part)");
        return {lo, hi};
    }
    Eigen::EigenSolver<Mat> es(-op.A);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        const std::complex<double> z = es.eigenvalues()[i];
        if (!(z.real() > 0.0))
            throw std::domain_error("fractional power: operator is not sectorial "
                                    "(eigenvalue with nonnegative real part)");
        lo = std::min(lo, std::abs(z));
        hi = std::max(hi, std::abs(z));
    }
    return {lo, hi};
}

/// Real-axis resolvent quadrature for S^a, a in (0,1):
/// S^a = sin(pi a)/pi * Int_0^inf t^(a-1) (tI + S)^{-1} S dt, substituted
/// t = e^y and truncated where the integrand falls below eps; the window is
/// sized so that plain trapezoid reaches the target tolerance.
inline Mat balakrishnan(const Mat& s, double a, double mu_min, double mu_max,
                        double eps, double dy) {
    const double lg = std::log(1.0 / eps);
    const double ylo = std::log(mu_min) - (lg / a + 2.0);
    const double yhi = std::log(mu_max) + (lg / (1.0 - a) + 2.0);
    const int n = static_cast<int>(std::ceil((yhi - ylo) / dy)) + 1;
    const double step = (yhi - ylo) / (n - 1);
    const Mat id = Mat::Identity(s.rows(), s.cols());
    Mat acc = Mat::Zero(s.rows(), s.cols());
    for (int i = 0; i < n; ++i) {
        const double y = ylo + i * step;
        const Mat r = (std::exp(y) * id + s).partialPivLu().solve(s);
        const double w = step * ((i == 0 || i == n - 1) ? 0.5 : 1.0);
        acc += (w * std::exp(a * y)) * r;
    }
    return (std::sin(std::numbers::pi * a) / std::numbers::pi) * acc;
}

} // namespace detail

/// Matrix of (-A)^alpha. Spectral: eigendecomposition (symmetric operators).
/// DunfordQuadrature: resolvent quadrature for the fractional part, extended
/// to alpha > 1 through (-A)^alpha = (-A)^n (-A)^(alpha-n) and to alpha < 0
/// through inversion.
inline Mat fractional_power_matrix(const OperatorMatrix& op, double alpha,
                                   FracMethod method = FracMethod::Spectral) {
    const int m = op.dim();
    if (alpha == 0.0) return Mat::Identity(m, m);
    if (alpha < 0.0)
        return fractional_power_matrix(op, -alpha, method).partialPivLu()
            .inverse();

    if (method == FracMethod::Spectral) {
        if (!op.symmetric)
            throw std::domain_error("fractional power: spectral method needs a "
                                    "symmetric operator");
        Vec mu;
        Mat q;
        if (op.has_spectrum) {
            mu = -op.eig;
            q = op.eigvec;
        } else {
            Eigen::SelfAdjointEigenSolver<Mat> es(-op.A);
            mu = es.eigenvalues();
            q = es.eigenvectors();
        }
        if (!(mu.minCoeff() > 0.0))
            throw std::domain_error("fractional power: operator is not sectorial "
                                    "(eigenvalue with nonnegative real part)");
        return q * mu.array().pow(alpha).matrix().asDiagonal() * q.transpose();
    }

    const auto [mu_min, mu_max] = detail::sectorial_bounds(op);
    const Mat s = -op.A;
    const int n = static_cast<int>(std::floor(alpha));
    const double frac = alpha - n;
    Mat acc = frac > 0.0 ? detail::balakrishnan(s, frac, mu_min, mu_max, 1e-8, 1.0)
                         : Mat::Identity(m, m);
    for (int i = 0; i < n; ++i) acc = s * acc;
    return acc;
}

/// As fractional_power_matrix, wrapped back into an OperatorMatrix.
inline OperatorMatrix fractional_power(const OperatorMatrix& op, double alpha,
                                       FracMethod method = FracMethod::Spectral,
                                       bool with_spectrum = false) {
    return make_operator(fractional_power_matrix(op, alpha, method), with_spectrum);
}

/// Log-uniform grid spanning [1e-3 mu_min, 1e3 mu_max] of the negated spectrum.
inline std::vector<double> default_rho_grid(const OperatorMatrix& op, int n_points = 200) {
    const auto [lo, hi] = detail::sectorial_bounds(op);
    std::vector<double> rho(n_points);
    const double a = std::log(1e-3 * lo), b = std::log(1e3 * hi);
    for (int i = 0; i < n_points; ++i)
        rho[i] = std::exp(a + (b - a) * i / (n_points - 1));
    return rho;
}

/// Discrete resolvent-growth norm sup_rho rho^alpha ||S (rho + S)^{-1} v||
/// with S = -A; monotone nondecreasing under grid refinement.
inline double dalpha_norm(const OperatorMatrix& op, const Vec& v, double alpha,
                          const std::vector<double>& rho_grid) {
    if (rho_grid.empty())
        throw ConfigError("dalpha_norm: empty rho grid");
    const Mat s = -op.A;
    const Mat id = Mat::Identity(op.dim(), op.dim());
    const Vec sv = s * v;
    double best = 0.0;
    for (const double rho : rho_grid) {
        const Vec w = (rho * id + s).partialPivLu().solve(sv);
        best = std::max(best, std::pow(rho, alpha) * w.norm());
    }
    return best;
}

} // namespace qspde
