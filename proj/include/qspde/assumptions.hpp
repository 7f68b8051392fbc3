#pragma once

#include "errors.hpp"
#include "fractional.hpp"
#include "linalg.hpp"
#include "operators.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <vector>

namespace qspde {

enum class YNorm { L2, H1 };

struct AssumptionThresholds {
    double kappa_min = 0.0;
    double continuity_max = std::numeric_limits<double>::infinity();
    double resolvent_max = std::numeric_limits<double>::infinity();
    double lipschitz_max = std::numeric_limits<double>::infinity();
    double nu = 1.0;  // fixed exponent; constant-domain convention
};

struct AssumptionReport {
    double kappa_est = 0;       // coercivity of the form w.r.t. the gradient seminorm
    double continuity_M = 0;    // form bound against the discrete H1 norm
    double resolvent_M = 0;     // max (|lambda|+1) ||(lambda - A)^-1|| on the sector
    double lipschitz_L = 0;     // state-Lipschitz quotient of the resolvent map
    double nu = 1, delta = 0;   // time-regularity pair; delta from log-log regression
    bool sectorial_ok = true;   // spectrum strictly inside the open left half-plane
    double kappa_est_adj = 0, continuity_M_adj = 0, resolvent_M_adj = 0,
           lipschitz_L_adj = 0;
    bool passed_coercivity = false, passed_continuity = false,
         passed_resolvent = false, passed_lipschitz = false, passed_hoelder = false;
};

/// Default resolvent sample set: both rays at |arg lambda| = 3pi/4,
/// 16 log-spaced moduli per ray.
inline std::vector<std::complex<double>> sector_lambda_samples(
    double angle = 3.0 * std::numbers::pi / 4.0, int per_ray = 16,
    double r_lo = 1e-2, double r_hi = 1e4) {
    std::vector<std::complex<double>> out;
    out.reserve(2 * per_ray);
    for (int i = 0; i < per_ray; ++i) {
        const double r = std::exp(std::log(r_lo) +
                                  (std::log(r_hi) - std::log(r_lo)) * i / (per_ray - 1));
        out.emplace_back(r * std::cos(angle), r * std::sin(angle));
        out.emplace_back(r * std::cos(angle), -r * std::sin(angle));
    }
    return out;
}

namespace detail {

/// Smallest Rayleigh quotient of the (symmetrized) form matrix against the
/// gradient Gram, restricted to the complement of ker(G).
inline double coercivity_min(const Mat& form, const Mat& grad_gram) {
    Eigen::SelfAdjointEigenSolver<Mat> er(grad_gram);
    const double wmax = er.eigenvalues().maxCoeff();
    int keep = 0;
    for (int i = 0; i < er.eigenvalues().size(); ++i)
        if (er.eigenvalues()[i] > 1e-10 * wmax) ++keep;
    const Mat vr = er.eigenvectors().rightCols(keep);
    const Mat ts = vr.transpose() * (0.5 * (form + form.transpose())) * vr;
    const Mat rs = vr.transpose() * grad_gram * vr;
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(ts, rs, Eigen::EigenvaluesOnly);
    return ges.eigenvalues().minCoeff();
}

inline double max_real_eigenvalue(const Mat& a, double& scale) {
    Eigen::EigenSolver<Mat> es(a, false);
    double worst = -std::numeric_limits<double>::infinity();
    scale = 0.0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        worst = std::max(worst, es.eigenvalues()[i].real());
        scale = std::max(scale, std::abs(es.eigenvalues()[i]));
    }
    return worst;
}

inline double resolvent_bound(const Mat& a,
                              const std::vector<std::complex<double>>& lambdas) {
    const int m = static_cast<int>(a.rows());
    const Eigen::MatrixXcd ac = a.cast<std::complex<double>>();
    const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(m, m);
    double worst = 0.0;
    for (const auto& lam : lambdas) {
        const Eigen::MatrixXcd res = (lam * id - ac).partialPivLu().inverse();
        worst = std::max(worst, (std::abs(lam) + 1.0) * spectral_norm(res));
    }
    return worst;
}

} // namespace detail

/// Numerical audit of the sectoriality/coercivity/continuity/resolvent and
/// state-Lipschitz conditions over a list of frozen states, plus the
/// time-regularity exponent regressed along the list (read as equispaced
/// samples of a trajectory; the spacing scale only shifts the intercept).
/// Adjoint variants run on the transposed matrices.
inline AssumptionReport check_assumptions(const DiffusionModel& model,
                                          const std::vector<Vec>& states,
                                          const SpatialGrid& grid,
                                          const std::vector<std::complex<double>>& lambda_samples,
                                          YNorm y_norm = YNorm::H1,
                                          const AssumptionThresholds& thr = {}) {
    if (states.empty())
        throw ConfigError("check_assumptions: need at least one state");

    AssumptionReport rep;
    rep.nu = thr.nu;

    const int m = grid.dim();
    const Mat grad_gram = grid.h * (grid.G.transpose() * grid.G);
    const Mat h1_gram = grid.h * (Mat::Identity(m, m) + grid.G.transpose() * grid.G);
    Eigen::SelfAdjointEigenSolver<Mat> eh(h1_gram);
    const Mat h_inv_sqrt = eh.eigenvectors() *
                           eh.eigenvalues().array().pow(-0.5).matrix().asDiagonal() *
                           eh.eigenvectors().transpose();

    std::vector<Mat> ops;
    ops.reserve(states.size());
    for (const Vec& s : states)
        ops.push_back(assemble_operator(model, s, grid).A);

    rep.kappa_est = std::numeric_limits<double>::infinity();
    rep.kappa_est_adj = rep.kappa_est;
    for (const Mat& a : ops) {
        const Mat form = -grid.h * a;  // <-A w1, w2>_h as a matrix
        rep.kappa_est = std::min(rep.kappa_est, detail::coercivity_min(form, grad_gram));
        rep.kappa_est_adj = std::min(rep.kappa_est_adj,
                                     detail::coercivity_min(form.transpose(), grad_gram));
        rep.continuity_M = std::max(rep.continuity_M,
                                    spectral_norm(Mat(h_inv_sqrt * form * h_inv_sqrt)));
        rep.continuity_M_adj = std::max(
            rep.continuity_M_adj,
            spectral_norm(Mat(h_inv_sqrt * form.transpose() * h_inv_sqrt)));
        double scale = 0.0;
        const double max_re = detail::max_real_eigenvalue(a, scale);
        if (!(max_re <= -1e-9 * std::max(scale, 1.0))) rep.sectorial_ok = false;
        rep.resolvent_M = std::max(rep.resolvent_M,
                                   detail::resolvent_bound(a, lambda_samples));
        rep.resolvent_M_adj = std::max(rep.resolvent_M_adj,
                                       detail::resolvent_bound(a.transpose(), lambda_samples));
    }

    // state-Lipschitz quotient over consecutive state pairs (identical states skip)
    auto state_dist = [&](const Vec& u, const Vec& v) {
        return y_norm == YNorm::L2 ? grid.norm(u - v) : grid.norm_h1(u - v);
    };
    auto lip_quot = [&](const Mat& au, const Mat& av) {
        const Mat nu_pow = thr.nu == 1.0
                               ? Mat(-au)
                               : fractional_power_matrix(make_operator(au), thr.nu,
                                                         FracMethod::DunfordQuadrature);
        const Mat diff = au.partialPivLu().inverse() - av.partialPivLu().inverse();
        return spectral_norm(Mat(nu_pow * diff));
    };
    for (size_t i = 0; i + 1 < states.size(); ++i) {
        const double d = state_dist(states[i], states[i + 1]);
        if (d == 0.0) continue;
        rep.lipschitz_L = std::max(rep.lipschitz_L, lip_quot(ops[i + 1], ops[i]) / d);
        rep.lipschitz_L_adj = std::max(rep.lipschitz_L_adj,
                                       lip_quot(ops[i + 1].transpose(), ops[i].transpose()) / d);
    }

    // time-regularity exponent by log-log regression over all index pairs
    if (ops.size() >= 3) {
        std::vector<Mat> invs;
        invs.reserve(ops.size());
        for (const Mat& a : ops) invs.push_back(a.partialPivLu().inverse());
        std::vector<double> lx, ly;
        const double dt_proxy = 1.0 / (static_cast<double>(ops.size()) - 1);
        for (size_t i = 0; i < ops.size(); ++i)
            for (size_t j = i + 1; j < ops.size(); ++j) {
                const double val = spectral_norm(Mat(ops[j] * (invs[j] - invs[i])));
                if (val < 1e-300) continue;
                lx.push_back(std::log((j - i) * dt_proxy));
                ly.push_back(std::log(val));
            }
        if (lx.size() >= 2) rep.delta = regression_slope(lx, ly);
    }

    rep.passed_coercivity = rep.kappa_est > thr.kappa_min;
    rep.passed_continuity = rep.continuity_M <= thr.continuity_max;
    rep.passed_resolvent = rep.resolvent_M <= thr.resolvent_max;
    rep.passed_lipschitz = rep.lipschitz_L <= thr.lipschitz_max;
    rep.passed_hoelder = rep.nu + rep.delta > 1.0;
    return rep;
}

} // namespace qspde
