#pragma once

// Kalman filter for bilinear observations. The gain depends on the input
// through C(u), so so does the covariance recursion.
//
// Sign convention: the gain carries a leading minus,
//
//   L(u)      = -A S C(u)^T (C(u) S C(u)^T + Sz)^-1
//   x_{t+1|t} = A x + B u - L(u) (y - C(u) x)
//   S_{t+1|t} = A S A^T + L(u) C(u) S A^T + Sw

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "core.hpp"

namespace bilq {

/// Condition number above which the innovation covariance is rejected.
inline constexpr double kMaxInnovationCondition = 1e14;

struct KalmanStep {
    Matrix gain;       // n x m, L(u_t)
    Vector innovation; // y_t - C(u_t) x_{t|t-1}
    BeliefState next_belief;
};

[[nodiscard]] inline Matrix kalman_gain(const BeliefState& belief, const BilinearSystem& sys, const NoiseSpec& noise,
                                        const Vector& u) {
    const Matrix c = observation_matrix(sys, u);
    const Matrix s = symmetrize(c * belief.cov * c.transpose() + noise.sigma_z);
    Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > kMaxInnovationCondition)
        throw std::domain_error("kalman_gain: innovation covariance singular");
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) throw std::domain_error("kalman_gain: innovation covariance singular");
    // L = -A S C^T Sinv  <=>  L^T = -Sinv (C S A^T)
    const Matrix cross = c * belief.cov * sys.a.transpose(); // m x n
    return -llt.solve(cross).transpose();
}

[[nodiscard]] inline KalmanStep kf_step(const BeliefState& belief, const BilinearSystem& sys, const NoiseSpec& noise,
                                        const Vector& u, const Vector& y) {
    if (y.size() != sys.m()) throw std::invalid_argument("kf_step: output has wrong length");
    const Matrix c = observation_matrix(sys, u);
    KalmanStep step;
    step.gain = kalman_gain(belief, sys, noise, u);
    step.innovation = y - c * belief.mean;
    step.next_belief.mean = sys.a * belief.mean + sys.b * u - step.gain * step.innovation;
    step.next_belief.cov = symmetrize(sys.a * belief.cov * sys.a.transpose() +
                                      step.gain * c * belief.cov * sys.a.transpose() + noise.sigma_w);
    return step;
}

/// Covariance-only step; used where the mean is irrelevant.
[[nodiscard]] inline Matrix kf_covariance_step(const Matrix& cov, const BilinearSystem& sys, const NoiseSpec& noise,
                                               const Vector& u) {
    const Matrix c = observation_matrix(sys, u);
    const Matrix gain = kalman_gain(BeliefState{Vector::Zero(sys.n()), cov}, sys, noise, u);
    return symmetrize(sys.a * cov * sys.a.transpose() + gain * c * cov * sys.a.transpose() + noise.sigma_w);
}

/// Information (Woodbury) form of the covariance update,
///   A (S^-1 + C(u)^T Sz^-1 C(u))^-1 A^T + Sw.
/// Requires S strictly positive definite.
[[nodiscard]] inline Matrix cov_update_information_form(const Matrix& cov, const BilinearSystem& sys,
                                                        const NoiseSpec& noise, const Vector& u) {
    Eigen::LLT<Matrix> cov_llt(symmetrize(cov));
    if (cov_llt.info() != Eigen::Success || !(min_eigenvalue(cov) > 0.0))
        throw std::domain_error("cov_update_information_form: information form requires PD covariance");
    const auto n = cov.rows();
    const Matrix c = observation_matrix(sys, u);
    const Matrix cov_inv = cov_llt.solve(Matrix::Identity(n, n));
    Eigen::LLT<Matrix> z_llt(noise.sigma_z);
    const Matrix info = symmetrize(cov_inv + c.transpose() * z_llt.solve(c));
    Eigen::LLT<Matrix> info_llt(info);
    if (info_llt.info() != Eigen::Success)
        throw std::domain_error("cov_update_information_form: information matrix not PD");
    const Matrix posterior = info_llt.solve(Matrix::Identity(n, n));
    return symmetrize(sys.a * posterior * sys.a.transpose() + noise.sigma_w);
}

// ============================================================================
// Scalar grid Bayes oracle
// ============================================================================

struct GridSpec {
    int points = 4001;
    double span_sigmas = 8.0; // half-width of each step's grid in predictive std devs
};

struct GridPosterior {
    double mean;
    double variance;
};

namespace detail {

struct GridDensity {
    std::vector<double> x;
    std::vector<double> w; // normalized so sum(w) == 1 (point masses)
    double lo = 0.0;
    double step = 0.0;
};

inline GridDensity make_grid(double center, double sigma, const GridSpec& spec) {
    GridDensity g;
    g.lo = center - spec.span_sigmas * sigma;
    g.step = 2.0 * spec.span_sigmas * sigma / (spec.points - 1);
    g.x.resize(spec.points);
    g.w.assign(spec.points, 0.0);
    for (int i = 0; i < spec.points; ++i) g.x[i] = g.lo + g.step * i;
    return g;
}

inline void normalize(GridDensity& g) {
    double total = 0.0;
    for (double v : g.w) total += v;
    if (!(total > 0.0)) throw std::domain_error("grid_bayes_oracle: density vanished on grid");
    for (double& v : g.w) v /= total;
}

inline void check_truncation(const GridDensity& g) {
    if (g.w.front() + g.w.back() > 1e-6) throw std::domain_error("grid_bayes_oracle: grid truncation");
}

inline GridPosterior moments(const GridDensity& g) {
    double mean = 0.0;
    for (std::size_t i = 0; i < g.x.size(); ++i) mean += g.w[i] * g.x[i];
    double var = 0.0;
    for (std::size_t i = 0; i < g.x.size(); ++i) var += g.w[i] * (g.x[i] - mean) * (g.x[i] - mean);
    return {mean, var};
}

} // namespace detail

/// Brute-force posterior p(x_k | u_{0:k-1}, y_{0:k-1}) for a scalar system,
/// by discretizing the density and applying Bayes' rule and the transition
/// kernel directly. Each step's grid is centred on the oracle's own
/// predictive moments. Returns the moments of the final predictive density.
[[nodiscard]] inline GridPosterior grid_bayes_oracle(const BilinearSystem& sys, const NoiseSpec& noise,
                                                     std::span<const double> inputs, std::span<const double> outputs,
                                                     const GridSpec& spec = {}) {
    if (sys.n() != 1 || sys.m() != 1 || sys.p() != 1) throw std::invalid_argument("grid_bayes_oracle: scalar only");
    if (inputs.size() != outputs.size())
        throw std::invalid_argument("grid_bayes_oracle: inputs and outputs differ in length");
    if (spec.points < 3) throw std::invalid_argument("grid_bayes_oracle: too few grid points");
    const double a = sys.a(0, 0);
    const double b = sys.b(0, 0);
    const double sw = noise.sigma_w(0, 0);
    const double sz = noise.sigma_z(0, 0);
    if (!inputs.empty() && !(sw > 0.0)) throw std::invalid_argument("grid_bayes_oracle: requires sigma_w > 0");
    if (!(sz > 0.0)) throw std::invalid_argument("grid_bayes_oracle: requires sigma_z > 0");

    const double m0 = noise.x0_mean(0);
    const double v0 = noise.sigma_0(0, 0);
    auto g = detail::make_grid(m0, std::sqrt(v0), spec);
    for (std::size_t i = 0; i < g.x.size(); ++i) g.w[i] = std::exp(-0.5 * (g.x[i] - m0) * (g.x[i] - m0) / v0);
    detail::normalize(g);

    const double sw_sd = std::sqrt(sw);
    const double window = 12.0 * sw_sd;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        const double u = inputs[t];
        const double c = sys.c0(0, 0) + u * sys.ck[0](0, 0);
        for (std::size_t i = 0; i < g.x.size(); ++i) {
            const double r = outputs[t] - c * g.x[i];
            g.w[i] *= std::exp(-0.5 * r * r / sz);
        }
        detail::normalize(g);
        detail::check_truncation(g);
        const auto post = detail::moments(g);

        const double pred_mean = a * post.mean + b * u;
        const double pred_var = a * a * post.variance + sw;
        auto next = detail::make_grid(pred_mean, std::sqrt(pred_var), spec);
        // Source points whose image a*x + b*u lies within the kernel window of x'.
        for (std::size_t j = 0; j < next.x.size(); ++j) {
            const double target = next.x[j];
            std::size_t i_lo = 0;
            std::size_t i_hi = g.x.size();
            if (a != 0.0) {
                double x1 = (target - b * u - window) / a;
                double x2 = (target - b * u + window) / a;
                if (x1 > x2) std::swap(x1, x2);
                const double f1 = std::floor((x1 - g.lo) / g.step);
                const double f2 = std::ceil((x2 - g.lo) / g.step) + 1.0;
                const double last = static_cast<double>(g.x.size());
                i_lo = static_cast<std::size_t>(std::clamp(f1, 0.0, last));
                i_hi = static_cast<std::size_t>(std::clamp(f2, 0.0, last));
            }
            double acc = 0.0;
            for (std::size_t i = i_lo; i < i_hi; ++i) {
                const double d = target - (a * g.x[i] + b * u);
                acc += g.w[i] * std::exp(-0.5 * d * d / sw);
            }
            next.w[j] = acc;
        }
        detail::normalize(next);
        g = std::move(next);
    }
    detail::check_truncation(g);
    return detail::moments(g);
}

} // namespace bilq
