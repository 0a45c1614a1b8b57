#pragma once

// Domain types for linear systems with bilinear (input-dependent) observations:
//
//   x_{t+1} = A x_t + B u_t + w_t
//   y_t     = (C_0 + sum_k (u_t)_k C_k) x_t + z_t
//
// plus the Gaussian noise / prior description and the quadratic cost weights.

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace bilq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Eigenvalues at or above this are treated as non-negative.
inline constexpr double kPsdTolerance = 1e-10;

// ============================================================================
// Small dense helpers
// ============================================================================

[[nodiscard]] inline Matrix symmetrize(const Matrix& s) { return 0.5 * (s + s.transpose()); }

[[nodiscard]] inline bool all_finite(const Matrix& m) { return m.allFinite(); }

[[nodiscard]] inline double min_eigenvalue(const Matrix& s) {
    if (s.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(s), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

[[nodiscard]] inline double max_eigenvalue(const Matrix& s) {
    if (s.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(s), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

/// Largest singular value.
[[nodiscard]] inline double spectral_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

[[nodiscard]] inline double spectral_radius(const Matrix& a) {
    Eigen::EigenSolver<Matrix> es(a, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

[[nodiscard]] inline bool is_symmetric(const Matrix& s, double rel_tol) {
    if (s.rows() != s.cols()) return false;
    const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
    return (s - s.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

// ============================================================================
// Domain types
// ============================================================================

/// Dynamics (A, B) and the affine observation family C(u) = C0 + sum_k u_k Ck.
struct BilinearSystem {
    Matrix a;               // n x n
    Matrix b;               // n x p
    Matrix c0;              // m x n
    std::vector<Matrix> ck; // p matrices, each m x n

    [[nodiscard]] int n() const { return static_cast<int>(a.rows()); }
    [[nodiscard]] int p() const { return static_cast<int>(b.cols()); }
    [[nodiscard]] int m() const { return static_cast<int>(c0.rows()); }

    /// True when every Ck is exactly zero (ordinary linear observations).
    [[nodiscard]] bool is_linear_observation() const {
        for (const auto& c : ck)
            if (!c.isZero(0.0)) return false;
        return true;
    }

    /// Copy with C1..Cp replaced by zeros.
    [[nodiscard]] BilinearSystem linearized() const {
        BilinearSystem out = *this;
        for (auto& c : out.ck) c.setZero();
        return out;
    }
};

struct NoiseSpec {
    Matrix sigma_w; // n x n, PSD
    Matrix sigma_z; // m x m, PD
    Vector x0_mean; // n
    Matrix sigma_0; // n x n, PD
};

struct CostSpec {
    Matrix q;   // n x n
    Matrix q_t; // n x n
    Matrix r;   // p x p
};

/// Predicted estimate x_{t|t-1} and its error covariance.
struct BeliefState {
    Vector mean;
    Matrix cov;
};

[[nodiscard]] inline BeliefState initial_belief(const NoiseSpec& noise) { return {noise.x0_mean, noise.sigma_0}; }

// ============================================================================
// Validation
// ============================================================================

struct ValidationReport {
    std::vector<std::string> violations;

    [[nodiscard]] bool ok() const { return violations.empty(); }

    [[nodiscard]] bool mentions(const std::string& needle) const {
        for (const auto& v : violations)
            if (v.find(needle) != std::string::npos) return true;
        return false;
    }
};

namespace detail {

inline void check_shape(ValidationReport& rep, const Matrix& m, Eigen::Index rows, Eigen::Index cols,
                        const std::string& name) {
    if (m.rows() != rows || m.cols() != cols) {
        rep.violations.push_back(name + " has shape " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                 ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
    } else if (!m.allFinite()) {
        rep.violations.push_back(name + " has non-finite entries");
    }
}

enum class Definiteness { psd, pd };

inline void check_spd(ValidationReport& rep, const Matrix& m, const std::string& name, Definiteness kind) {
    if (m.rows() != m.cols() || m.size() == 0 || !m.allFinite()) return;
    if (!is_symmetric(m, 1e-12)) {
        rep.violations.push_back(name + " not symmetric");
        return;
    }
    const double lo = min_eigenvalue(m);
    if (kind == Definiteness::pd && !(lo > 0.0)) rep.violations.push_back(name + " not positive definite");
    if (kind == Definiteness::psd && lo < -kPsdTolerance) rep.violations.push_back(name + " not positive semidefinite");
}

} // namespace detail

/// Report-style check of dimensions, finiteness and the Gaussian/cost
/// definiteness assumptions. Never throws.
[[nodiscard]] inline ValidationReport validate_system(const BilinearSystem& sys, const NoiseSpec& noise,
                                                      const CostSpec& cost) {
    ValidationReport rep;
    const auto n = sys.a.rows();
    const auto p = sys.b.cols();
    const auto m = sys.c0.rows();
    if (n == 0) rep.violations.push_back("a is empty");
    detail::check_shape(rep, sys.a, n, n, "a");
    detail::check_shape(rep, sys.b, n, p, "b");
    detail::check_shape(rep, sys.c0, m, n, "c0");
    if (static_cast<Eigen::Index>(sys.ck.size()) != p) {
        rep.violations.push_back("ck count mismatch: got " + std::to_string(sys.ck.size()) + ", expected p=" +
                                 std::to_string(p));
    }
    for (std::size_t k = 0; k < sys.ck.size(); ++k)
        detail::check_shape(rep, sys.ck[k], m, n, "ck[" + std::to_string(k) + "]");

    detail::check_shape(rep, noise.sigma_w, n, n, "sigma_w");
    detail::check_shape(rep, noise.sigma_z, m, m, "sigma_z");
    detail::check_shape(rep, noise.sigma_0, n, n, "sigma_0");
    if (noise.x0_mean.size() != n) rep.violations.push_back("x0_mean has wrong length");
    else if (!noise.x0_mean.allFinite()) rep.violations.push_back("x0_mean has non-finite entries");
    detail::check_spd(rep, noise.sigma_w, "sigma_w", detail::Definiteness::psd);
    detail::check_spd(rep, noise.sigma_z, "sigma_z", detail::Definiteness::pd);
    detail::check_spd(rep, noise.sigma_0, "sigma_0", detail::Definiteness::pd);

    detail::check_shape(rep, cost.q, n, n, "q");
    detail::check_shape(rep, cost.q_t, n, n, "q_t");
    detail::check_shape(rep, cost.r, p, p, "r");
    detail::check_spd(rep, cost.q, "q", detail::Definiteness::pd);
    detail::check_spd(rep, cost.q_t, "q_t", detail::Definiteness::pd);
    detail::check_spd(rep, cost.r, "r", detail::Definiteness::pd);
    return rep;
}

// ============================================================================
// Observation matrix
// ============================================================================

/// C(u) = C0 + sum_k u_k Ck, summed in ascending k.
[[nodiscard]] inline Matrix observation_matrix(const BilinearSystem& sys, const Vector& u) {
    if (u.size() != static_cast<Eigen::Index>(sys.ck.size()))
        throw std::invalid_argument("observation_matrix: input has length " + std::to_string(u.size()) +
                                    ", expected " + std::to_string(sys.ck.size()));
    Matrix c = sys.c0;
    for (std::size_t k = 0; k < sys.ck.size(); ++k) c += u(static_cast<Eigen::Index>(k)) * sys.ck[k];
    return c;
}

} // namespace bilq
