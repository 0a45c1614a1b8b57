#pragma once

// Real-coefficient polynomial utilities: Horner evaluation and all roots via
// companion-matrix eigenvalues. Coefficients are stored highest degree first.

#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

#include "core.hpp"

namespace bilq::poly {

template <typename T>
[[nodiscard]] T horner(std::span<const double> coeffs, T x) {
    T acc{0};
    for (double c : coeffs) acc = acc * x + c;
    return acc;
}

[[nodiscard]] inline std::vector<double> derivative(std::span<const double> coeffs) {
    std::vector<double> out;
    const auto degree = coeffs.size() - 1;
    for (std::size_t i = 0; i + 1 < coeffs.size(); ++i) out.push_back(coeffs[i] * static_cast<double>(degree - i));
    return out;
}

/// sum_i |c_i| |x|^i; the natural scale for round-off in p(x).
[[nodiscard]] inline double magnitude_bound(std::span<const double> coeffs, double abs_x) {
    double acc = 0.0;
    for (double c : coeffs) acc = acc * abs_x + std::abs(c);
    return acc;
}

/// All complex roots of a polynomial with nonzero leading coefficient.
[[nodiscard]] inline std::vector<std::complex<double>> companion_roots(std::span<const double> coeffs) {
    if (coeffs.empty() || coeffs.front() == 0.0)
        throw std::invalid_argument("companion_roots: leading coefficient must be nonzero");
    const auto degree = static_cast<Eigen::Index>(coeffs.size() - 1);
    if (degree == 0) return {};
    Matrix companion = Matrix::Zero(degree, degree);
    for (Eigen::Index j = 0; j < degree; ++j) companion(0, j) = -coeffs[j + 1] / coeffs[0];
    for (Eigen::Index i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
    Eigen::EigenSolver<Matrix> es(companion, false);
    if (es.info() != Eigen::Success) throw std::runtime_error("companion_roots: eigenvalue solver failed");
    std::vector<std::complex<double>> roots;
    for (Eigen::Index i = 0; i < degree; ++i) roots.push_back(es.eigenvalues()(i));
    return roots;
}

/// A few Newton steps on a real root estimate; keeps the original if the
/// residual does not improve.
[[nodiscard]] inline double polish_real_root(std::span<const double> coeffs, double x, int iterations = 8) {
    const auto dcoeffs = derivative(coeffs);
    double best = x;
    double best_res = std::abs(horner(coeffs, x));
    for (int it = 0; it < iterations; ++it) {
        const double d = horner(std::span<const double>(dcoeffs), x);
        if (d == 0.0) break;
        x -= horner(coeffs, x) / d;
        const double res = std::abs(horner(coeffs, x));
        if (res < best_res) {
            best = x;
            best_res = res;
        }
        if (res == 0.0) break;
    }
    return best;
}

} // namespace bilq::poly
