#pragma once

// Input-dependent observability.
//
// For a window of inputs u_l .. u_{l+n-1} the Gramian is
//   O_l = sum_k (A^k)' C(u_{l+k})' C(u_{l+k}) A^k.
// Splitting C0 = C0perp + (part in span{C1..Cp}) gives O = O1 + O2 + O3 with
// O1 the time-invariant Gramian of (A, C0perp); observability of that pair is
// sufficient for a bounded filter covariance under any input sequence.

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "core.hpp"
#include "kalman.hpp"
#include "rng.hpp"

namespace bilq {

inline constexpr double kDefaultObservabilityDelta = 1e-8;

struct GramianReport {
    Matrix gramian;
    double min_eigenvalue = 0.0;
    double delta = kDefaultObservabilityDelta;
    bool uniformly_observable = false;
};

namespace detail {

/// sum_k (A^k)' M_k' M_k A^k for the given per-step observation matrices.
inline Matrix observability_sum(const Matrix& a, std::span<const Matrix> observations) {
    const auto n = a.rows();
    Matrix out = Matrix::Zero(n, n);
    Matrix ak = Matrix::Identity(n, n);
    for (const auto& c : observations) {
        const Matrix cak = c * ak;
        out += cak.transpose() * cak;
        ak = a * ak;
    }
    return symmetrize(out);
}

inline GramianReport make_report(Matrix g, double delta) {
    GramianReport rep;
    rep.min_eigenvalue = min_eigenvalue(g);
    rep.gramian = std::move(g);
    rep.delta = delta;
    rep.uniformly_observable = rep.min_eigenvalue > delta;
    return rep;
}

} // namespace detail

/// Gramian over the first n inputs of `inputs` (the window starting at l).
[[nodiscard]] inline GramianReport gramian(const BilinearSystem& sys, std::span<const Vector> inputs,
                                           double delta = kDefaultObservabilityDelta) {
    const auto n = static_cast<std::size_t>(sys.n());
    if (inputs.size() < n)
        throw std::invalid_argument("gramian: need at least n = " + std::to_string(n) + " inputs, got " +
                                    std::to_string(inputs.size()));
    std::vector<Matrix> cs;
    for (std::size_t k = 0; k < n; ++k) cs.push_back(observation_matrix(sys, inputs[k]));
    return detail::make_report(detail::observability_sum(sys.a, cs), delta);
}

/// Minimum Gramian eigenvalue for every full window l = 0 .. len - n.
[[nodiscard]] inline std::vector<double> gramian_min_eigenvalues(const BilinearSystem& sys,
                                                                 std::span<const Vector> inputs) {
    std::vector<double> out;
    const auto n = static_cast<std::size_t>(sys.n());
    for (std::size_t l = 0; l + n <= inputs.size(); ++l) out.push_back(gramian(sys, inputs.subspan(l)).min_eigenvalue);
    return out;
}

/// Frobenius-orthogonal projection of C0 away from span{C1..Cp}, via modified
/// Gram-Schmidt. Candidates whose residual norm falls below 1e-10 times the
/// largest candidate norm are dropped from the basis.
[[nodiscard]] inline Matrix orthogonal_complement_c0(const BilinearSystem& sys) {
    double largest = 0.0;
    for (const auto& c : sys.ck) largest = std::max(largest, c.norm());
    std::vector<Matrix> basis;
    for (const auto& c : sys.ck) {
        Matrix v = c;
        for (const auto& e : basis) v -= (e.cwiseProduct(v).sum()) * e;
        const double norm = v.norm();
        if (norm > 1e-10 * largest && norm > 0.0) basis.push_back(v / norm);
    }
    Matrix out = sys.c0;
    for (const auto& e : basis) out -= (e.cwiseProduct(out).sum()) * e;
    return out;
}

struct GramianDecomposition {
    Matrix o1; // (A, C0perp) part, input independent
    Matrix o2; // cross terms
    Matrix o3; // in-span part, PSD
};

/// O = O1 + O2 + O3 over the first n inputs.
[[nodiscard]] inline GramianDecomposition gramian_decomposition(const BilinearSystem& sys,
                                                                std::span<const Vector> inputs) {
    const auto n = sys.n();
    if (inputs.size() < static_cast<std::size_t>(n)) throw std::invalid_argument("gramian_decomposition: too few inputs");
    const Matrix perp = orthogonal_complement_c0(sys);
    GramianDecomposition d{Matrix::Zero(n, n), Matrix::Zero(n, n), Matrix::Zero(n, n)};
    Matrix ak = Matrix::Identity(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Matrix bar = observation_matrix(sys, inputs[static_cast<std::size_t>(i)]) - perp;
        const Matrix p_ak = perp * ak;
        const Matrix b_ak = bar * ak;
        d.o1 += p_ak.transpose() * p_ak;
        d.o2 += p_ak.transpose() * b_ak + b_ak.transpose() * p_ak;
        d.o3 += b_ak.transpose() * b_ak;
        ak = sys.a * ak;
    }
    return d;
}

struct Proposition1Report {
    bool holds = false;
    double min_eigenvalue = 0.0; // of O1
    Matrix c0_perp;
    Matrix o1;
    // Filled only when an input window was supplied.
    double o1_norm = 0.0;
    double o2_norm = 0.0;
    double o3_norm = 0.0;
    double gramian_min_eigenvalue = 0.0;
};

/// Observability of (A, C0perp): min eig(O1) > delta. With an input window
/// the O1/O2/O3 split of that window's Gramian is reported as well.
[[nodiscard]] inline Proposition1Report check_proposition1(const BilinearSystem& sys,
                                                           std::span<const Vector> inputs = {},
                                                           double delta = kDefaultObservabilityDelta) {
    Proposition1Report rep;
    rep.c0_perp = orthogonal_complement_c0(sys);
    std::vector<Matrix> cs(static_cast<std::size_t>(sys.n()), rep.c0_perp);
    rep.o1 = detail::observability_sum(sys.a, cs);
    rep.min_eigenvalue = min_eigenvalue(rep.o1);
    rep.holds = rep.min_eigenvalue > delta;
    if (inputs.size() >= static_cast<std::size_t>(sys.n())) {
        const auto d = gramian_decomposition(sys, inputs);
        rep.o1_norm = spectral_norm(d.o1);
        rep.o2_norm = spectral_norm(d.o2);
        rep.o3_norm = spectral_norm(d.o3);
        rep.gramian_min_eigenvalue = gramian(sys, inputs, delta).min_eigenvalue;
    }
    return rep;
}

// ============================================================================
// Empirical covariance boundedness
// ============================================================================

/// Input as a function of stage and current belief.
using BeliefPolicy = std::function<Vector(int, const BeliefState&)>;

struct BoundednessReport {
    std::vector<double> spectral_norms; // ||S_{t|t-1}||, t = 0..horizon
    std::vector<double> traces;
    std::vector<Vector> inputs;         // u_0 .. u_{horizon-1}
    double max_norm = 0.0;
    double max_trace = 0.0;
    bool exceeded = false;              // max_norm > threshold

    /// max ||S_t|| over t in [first, last].
    [[nodiscard]] double max_norm_between(int first, int last) const {
        double m = 0.0;
        for (int t = std::max(first, 0); t <= last && t < static_cast<int>(spectral_norms.size()); ++t)
            m = std::max(m, spectral_norms[static_cast<std::size_t>(t)]);
        return m;
    }
};

/// Runs the filter along one simulated trajectory under `policy` and tracks
/// the size of the predicted covariance. Finite-horizon evidence only.
[[nodiscard]] inline BoundednessReport covariance_boundedness_probe(const BilinearSystem& sys, const NoiseSpec& noise,
                                                                    const BeliefPolicy& policy, int horizon,
                                                                    double threshold, RngStream stream) {
    if (horizon < sys.n()) throw std::invalid_argument("covariance_boundedness_probe: horizon must be >= n");
    BoundednessReport rep;
    const Matrix w_factor = gaussian_factor(noise.sigma_w);
    const Matrix z_factor = gaussian_factor(noise.sigma_z);
    Vector x = sample_gaussian(stream, noise.x0_mean, noise.sigma_0);
    BeliefState belief = initial_belief(noise);
    auto record = [&](const BeliefState& b) {
        const double nrm = max_eigenvalue(b.cov);
        rep.spectral_norms.push_back(nrm);
        rep.traces.push_back(b.cov.trace());
        rep.max_norm = std::max(rep.max_norm, nrm);
        rep.max_trace = std::max(rep.max_trace, b.cov.trace());
    };
    record(belief);
    for (int t = 0; t < horizon; ++t) {
        const Vector u = policy(t, belief);
        rep.inputs.push_back(u);
        const Vector w = sample_with_factor(stream, Vector::Zero(sys.n()), w_factor);
        const Vector z = sample_with_factor(stream, Vector::Zero(sys.m()), z_factor);
        const Vector y = observation_matrix(sys, u) * x + z;
        belief = kf_step(belief, sys, noise, u, y).next_belief;
        x = sys.a * x + sys.b * u + w;
        record(belief);
    }
    rep.exceeded = rep.max_norm > threshold;
    return rep;
}

} // namespace bilq
