#pragma once

// Canned configurations: the scalar two-stage example, the double integrator
// with a position sensor whose gain scales with the input, and random
// systems whose C0 lies in the orthogonal complement of span{C1..Cp}.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "control.hpp"
#include "core.hpp"
#include "io.hpp"
#include "observability.hpp"
#include "rng.hpp"
#include "sim.hpp"

namespace bilq::experiments {

namespace detail {

inline Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

} // namespace detail

// ----------------------------------------------------------------------------
// Scalar example
// ----------------------------------------------------------------------------

/// A = 0.9, B = 1, Q = Q_T = R = 1, x0 ~ N(0.1, 2), Sw = 0.01, Sz = 0.09, T = 2.
[[nodiscard]] inline ExperimentConfig scalar_config(double c0 = 0.0, double c1 = 0.0) {
    ExperimentConfig cfg;
    cfg.sys.a = detail::scalar(0.9);
    cfg.sys.b = detail::scalar(1.0);
    cfg.sys.c0 = detail::scalar(c0);
    cfg.sys.ck = {detail::scalar(c1)};
    cfg.noise.sigma_w = detail::scalar(0.01);
    cfg.noise.sigma_z = detail::scalar(0.09);
    cfg.noise.x0_mean = Vector::Constant(1, 0.1);
    cfg.noise.sigma_0 = detail::scalar(2.0);
    cfg.cost.q = detail::scalar(1.0);
    cfg.cost.q_t = detail::scalar(1.0);
    cfg.cost.r = detail::scalar(1.0);
    cfg.horizon = 2;
    return cfg;
}

/// Gap parameters of the scalar example with C1 = alpha and the penalty peak
/// placed at u_LQG + offset.
[[nodiscard]] inline ScalarGapParams scalar_landscape_params(double offset) {
    const auto cfg = scalar_config();
    auto sp = scalar_gap_params(cfg.sys, cfg.noise, cfg.cost, cfg.noise.sigma_0(0, 0));
    sp.c1 = sp.alpha;
    return with_peak_offset(sp, offset);
}

// ----------------------------------------------------------------------------
// Double integrator
// ----------------------------------------------------------------------------

enum class ObsModel { perfect, linear, bilinear };

[[nodiscard]] inline std::string_view to_string(ObsModel m) {
    switch (m) {
    case ObsModel::perfect: return "perfect";
    case ObsModel::linear: return "linear";
    case ObsModel::bilinear: return "bilinear";
    }
    return "unknown";
}

/// h = 0.3 double integrator, Q = Q_T = I, R = 1000, Sw = 0.01 I, Sz = 0.01,
/// x0 ~ N(0, I), T = 100. The position sensor is c1 [1 0]; in the bilinear
/// model its gain is multiplied by u (C0 = 0, C1 = c1 [1 0]), in the linear
/// and perfect models it is constant (C0 = c1 [1 0], C1 = 0).
[[nodiscard]] inline ExperimentConfig double_integrator_config(ObsModel model, double c1 = 1.0) {
    constexpr double h = 0.3;
    ExperimentConfig cfg;
    cfg.sys.a = Matrix{{1.0, h}, {0.0, 1.0}};
    cfg.sys.b = Matrix{{0.0}, {h}};
    const Matrix sensor = Matrix{{c1, 0.0}};
    if (model == ObsModel::bilinear) {
        cfg.sys.c0 = Matrix::Zero(1, 2);
        cfg.sys.ck = {sensor};
    } else {
        cfg.sys.c0 = sensor;
        cfg.sys.ck = {Matrix::Zero(1, 2)};
    }
    cfg.noise.sigma_w = 0.01 * Matrix::Identity(2, 2);
    cfg.noise.sigma_z = detail::scalar(0.01);
    cfg.noise.x0_mean = Vector::Zero(2);
    cfg.noise.sigma_0 = Matrix::Identity(2, 2);
    cfg.cost.q = Matrix::Identity(2, 2);
    cfg.cost.q_t = Matrix::Identity(2, 2);
    cfg.cost.r = detail::scalar(1000.0);
    cfg.horizon = 100;
    return cfg;
}

// ----------------------------------------------------------------------------
// Orthogonal observations
// ----------------------------------------------------------------------------

struct OrthogonalInstance {
    ExperimentConfig config;
    Proposition1Report prop1;
    int c0_attempts = 0;
};

inline constexpr std::uint64_t kOrthogonalStream = 0x0A7B0C0DULL;

/// n = 6, m = p = 3, A with iid N(0,1) entries scaled to spectral radius 1.1,
/// B ~ N(0, 1/n), Ck ~ N(0, 1/m). A, B and the Ck depend only on the seed.
/// C0 is a random draw projected onto the orthogonal complement of span{Ck}
/// and scaled to unit Frobenius norm; variant 'a' and 'b' use different
/// draws. Redraws C0 up to 10 times if (A, C0) is not observable.
[[nodiscard]] inline OrthogonalInstance orthogonal_instance(std::uint64_t seed, char variant) {
    if (variant != 'a' && variant != 'b') throw std::invalid_argument("orthogonal: variant must be 'a' or 'b'");
    constexpr int n = 6;
    constexpr int m = 3;
    constexpr int p = 3;
    RngStream rng(seed, kOrthogonalStream);
    auto draw = [&](int rows, int cols, double var) {
        Matrix out(rows, cols);
        const double sd = std::sqrt(var);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) out(r, c) = sd * rng.standard_normal();
        return out;
    };
    OrthogonalInstance inst;
    auto& cfg = inst.config;
    Matrix a = draw(n, n, 1.0);
    a *= 1.1 / spectral_radius(a);
    cfg.sys.a = a;
    cfg.sys.b = draw(n, p, 1.0 / n);
    for (int k = 0; k < p; ++k) cfg.sys.ck.push_back(draw(m, n, 1.0 / m));

    RngStream c0_rng = rng.substream(variant == 'a' ? 1 : 2);
    for (int attempt = 1; attempt <= 10; ++attempt) {
        Matrix raw(m, n);
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < n; ++c) raw(r, c) = c0_rng.standard_normal() / std::sqrt(double(m));
        BilinearSystem trial = cfg.sys;
        trial.c0 = raw;
        Matrix perp = orthogonal_complement_c0(trial);
        const double norm = perp.norm();
        if (norm > 0.0) perp /= norm;
        trial.c0 = perp;
        auto report = check_proposition1(trial);
        if (report.holds) {
            cfg.sys.c0 = perp;
            inst.prop1 = std::move(report);
            inst.c0_attempts = attempt;
            break;
        }
    }
    if (inst.c0_attempts == 0) throw std::runtime_error("orthogonal: (A, C0perp) unobservable after 10 draws");

    cfg.noise.sigma_w = 0.01 * Matrix::Identity(n, n);
    cfg.noise.sigma_z = 0.01 * Matrix::Identity(m, m);
    cfg.noise.x0_mean = Vector::Zero(n);
    cfg.noise.sigma_0 = Matrix::Identity(n, n);
    cfg.cost.q = Matrix::Identity(n, n);
    cfg.cost.q_t = Matrix::Identity(n, n);
    cfg.cost.r = Matrix::Identity(p, p);
    cfg.horizon = 100;
    cfg.seed = seed;
    return inst;
}

// ----------------------------------------------------------------------------
// Observation-model comparison
// ----------------------------------------------------------------------------

struct ModelComparison {
    MonteCarloResult perfect;
    MonteCarloResult linear;
    MonteCarloResult bilinear;
};

/// The same separation controller under perfect, linear and bilinear
/// observations, with paired noise (identical seeds). The initial estimate is
/// drawn from the prior.
[[nodiscard]] inline ModelComparison compare_observation_models(const ExperimentConfig& linear_cfg,
                                                                const ExperimentConfig& bilinear_cfg, int runs,
                                                                std::uint64_t seed, int threads) {
    const PolicyConfig lqr{PolicyKind::perfect_state_lqr, InitEstimate::sampled_from_prior};
    const PolicyConfig lqg{PolicyKind::separation_lqg, InitEstimate::sampled_from_prior};
    const int T = bilinear_cfg.horizon;
    ModelComparison out;
    out.perfect = monte_carlo(linear_cfg.sys, linear_cfg.noise, linear_cfg.cost, lqr, T, runs, seed, threads);
    out.linear = monte_carlo(linear_cfg.sys, linear_cfg.noise, linear_cfg.cost, lqg, T, runs, seed, threads);
    out.bilinear = monte_carlo(bilinear_cfg.sys, bilinear_cfg.noise, bilinear_cfg.cost, lqg, T, runs, seed, threads);
    return out;
}

/// Linear-observation counterpart: same C0, C1..Cp zeroed.
[[nodiscard]] inline ExperimentConfig linear_counterpart(const ExperimentConfig& cfg) {
    ExperimentConfig out = cfg;
    out.sys = cfg.sys.linearized();
    return out;
}

} // namespace bilq::experiments
