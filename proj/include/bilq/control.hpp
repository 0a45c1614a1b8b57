#pragma once

// Controller synthesis for bilinear-observation LQG problems.
//
//  * finite-horizon Riccati recursion and the certainty-equivalent LQG policy;
//  * the stage T-2 cost-to-go f(u) = u'Au + 2 x'B'u + tr(G (S^-1 + C(u)' Sz^-1 C(u))^-1),
//    whose last term couples the input to the next estimation error;
//  * the scalar two-stage problem, where f reduces to
//      f0(u) = alpha u^2 + 2 beta x0 u + gamma / ((C0 + C1 u)^2 + kappa)
//    and its critical points are roots of a quintic.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "core.hpp"
#include "poly.hpp"

namespace bilq {

// ============================================================================
// Riccati recursion and LQG policy
// ============================================================================

/// Tables indexed by stage: k(t) for t in [0, T], p(t) and gain(t) for t in [0, T).
struct RiccatiTables {
    std::vector<Matrix> k_seq;    // K_0 .. K_T
    std::vector<Matrix> p_seq;    // P_0 .. P_{T-1}
    std::vector<Matrix> gain_seq; // L_0 .. L_{T-1}

    [[nodiscard]] int horizon() const { return static_cast<int>(gain_seq.size()); }
    [[nodiscard]] const Matrix& k(int t) const { return k_seq.at(static_cast<std::size_t>(t)); }
    [[nodiscard]] const Matrix& p(int t) const { return p_seq.at(static_cast<std::size_t>(t)); }
    [[nodiscard]] const Matrix& gain(int t) const { return gain_seq.at(static_cast<std::size_t>(t)); }
};

[[nodiscard]] inline RiccatiTables riccati_recursion(const CostSpec& cost, const BilinearSystem& sys, int horizon) {
    if (horizon < 1) throw std::invalid_argument("riccati_recursion: horizon must be >= 1");
    const auto T = static_cast<std::size_t>(horizon);
    RiccatiTables tables;
    tables.k_seq.resize(T + 1);
    tables.p_seq.resize(T);
    tables.gain_seq.resize(T);
    tables.k_seq[T] = cost.q_t;
    const Matrix& a = sys.a;
    const Matrix& b = sys.b;
    for (std::size_t t = T; t-- > 0;) {
        const Matrix& k_next = tables.k_seq[t + 1];
        const Matrix m = symmetrize(b.transpose() * k_next * b + cost.r);
        const Matrix bka = b.transpose() * k_next * a; // p x n
        Eigen::LLT<Matrix> llt(m);
        const Matrix m_inv_bka = llt.solve(bka);
        tables.p_seq[t] = symmetrize(bka.transpose() * m_inv_bka);
        tables.k_seq[t] = symmetrize(a.transpose() * k_next * a - tables.p_seq[t] + cost.q);
        tables.gain_seq[t] = -m_inv_bka;
    }
    return tables;
}

/// u_t = L_t x_{t|t-1}
[[nodiscard]] inline Vector lqg_policy(const RiccatiTables& tables, int t, const Vector& x_hat) {
    if (t < 0 || t >= tables.horizon())
        throw std::out_of_range("lqg_policy: stage " + std::to_string(t) + " outside [0, " +
                                std::to_string(tables.horizon()) + ")");
    return tables.gain(t) * x_hat;
}

// ============================================================================
// Stage T-2 cost-to-go (vector case)
// ============================================================================

/// Coefficients of the stage cost-to-go. u-independent terms are dropped.
struct BellmanObjectiveParams {
    Matrix cal_a;     // p x p, B'K B + R
    Matrix cal_b;     // p x n, B'K A
    Matrix cal_g;     // n x n, A'P A
    Matrix prior_cov; // n x n
    Vector x_hat;     // n
    BilinearSystem sys;
    NoiseSpec noise;
    // Cached inverses, filled by make_bellman_params().
    Matrix prior_info;
    Matrix sigma_z_inv;

    /// Fills the cached inverses; call after editing prior_cov or noise.
    void refresh() {
        Eigen::LLT<Matrix> llt(symmetrize(prior_cov));
        if (llt.info() != Eigen::Success)
            throw std::domain_error("BellmanObjectiveParams: prior covariance must be positive definite");
        prior_info = llt.solve(Matrix::Identity(prior_cov.rows(), prior_cov.cols()));
        sigma_z_inv = noise.sigma_z.llt().solve(Matrix::Identity(noise.sigma_z.rows(), noise.sigma_z.cols()));
    }
};

/// Objective for the input chosen at `stage`, which uses K_{stage+1} and
/// P_{stage+1}. stage = T-2 gives the exact dynamic-programming objective.
[[nodiscard]] inline BellmanObjectiveParams make_bellman_params(const BilinearSystem& sys, const NoiseSpec& noise,
                                                                const CostSpec& cost, const RiccatiTables& tables,
                                                                int stage, const BeliefState& belief) {
    if (stage < 0 || stage + 1 >= tables.horizon())
        throw std::out_of_range("make_bellman_params: stage must satisfy 0 <= stage <= T-2");
    const Matrix& k = tables.k(stage + 1);
    const Matrix& p = tables.p(stage + 1);
    BellmanObjectiveParams bp;
    bp.cal_a = symmetrize(sys.b.transpose() * k * sys.b + cost.r);
    bp.cal_b = sys.b.transpose() * k * sys.a;
    bp.cal_g = symmetrize(sys.a.transpose() * p * sys.a);
    bp.prior_cov = belief.cov;
    bp.x_hat = belief.mean;
    bp.sys = sys;
    bp.noise = noise;
    bp.refresh();
    return bp;
}

struct BellmanValue {
    double f_lqg;
    double g;
    [[nodiscard]] double total() const { return f_lqg + g; }
};

[[nodiscard]] inline BellmanValue bellman_objective_parts(const BellmanObjectiveParams& bp, const Vector& u) {
    const Matrix c = observation_matrix(bp.sys, u);
    const double f_lqg = u.dot(bp.cal_a * u) + 2.0 * bp.x_hat.dot(bp.cal_b.transpose() * u);
    const Matrix info = symmetrize(bp.prior_info + c.transpose() * bp.sigma_z_inv * c);
    Eigen::LLT<Matrix> llt(info);
    if (llt.info() != Eigen::Success) throw std::logic_error("bellman_objective_Tm2: information matrix singular");
    const double g = llt.solve(bp.cal_g).trace(); // tr(info^-1 G) == tr(G info^-1)
    return {f_lqg, g};
}

[[nodiscard]] inline double bellman_objective_Tm2(const BellmanObjectiveParams& bp, const Vector& u) {
    return bellman_objective_parts(bp, u).total();
}

/// -cal_a^-1 cal_b x_hat
[[nodiscard]] inline Vector bellman_lqg_action(const BellmanObjectiveParams& bp) {
    return -bp.cal_a.llt().solve(bp.cal_b * bp.x_hat);
}

struct SearchBox {
    int points_per_axis = 51;
    double span_factor = 3.0;    // half-width = span_factor * |u_LQG| ...
    double min_half_width = 1.0; // ... but never below this
    double tolerance = 1e-8;
    int max_sweeps = 200;
};

struct BellmanMinimum {
    Vector u_star;
    double f_star;
};

namespace detail {

/// Golden-section minimization of a 1-D function on [lo, hi].
template <typename F>
double golden_section(F&& f, double lo, double hi, double tol) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = f(x1);
    double f2 = f(x2);
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

/// Grid search over a box centred at the LQG action, then coordinatewise
/// golden-section refinement. Local guarantee only: the objective is
/// nonconvex in general.
[[nodiscard]] inline BellmanMinimum bellman_minimize_Tm2(const BellmanObjectiveParams& bp,
                                                         const SearchBox& box = {}) {
    const auto p = bp.cal_a.rows();
    if (p < 1 || p > 3) throw std::invalid_argument("bellman_minimize_Tm2: requires 1 <= p <= 3");
    if (box.points_per_axis < 2) throw std::invalid_argument("bellman_minimize_Tm2: need >= 2 points per axis");
    const Vector center = bellman_lqg_action(bp);
    const double half = std::max(box.span_factor * center.norm(), box.min_half_width);
    const double spacing = 2.0 * half / (box.points_per_axis - 1);

    Vector best = center;
    double best_f = bellman_objective_Tm2(bp, center);
    std::vector<int> idx(static_cast<std::size_t>(p), 0);
    Vector u(p);
    while (true) {
        for (Eigen::Index i = 0; i < p; ++i) u(i) = center(i) - half + spacing * idx[static_cast<std::size_t>(i)];
        const double f = bellman_objective_Tm2(bp, u);
        if (f < best_f) {
            best_f = f;
            best = u;
        }
        std::size_t d = 0;
        while (d < idx.size() && ++idx[d] == box.points_per_axis) idx[d++] = 0;
        if (d == idx.size()) break;
    }

    for (int sweep = 0; sweep < box.max_sweeps; ++sweep) {
        double max_move = 0.0;
        for (Eigen::Index i = 0; i < p; ++i) {
            Vector trial = best;
            auto along = [&](double v) {
                trial(i) = v;
                return bellman_objective_Tm2(bp, trial);
            };
            const double v = detail::golden_section(along, best(i) - spacing, best(i) + spacing, 1e-11);
            const double fv = along(v);
            if (fv < best_f) {
                max_move = std::max(max_move, std::abs(v - best(i)));
                best(i) = v;
                best_f = fv;
            }
        }
        if (max_move < box.tolerance) break;
    }
    return {best, best_f};
}

// ============================================================================
// Scalar two-stage problem
// ============================================================================

struct ScalarGapParams {
    double alpha = 0.0; // B^2 K_{T-1} + R
    double beta = 0.0;  // B K_{T-1} A
    double gamma = 0.0; // Sz A^2 P_{T-1}
    double kappa = 0.0; // Sz / S_{T-2|T-3}
    double c0 = 0.0;
    double c1 = 0.0;
    double x_hat0 = 0.0;

    /// Unconstrained minimizer of the quadratic part, -beta x0 / alpha.
    [[nodiscard]] double u_lqg() const { return -beta * x_hat0 / alpha; }
};

/// Gap parameters for a scalar system. The prior mean supplies x_hat0 unless
/// overridden.
[[nodiscard]] inline ScalarGapParams scalar_gap_params(const BilinearSystem& sys, const NoiseSpec& noise,
                                                       const CostSpec& cost, double prior_var,
                                                       std::optional<double> x_hat = std::nullopt) {
    if (sys.n() != 1 || sys.m() != 1 || sys.p() != 1) throw std::invalid_argument("scalar_gap_params: scalar only");
    if (!(prior_var > 0.0)) throw std::invalid_argument("scalar_gap_params: zero prior_var");
    const auto tables = riccati_recursion(cost, sys, 1); // K_0, P_0 of a 1-step table == K_{T-1}, P_{T-1}
    const double k = tables.k(0)(0, 0);
    const double p = tables.p(0)(0, 0);
    const double a = sys.a(0, 0);
    const double b = sys.b(0, 0);
    const double sz = noise.sigma_z(0, 0);
    ScalarGapParams out;
    out.alpha = b * b * k + cost.r(0, 0);
    out.beta = b * k * a;
    out.gamma = sz * a * a * p;
    out.kappa = sz / prior_var;
    out.c0 = sys.c0(0, 0);
    out.c1 = sys.ck.at(0)(0, 0);
    out.x_hat0 = x_hat.value_or(noise.x0_mean(0));
    return out;
}

[[nodiscard]] inline double scalar_lqg_part(const ScalarGapParams& sp, double u) {
    return sp.alpha * u * u + 2.0 * sp.beta * sp.x_hat0 * u;
}

[[nodiscard]] inline double scalar_penalty_part(const ScalarGapParams& sp, double u) {
    const double ub = sp.c0 + sp.c1 * u;
    return sp.gamma / (ub * ub + sp.kappa);
}

[[nodiscard]] inline double scalar_cost_to_go(const ScalarGapParams& sp, double u) {
    return scalar_lqg_part(sp, u) + scalar_penalty_part(sp, u);
}

/// d f0 / du
[[nodiscard]] inline double scalar_gradient(const ScalarGapParams& sp, double u) {
    const double ub = sp.c0 + sp.c1 * u;
    const double den = ub * ub + sp.kappa;
    return 2.0 * sp.alpha * u + 2.0 * sp.beta * sp.x_hat0 - 2.0 * sp.gamma * sp.c1 * ub / (den * den);
}

/// d^2 f0 / du^2
[[nodiscard]] inline double scalar_second_derivative(const ScalarGapParams& sp, double u) {
    const double ub = sp.c0 + sp.c1 * u;
    const double den = ub * ub + sp.kappa;
    return 2.0 * sp.alpha + 2.0 * sp.gamma * sp.c1 * sp.c1 * (3.0 * ub * ub - sp.kappa) / (den * den * den);
}

/// Quintic in ubar = C0 + C1 u whose roots are the critical points,
/// highest degree first. It equals (C1^2 / 2) (ubar^2 + kappa)^2 times the
/// ubar-derivative of the cost-to-go.
[[nodiscard]] inline std::vector<double> gradient_quintic(const ScalarGapParams& sp) {
    const double d = sp.c1 * sp.beta * sp.x_hat0 - sp.c0 * sp.alpha;
    const double k = sp.kappa;
    return {sp.alpha, d, 2.0 * k * sp.alpha, 2.0 * k * d, sp.alpha * k * k - sp.gamma * sp.c1 * sp.c1, k * k * d};
}

enum class CriticalKind { local_min, local_max, saddle_or_degenerate, complex_pair };

[[nodiscard]] inline const char* to_string(CriticalKind kind) {
    switch (kind) {
    case CriticalKind::local_min: return "local_min";
    case CriticalKind::local_max: return "local_max";
    case CriticalKind::saddle_or_degenerate: return "saddle_or_degenerate";
    case CriticalKind::complex_pair: return "complex_pair";
    }
    return "unknown";
}

struct CriticalPoint {
    double u = 0.0; // real part for complex roots
    CriticalKind kind = CriticalKind::complex_pair;
    double f_value = std::numeric_limits<double>::quiet_NaN();
    double second_derivative = std::numeric_limits<double>::quiet_NaN();
    std::complex<double> root_u; // root in u coordinates
};

inline constexpr double kRealRootTolerance = 1e-8;
inline constexpr double kDegenerateCurvature = 1e-10;
inline constexpr double kOneSidedStep = 1e-6;

/// All five roots of the gradient quintic, real ones classified by curvature.
/// Where the curvature vanishes the classification falls back to the signs of
/// the gradient just left and right of the root.
[[nodiscard]] inline std::vector<CriticalPoint> scalar_critical_points(const ScalarGapParams& sp) {
    if (sp.c1 == 0.0) throw std::invalid_argument("scalar_critical_points: C1 = 0, use LQG closed form");
    const auto coeffs = gradient_quintic(sp);
    const std::span<const double> cs(coeffs);
    const auto roots = poly::companion_roots(cs);

    std::vector<double> real_bar;
    std::vector<std::complex<double>> complex_bar;
    for (const auto& r : roots) {
        const double scale = 1.0 + std::abs(r.real());
        bool is_real = std::abs(r.imag()) < kRealRootTolerance * scale;
        if (!is_real && std::abs(r.imag()) < 1e-3 * scale) {
            // Eigenvalues of a multiple root split into a small complex
            // cluster; the real part still annihilates p to round-off.
            const double res = std::abs(poly::horner(cs, r.real()));
            is_real = res <= 1e-12 * poly::magnitude_bound(cs, scale);
        }
        if (is_real) real_bar.push_back(poly::polish_real_root(cs, r.real()));
        else complex_bar.push_back(r);
    }
    std::sort(real_bar.begin(), real_bar.end());
    std::vector<double> merged;
    for (double x : real_bar) {
        if (!merged.empty() && std::abs(x - merged.back()) <= 1e-6 * (1.0 + std::abs(x))) {
            if (std::abs(poly::horner(cs, x)) < std::abs(poly::horner(cs, merged.back()))) merged.back() = x;
            continue;
        }
        merged.push_back(x);
    }

    std::vector<CriticalPoint> out;
    for (double ub : merged) {
        CriticalPoint cp;
        cp.u = (ub - sp.c0) / sp.c1;
        cp.root_u = cp.u;
        cp.f_value = scalar_cost_to_go(sp, cp.u);
        cp.second_derivative = scalar_second_derivative(sp, cp.u);
        if (cp.second_derivative > kDegenerateCurvature) {
            cp.kind = CriticalKind::local_min;
        } else if (cp.second_derivative < -kDegenerateCurvature) {
            cp.kind = CriticalKind::local_max;
        } else {
            // The ubar-gradient has the sign of the quintic (positive factor).
            const double left = poly::horner(cs, ub - kOneSidedStep);
            const double right = poly::horner(cs, ub + kOneSidedStep);
            if (left < 0.0 && right > 0.0) cp.kind = CriticalKind::local_min;
            else if (left > 0.0 && right < 0.0) cp.kind = CriticalKind::local_max;
            else cp.kind = CriticalKind::saddle_or_degenerate;
        }
        out.push_back(cp);
    }
    std::sort(complex_bar.begin(), complex_bar.end(), [](const auto& x, const auto& y) {
        return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
    });
    for (const auto& r : complex_bar) {
        CriticalPoint cp;
        cp.root_u = (r - sp.c0) / sp.c1;
        cp.u = cp.root_u.real();
        cp.kind = CriticalKind::complex_pair;
        out.push_back(cp);
    }
    return out;
}

/// Global minimizers of f0 (several when tied within 1e-9 relative).
[[nodiscard]] inline std::vector<double> scalar_global_minimizers(const ScalarGapParams& sp) {
    if (sp.c1 == 0.0) return {sp.u_lqg()};
    const auto points = scalar_critical_points(sp);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& cp : points)
        if (cp.kind == CriticalKind::local_min) best = std::min(best, cp.f_value);
    std::vector<double> out;
    for (const auto& cp : points)
        if (cp.kind == CriticalKind::local_min && cp.f_value <= best + 1e-9 * (1.0 + std::abs(best)))
            out.push_back(cp.u);
    if (out.empty()) {
        // f0 is coercive, so a minimum exists; fall back to the lowest real critical point.
        for (const auto& cp : points)
            if (cp.kind != CriticalKind::complex_pair && cp.f_value <= best) {
                best = cp.f_value;
                out = {cp.u};
            }
    }
    return out;
}

/// Smallest |u|; exact ties go to the negative value.
[[nodiscard]] inline double select_minimizer(const std::vector<double>& candidates) {
    if (candidates.empty()) throw std::invalid_argument("select_minimizer: no candidates");
    double best = candidates.front();
    for (double u : candidates) {
        const double diff = std::abs(u) - std::abs(best);
        if (diff < -1e-12 || (std::abs(diff) <= 1e-12 && u < best)) best = u;
    }
    return best;
}

/// Closed-form minimizers u_LQG +- sqrt(-kappa + C1 sqrt(gamma/alpha)) / C1,
/// valid when C0 = -u_LQG C1 and alpha kappa^2 < gamma C1^2.
[[nodiscard]] inline std::optional<std::pair<double, double>> closed_form_minimizers(const ScalarGapParams& sp) {
    if (sp.c1 == 0.0) return std::nullopt;
    const double inner = -sp.kappa + std::abs(sp.c1) * std::sqrt(sp.gamma / sp.alpha);
    if (!(inner > 0.0)) return std::nullopt;
    const double offset = std::sqrt(inner) / std::abs(sp.c1);
    return std::make_pair(sp.u_lqg() - offset, sp.u_lqg() + offset);
}

struct ScalarT2Controller {
    std::vector<double> u0_candidates; // all global minimizers, ascending
    double u0_selected = 0.0;          // deterministic pick among candidates
    double u1_gain = 0.0;              // u1 = u1_gain * x_{1|0}
    bool in_theorem_regime = false;
    std::vector<std::string> warnings;

    [[nodiscard]] double u1(double x_hat_10) const { return u1_gain * x_hat_10; }
};

/// Optimal two-stage controller for n = m = p = 1. The stage-0 action is the
/// global minimizer of f0 (numeric path, always valid); the hypotheses under
/// which the closed form applies are checked and reported.
[[nodiscard]] inline ScalarT2Controller scalar_optimal_controller_T2(const BilinearSystem& sys, const NoiseSpec& noise,
                                                                    const CostSpec& cost, const ScalarGapParams& sp) {
    if (sys.n() != 1 || sys.m() != 1 || sys.p() != 1)
        throw std::invalid_argument("scalar_optimal_controller_T2: scalar only");
    ScalarT2Controller ctl;
    ctl.u0_candidates = scalar_global_minimizers(sp);
    std::sort(ctl.u0_candidates.begin(), ctl.u0_candidates.end());
    ctl.u0_selected = select_minimizer(ctl.u0_candidates);

    const double a = sys.a(0, 0);
    const double b = sys.b(0, 0);
    const double qt = cost.q_t(0, 0);
    const double r = cost.r(0, 0);
    ctl.u1_gain = -(a * qt * b) / (b * b * qt + r);

    const auto tables = riccati_recursion(cost, sys, 2);
    const double p1 = tables.p(1)(0, 0);
    const double k1 = tables.k(1)(0, 0);
    const double sigma0 = noise.sigma_0(0, 0);
    const double bound = sp.c1 * sp.c1 * a * a * sigma0 * sigma0 * p1 / (b * b * k1 + r);
    const bool noise_ok = noise.sigma_z(0, 0) <= bound;
    const double c0_target = -sp.u_lqg() * sp.c1;
    const double c0_scale = std::max({std::abs(sp.c0), std::abs(c0_target), 1e-300});
    const bool c0_ok = std::abs(sp.c0 - c0_target) <= 1e-9 * c0_scale;
    if (!noise_ok) ctl.warnings.push_back("outside Theorem 2 regime: sigma_z exceeds C1^2 A^2 Sigma0^2 P1 / (B^2 K1 + R)");
    if (!c0_ok) ctl.warnings.push_back("outside Theorem 2 regime: C0 != -u_LQG * C1");
    if (sp.c1 == 0.0) ctl.warnings.push_back("outside Theorem 2 regime: C1 = 0");
    ctl.in_theorem_regime = noise_ok && c0_ok && sp.c1 != 0.0;
    return ctl;
}

// ============================================================================
// Affine-policy falsification
// ============================================================================

struct AffineFitReport {
    std::vector<double> x_hat;
    std::vector<double> u_star;
    double slope = 0.0;
    double intercept = 0.0;
    double max_residual = 0.0;
    double max_abs_u = 0.0;
    bool falsified = false; // residual > 1e-4 * max|u|
};

/// Optimal stage-0 action across a grid of x_hat values, followed by a least
/// squares affine fit. Where two global minimizers tie, the one nearest the
/// previous grid point's choice is kept (starting from the positive branch).
[[nodiscard]] inline AffineFitReport affine_falsification_test(const ScalarGapParams& base,
                                                               const std::vector<double>& x_hat_grid) {
    if (x_hat_grid.size() < 2) throw std::invalid_argument("affine_falsification_test: need >= 2 grid points");
    AffineFitReport rep;
    std::optional<double> previous;
    for (double xh : x_hat_grid) {
        ScalarGapParams sp = base;
        sp.x_hat0 = xh;
        auto cands = scalar_global_minimizers(sp);
        double pick = *std::max_element(cands.begin(), cands.end());
        if (previous) {
            for (double c : cands)
                if (std::abs(c - *previous) < std::abs(pick - *previous)) pick = c;
        }
        previous = pick;
        rep.x_hat.push_back(xh);
        rep.u_star.push_back(pick);
    }
    const auto n = static_cast<double>(rep.x_hat.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < rep.x_hat.size(); ++i) {
        sx += rep.x_hat[i];
        sy += rep.u_star[i];
        sxx += rep.x_hat[i] * rep.x_hat[i];
        sxy += rep.x_hat[i] * rep.u_star[i];
    }
    const double mx = sx / n;
    const double my = sy / n;
    const double var = sxx / n - mx * mx;
    rep.slope = var > 0.0 ? (sxy / n - mx * my) / var : 0.0;
    rep.intercept = my - rep.slope * mx;
    for (std::size_t i = 0; i < rep.x_hat.size(); ++i) {
        const double resid = rep.u_star[i] - (rep.slope * rep.x_hat[i] + rep.intercept);
        rep.max_residual = std::max(rep.max_residual, std::abs(resid));
        rep.max_abs_u = std::max(rep.max_abs_u, std::abs(rep.u_star[i]));
    }
    rep.falsified = rep.max_residual > 1e-4 * rep.max_abs_u;
    return rep;
}

} // namespace bilq
