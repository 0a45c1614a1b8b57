#pragma once

// Closed-loop rollouts and Monte Carlo aggregation.
//
// Within a step the controller acts first, on the information available
// before y_t is observed; then w_t and z_t are drawn (in that order), y_t is
// formed and the filter advances. Policies that share a seed therefore see
// the same noise realizations.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "control.hpp"
#include "core.hpp"
#include "kalman.hpp"
#include "rng.hpp"

namespace bilq {

enum class PolicyKind { perfect_state_lqr, separation_lqg, scalar_nonlinear_t2, numeric_bellman };
enum class InitEstimate { prior_mean, sampled_from_prior };

struct PolicyConfig {
    PolicyKind kind = PolicyKind::separation_lqg;
    InitEstimate init_estimate = InitEstimate::prior_mean;
};

[[nodiscard]] inline std::string_view to_string(PolicyKind kind) {
    switch (kind) {
    case PolicyKind::perfect_state_lqr: return "perfect_state_lqr";
    case PolicyKind::separation_lqg: return "separation_lqg";
    case PolicyKind::scalar_nonlinear_t2: return "scalar_nonlinear_t2";
    case PolicyKind::numeric_bellman: return "numeric_bellman";
    }
    return "unknown";
}

[[nodiscard]] inline PolicyKind parse_policy_kind(std::string_view name) {
    for (auto k : {PolicyKind::perfect_state_lqr, PolicyKind::separation_lqg, PolicyKind::scalar_nonlinear_t2,
                   PolicyKind::numeric_bellman})
        if (to_string(k) == name) return k;
    throw std::invalid_argument("unknown policy '" + std::string(name) + "'");
}

inline void validate_policy(const PolicyConfig& policy, const BilinearSystem& sys, int horizon) {
    if (horizon < 1) throw std::invalid_argument("rollout: horizon must be >= 1");
    if (policy.kind == PolicyKind::scalar_nonlinear_t2 &&
        (sys.n() != 1 || sys.m() != 1 || sys.p() != 1 || horizon != 2))
        throw std::invalid_argument("scalar_nonlinear_t2 requires n = m = p = 1 and horizon 2");
    if (policy.kind == PolicyKind::numeric_bellman && sys.p() > 3)
        throw std::invalid_argument("numeric_bellman requires p <= 3");
}

struct TrajectoryRecord {
    // Indexed t = 0..T unless noted.
    std::vector<Vector> x;
    std::vector<Vector> u; // t = 0..T-1
    std::vector<Vector> y; // t = 0..T-1
    std::vector<Vector> x_hat;
    std::vector<Matrix> cov;
    std::vector<double> stage_cost; // entry T is the terminal cost
    std::vector<double> cum_cost;
    std::vector<double> u_norm;     // entry T is 0
    std::vector<double> est_err;
    std::vector<double> cov_trace;

    [[nodiscard]] int horizon() const { return static_cast<int>(u.size()); }
    [[nodiscard]] double total_cost() const { return cum_cost.empty() ? 0.0 : cum_cost.back(); }
};

/// Test instrumentation: lets a caller alter z_t after it is drawn.
struct RolloutHooks {
    std::function<void(int, Vector&)> perturb_output_noise;
};

/// Decision rule for one configuration. Sees x_t only for perfect_state_lqr.
class Controller {
public:
    Controller(BilinearSystem sys, NoiseSpec noise, CostSpec cost, PolicyConfig policy, int horizon)
        : sys_(std::move(sys)), noise_(std::move(noise)), cost_(std::move(cost)), policy_(policy), horizon_(horizon),
          tables_(riccati_recursion(cost_, sys_, horizon)) {
        validate_policy(policy_, sys_, horizon_);
    }

    [[nodiscard]] const RiccatiTables& tables() const { return tables_; }
    [[nodiscard]] const PolicyConfig& policy() const { return policy_; }

    [[nodiscard]] Vector act(int t, const BeliefState& belief, const Vector& state) const {
        switch (policy_.kind) {
        case PolicyKind::perfect_state_lqr: return lqg_policy(tables_, t, state);
        case PolicyKind::separation_lqg: return lqg_policy(tables_, t, belief.mean);
        case PolicyKind::scalar_nonlinear_t2: {
            if (t != 0) return lqg_policy(tables_, t, belief.mean);
            const auto sp = scalar_gap_params(sys_, noise_, cost_, belief.cov(0, 0), belief.mean(0));
            Vector u(1);
            u(0) = select_minimizer(scalar_global_minimizers(sp));
            return u;
        }
        case PolicyKind::numeric_bellman: {
            if (t + 1 >= horizon_) return lqg_policy(tables_, t, belief.mean);
            const auto bp = make_bellman_params(sys_, noise_, cost_, tables_, t, belief);
            return bellman_minimize_Tm2(bp).u_star;
        }
        }
        throw std::logic_error("Controller::act: unknown policy");
    }

private:
    BilinearSystem sys_;
    NoiseSpec noise_;
    CostSpec cost_;
    PolicyConfig policy_;
    int horizon_;
    RiccatiTables tables_;
};

namespace detail {

inline double quad(const Vector& v, const Matrix& m) { return v.dot(m * v); }

} // namespace detail

[[nodiscard]] inline TrajectoryRecord rollout(const Controller& controller, const BilinearSystem& sys,
                                              const NoiseSpec& noise, const CostSpec& cost, int horizon,
                                              RngStream stream, const RolloutHooks& hooks = {}) {
    const bool perfect = controller.policy().kind == PolicyKind::perfect_state_lqr;
    const Matrix w_factor = gaussian_factor(noise.sigma_w);
    const Matrix z_factor = gaussian_factor(noise.sigma_z);
    const Matrix x0_factor = gaussian_factor(noise.sigma_0);
    const auto n = sys.n();
    const auto m = sys.m();

    TrajectoryRecord rec;
    Vector x = sample_with_factor(stream, noise.x0_mean, x0_factor);
    BeliefState belief = initial_belief(noise);
    if (controller.policy().init_estimate == InitEstimate::sampled_from_prior) {
        RngStream init_stream = stream.substream(1);
        belief.mean = sample_with_factor(init_stream, noise.x0_mean, x0_factor);
    }

    double cum = 0.0;
    auto record_state = [&](const Vector& xt, const BeliefState& bt) {
        rec.x.push_back(xt);
        if (perfect) {
            rec.x_hat.push_back(xt);
            rec.cov.push_back(Matrix::Zero(n, n));
        } else {
            rec.x_hat.push_back(bt.mean);
            rec.cov.push_back(bt.cov);
        }
        rec.est_err.push_back((xt - rec.x_hat.back()).norm());
        rec.cov_trace.push_back(rec.cov.back().trace());
    };

    for (int t = 0; t < horizon; ++t) {
        record_state(x, belief);
        const Vector u = controller.act(t, belief, x);
        const Vector w = sample_with_factor(stream, Vector::Zero(n), w_factor);
        Vector z = sample_with_factor(stream, Vector::Zero(m), z_factor);
        if (hooks.perturb_output_noise) hooks.perturb_output_noise(t, z);
        const Vector y = observation_matrix(sys, u) * x + z;

        const double stage = detail::quad(x, cost.q) + detail::quad(u, cost.r);
        cum += stage;
        rec.u.push_back(u);
        rec.y.push_back(y);
        rec.stage_cost.push_back(stage);
        rec.cum_cost.push_back(cum);
        rec.u_norm.push_back(u.norm());

        if (!perfect) belief = kf_step(belief, sys, noise, u, y).next_belief;
        x = sys.a * x + sys.b * u + w;
    }
    record_state(x, belief);
    const double terminal = detail::quad(x, cost.q_t);
    cum += terminal;
    rec.stage_cost.push_back(terminal);
    rec.cum_cost.push_back(cum);
    rec.u_norm.push_back(0.0);
    return rec;
}

[[nodiscard]] inline TrajectoryRecord rollout(const BilinearSystem& sys, const NoiseSpec& noise, const CostSpec& cost,
                                              const PolicyConfig& policy, int horizon, RngStream stream,
                                              const RolloutHooks& hooks = {}) {
    const Controller controller(sys, noise, cost, policy, horizon);
    return rollout(controller, sys, noise, cost, horizon, stream, hooks);
}

// ============================================================================
// Percentiles and Monte Carlo
// ============================================================================

/// Linear interpolation between order statistics (position q * (N - 1)).
[[nodiscard]] inline double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("percentile: empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

struct PercentileSeries {
    std::string metric;
    std::vector<double> p25, p50, p75; // per step t
};

inline const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names{"stage_cost", "cum_cost", "u_norm", "est_err", "cov_trace"};
    return names;
}

[[nodiscard]] inline const std::vector<double>& metric_of(const TrajectoryRecord& rec, std::string_view metric) {
    if (metric == "stage_cost") return rec.stage_cost;
    if (metric == "cum_cost") return rec.cum_cost;
    if (metric == "u_norm") return rec.u_norm;
    if (metric == "est_err") return rec.est_err;
    if (metric == "cov_trace") return rec.cov_trace;
    throw std::invalid_argument("unknown metric '" + std::string(metric) + "'");
}

/// Per-step quartiles of one metric across runs.
[[nodiscard]] inline PercentileSeries percentile_series(const std::vector<TrajectoryRecord>& runs,
                                                        std::string_view metric) {
    if (runs.empty()) throw std::invalid_argument("percentile_series: no runs");
    PercentileSeries ps;
    ps.metric = std::string(metric);
    const auto steps = metric_of(runs.front(), metric).size();
    std::vector<double> column(runs.size());
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t r = 0; r < runs.size(); ++r) column[r] = metric_of(runs[r], metric)[t];
        ps.p25.push_back(percentile(column, 0.25));
        ps.p50.push_back(percentile(column, 0.50));
        ps.p75.push_back(percentile(column, 0.75));
    }
    return ps;
}

struct MonteCarloResult {
    std::vector<TrajectoryRecord> runs;
    std::vector<PercentileSeries> series; // one per metric_names() entry

    [[nodiscard]] const PercentileSeries& metric(std::string_view name) const {
        for (const auto& s : series)
            if (s.metric == name) return s;
        throw std::invalid_argument("unknown metric '" + std::string(name) + "'");
    }
};

/// Runs r = 0..runs-1 on streams (seed, r); results are placed by run index,
/// so output does not depend on `threads`.
[[nodiscard]] inline MonteCarloResult monte_carlo(const BilinearSystem& sys, const NoiseSpec& noise,
                                                  const CostSpec& cost, const PolicyConfig& policy, int horizon,
                                                  int runs, std::uint64_t seed, int threads = 1) {
    if (runs < 1) throw std::invalid_argument("monte_carlo: runs must be >= 1");
    const Controller controller(sys, noise, cost, policy, horizon);
    MonteCarloResult result;
    result.runs.resize(static_cast<std::size_t>(runs));
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (int r = next++; r < runs; r = next++) {
            if (failed) return;
            try {
                result.runs[static_cast<std::size_t>(r)] =
                    rollout(controller, sys, noise, cost, horizon, RngStream(seed, static_cast<std::uint64_t>(r)));
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
                return;
            }
        }
    };
    const int workers = std::clamp(threads, 1, runs);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    for (const auto& name : metric_names()) result.series.push_back(percentile_series(result.runs, name));
    return result;
}

// ============================================================================
// Scalar landscape
// ============================================================================

struct LandscapeRow {
    double u, f_total, f_lqg, g;
};

struct LandscapeTable {
    ScalarGapParams params;
    std::vector<LandscapeRow> rows;
    std::vector<CriticalPoint> critical_points;
};

/// Params with C0 chosen so that the penalty peak -C0/C1 sits at u_LQG + offset.
[[nodiscard]] inline ScalarGapParams with_peak_offset(ScalarGapParams sp, double offset) {
    sp.c0 = -sp.c1 * (sp.u_lqg() + offset);
    return sp;
}

[[nodiscard]] inline LandscapeTable landscape_sweep(const ScalarGapParams& sp, double lo, double hi, int points) {
    if (points < 2 || !(hi > lo)) throw std::invalid_argument("landscape_sweep: need points >= 2 and hi > lo");
    LandscapeTable table;
    table.params = sp;
    const double step = (hi - lo) / (points - 1);
    for (int i = 0; i < points; ++i) {
        const double u = (i == points - 1) ? hi : lo + step * i;
        const double fl = scalar_lqg_part(sp, u);
        const double g = scalar_penalty_part(sp, u);
        table.rows.push_back({u, fl + g, fl, g});
    }
    if (sp.c1 != 0.0) table.critical_points = scalar_critical_points(sp);
    return table;
}

} // namespace bilq
