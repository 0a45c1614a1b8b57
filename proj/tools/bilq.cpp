// bilq: experiments for linear systems with bilinear observations.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bilq/bilq.hpp"

namespace fs = std::filesystem;
using namespace bilq;

namespace {

struct CommandResult {
    std::vector<std::string> failures;
    void require(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
};

int thread_count() {
    if (const char* env = std::getenv("BILQ_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n >= 1) return n;
        } catch (const std::exception&) {
        }
        std::cerr << "warning: ignoring invalid BILQ_THREADS='" << env << "'\n";
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    return out;
}

void print_critical_points(std::ostream& os, const std::vector<CriticalPoint>& points) {
    for (const auto& cp : points) {
        if (cp.kind == CriticalKind::complex_pair) {
            os << "  complex     u = " << format_double(cp.root_u.real()) << (cp.root_u.imag() < 0 ? " - " : " + ")
               << format_double(std::abs(cp.root_u.imag())) << "i\n";
        } else {
            os << "  " << to_string(cp.kind) << "  u = " << format_double(cp.u) << "  f0 = " << format_double(cp.f_value)
               << "  f0'' = " << format_double(cp.second_derivative) << '\n';
        }
    }
}

// ---------------------------------------------------------------------------

struct LandscapeArgs {
    double offset = 0.0;
    std::vector<double> grid{-3.0, 3.0, 2001};
    std::string out = "landscape.csv";
    std::optional<double> c1;
};

CommandResult cmd_scalar_landscape(const LandscapeArgs& args) {
    CommandResult res;
    if (args.grid.size() != 3) throw std::invalid_argument("--grid expects LO HI N");
    const int points = static_cast<int>(args.grid[2]);
    if (std::abs(args.offset) > 1.0) std::cerr << "warning: offset outside [-1, 1]\n";
    auto sp = experiments::scalar_landscape_params(0.0);
    if (args.c1) sp.c1 = *args.c1;
    sp = with_peak_offset(sp, args.offset);
    const auto table = landscape_sweep(sp, args.grid[0], args.grid[1], points);

    auto csv = open_out(args.out);
    write_landscape_csv(csv, table);
    auto side = open_out(args.out + ".critical_points.csv");
    write_critical_points_csv(side, table.critical_points);

    std::cout << "alpha=" << format_double(sp.alpha) << " beta=" << format_double(sp.beta)
              << " gamma=" << format_double(sp.gamma) << " kappa=" << format_double(sp.kappa)
              << " c0=" << format_double(sp.c0) << " c1=" << format_double(sp.c1) << '\n';
    std::cout << "u_lqg=" << format_double(sp.u_lqg()) << '\n';
    std::cout << "critical points:\n";
    print_critical_points(std::cout, table.critical_points);
    const auto mins = scalar_global_minimizers(sp);
    std::cout << "global minimizers:";
    for (double u : mins) std::cout << ' ' << format_double(u);
    std::cout << "\nwrote " << table.rows.size() << " rows to " << args.out << '\n';
    res.require(!mins.empty(), "no global minimizer found");
    return res;
}

// ---------------------------------------------------------------------------

void write_comparison(const fs::path& dir, const experiments::ModelComparison& cmp) {
    fs::create_directories(dir);
    {
        auto f = open_out(dir / "trajectories_perfect.csv");
        write_trajectory_csv(f, cmp.perfect.runs);
    }
    {
        auto f = open_out(dir / "trajectories_linear.csv");
        write_trajectory_csv(f, cmp.linear.runs);
    }
    {
        auto f = open_out(dir / "trajectories_bilinear.csv");
        write_trajectory_csv(f, cmp.bilinear.runs);
    }
    auto summary = open_out(dir / "summary.csv");
    write_summary_header(summary);
    write_summary_rows(summary, cmp.perfect, "perfect_state_lqr", "perfect");
    write_summary_rows(summary, cmp.linear, "separation_lqg", "linear");
    write_summary_rows(summary, cmp.bilinear, "separation_lqg", "bilinear");
}

void print_final_medians(const experiments::ModelComparison& cmp) {
    auto line = [](const char* name, const MonteCarloResult& mc) {
        std::cout << "  " << name << ": median cum_cost(T)=" << format_double(mc.metric("cum_cost").p50.back())
                  << " median cov_trace(T)=" << format_double(mc.metric("cov_trace").p50.back()) << '\n';
    };
    line("perfect ", cmp.perfect);
    line("linear  ", cmp.linear);
    line("bilinear", cmp.bilinear);
}

struct DoubleIntegratorArgs {
    int runs = 50;
    std::uint64_t seed = 0;
    double c1 = 1.0;
    std::string out = "double_integrator";
};

CommandResult cmd_double_integrator(const DoubleIntegratorArgs& args) {
    CommandResult res;
    if (args.runs < 1) throw std::invalid_argument("--runs must be >= 1");
    const auto lin = experiments::double_integrator_config(experiments::ObsModel::linear, args.c1);
    const auto bil = experiments::double_integrator_config(experiments::ObsModel::bilinear, args.c1);
    const auto cmp = experiments::compare_observation_models(lin, bil, args.runs, args.seed, thread_count());
    write_comparison(args.out, cmp);
    std::cout << "double integrator, runs=" << args.runs << " seed=" << args.seed << " c1=" << format_double(args.c1)
              << '\n';
    print_final_medians(cmp);
    return res;
}

// ---------------------------------------------------------------------------

struct OrthogonalArgs {
    int runs = 50;
    std::uint64_t seed = 0;
    std::string variant = "a";
    std::string out = "orthogonal";
    double delta = kDefaultObservabilityDelta;
};

CommandResult cmd_orthogonal(const OrthogonalArgs& args) {
    CommandResult res;
    if (args.runs < 1) throw std::invalid_argument("--runs must be >= 1");
    if (args.variant != "a" && args.variant != "b") throw std::invalid_argument("--variant must be a or b");
    const auto inst = experiments::orthogonal_instance(args.seed, args.variant[0]);
    const auto prop1 = check_proposition1(inst.config.sys, {}, args.delta);
    res.require(prop1.holds, "proposition 1 condition fails: min eig(O1) = " + format_double(prop1.min_eigenvalue));

    const auto lin = experiments::linear_counterpart(inst.config);
    const auto cmp = experiments::compare_observation_models(lin, inst.config, args.runs, args.seed, thread_count());
    const fs::path dir(args.out);
    write_comparison(dir, cmp);
    {
        auto f = open_out(dir / "config.json");
        f << config_to_json(inst.config).dump(2) << '\n';
    }
    auto rep = open_out(dir / "proposition1.txt");
    rep << "variant=" << args.variant << "\nc0_attempts=" << inst.c0_attempts
        << "\nmin_eig_O1=" << format_double(prop1.min_eigenvalue) << "\nholds=" << (prop1.holds ? "true" : "false")
        << '\n';
    std::cout << "orthogonal variant " << args.variant << ", seed=" << args.seed << '\n';
    std::cout << "  proposition 1: " << (prop1.holds ? "holds" : "FAILS")
              << " (min eig O1 = " << format_double(prop1.min_eigenvalue) << ")\n";
    print_final_medians(cmp);
    return res;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string config;
    std::optional<int> runs;
    std::optional<std::uint64_t> seed;
    std::string policy = "separation_lqg";
    std::string init = "prior_mean";
    std::string out = "simulate";
};

CommandResult cmd_simulate(const SimulateArgs& args) {
    CommandResult res;
    const auto cfg = load_config(args.config);
    const auto report = validate_system(cfg.sys, cfg.noise, cfg.cost);
    for (const auto& v : report.violations) res.failures.push_back("config: " + v);
    if (!report.ok()) return res;
    PolicyConfig policy;
    policy.kind = parse_policy_kind(args.policy);
    if (args.init == "prior_mean") policy.init_estimate = InitEstimate::prior_mean;
    else if (args.init == "sampled_from_prior") policy.init_estimate = InitEstimate::sampled_from_prior;
    else throw std::invalid_argument("--init must be prior_mean or sampled_from_prior");
    const int runs = args.runs.value_or(cfg.runs);
    const auto seed = args.seed.value_or(cfg.seed);
    const auto mc = monte_carlo(cfg.sys, cfg.noise, cfg.cost, policy, cfg.horizon, runs, seed, thread_count());
    const fs::path dir(args.out);
    fs::create_directories(dir);
    {
        auto f = open_out(dir / "trajectories.csv");
        write_trajectory_csv(f, mc.runs);
    }
    auto summary = open_out(dir / "summary.csv");
    write_summary_header(summary);
    write_summary_rows(summary, mc, to_string(policy.kind), cfg.sys.is_linear_observation() ? "linear" : "bilinear");
    std::cout << "simulated " << runs << " runs, horizon " << cfg.horizon << ", policy " << args.policy
              << "; median total cost " << format_double(mc.metric("cum_cost").p50.back()) << '\n';
    return res;
}

// ---------------------------------------------------------------------------

struct ObservabilityArgs {
    std::string config;
    int horizon = 100;
    double delta = kDefaultObservabilityDelta;
    double threshold = 1e6;
    std::uint64_t seed = 0;
};

CommandResult cmd_observability(const ObservabilityArgs& args) {
    CommandResult res;
    const auto cfg = load_config(args.config);
    const auto report = validate_system(cfg.sys, cfg.noise, cfg.cost);
    for (const auto& v : report.violations) res.failures.push_back("config: " + v);
    if (!report.ok()) return res;
    const auto tables = riccati_recursion(cfg.cost, cfg.sys, args.horizon);
    const BeliefPolicy lqg = [&](int t, const BeliefState& b) { return lqg_policy(tables, t, b.mean); };
    const auto probe =
        covariance_boundedness_probe(cfg.sys, cfg.noise, lqg, args.horizon, args.threshold, RngStream(args.seed, 0));

    const auto eigs = gramian_min_eigenvalues(cfg.sys, probe.inputs);
    const auto prop1 = check_proposition1(cfg.sys, probe.inputs, args.delta);
    std::cout << "gramian min eigenvalues along the LQG input sequence (window start l):\n";
    bool all_observable = true;
    double lowest = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < eigs.size(); ++l) {
        std::cout << "  l=" << l << " min_eig=" << format_double(eigs[l]) << '\n';
        all_observable = all_observable && eigs[l] > args.delta;
        lowest = std::min(lowest, eigs[l]);
    }
    const int half = args.horizon / 2;
    const double early = probe.max_norm_between(1, half);
    const double late = probe.max_norm_between(half, args.horizon);
    std::cout << "uniformly_observable=" << (all_observable ? "true" : "false") << " (delta=" << format_double(args.delta)
              << ", lowest=" << format_double(lowest) << ")\n";
    std::cout << "proposition1=" << (prop1.holds ? "true" : "false")
              << " min_eig_O1=" << format_double(prop1.min_eigenvalue) << " |O1|=" << format_double(prop1.o1_norm)
              << " |O2|=" << format_double(prop1.o2_norm) << " |O3|=" << format_double(prop1.o3_norm) << '\n';
    std::cout << "probe: max_norm=" << format_double(probe.max_norm) << " max_trace=" << format_double(probe.max_trace)
              << " exceeded=" << (probe.exceeded ? "true" : "false") << " late/early="
              << format_double(early > 0 ? late / early : 0.0) << " growth=" << (late > 1.05 * early ? "true" : "false")
              << '\n';
    return res;
}

// ---------------------------------------------------------------------------

struct CriticalArgs {
    std::string config;
    std::optional<double> x0hat, c0, c1;
};

CommandResult cmd_critical_points(const CriticalArgs& args) {
    CommandResult res;
    const auto cfg = load_config(args.config);
    auto sp = scalar_gap_params(cfg.sys, cfg.noise, cfg.cost, cfg.noise.sigma_0(0, 0), args.x0hat);
    if (args.c0) sp.c0 = *args.c0;
    if (args.c1) sp.c1 = *args.c1;
    std::cout << "alpha=" << format_double(sp.alpha) << " beta=" << format_double(sp.beta)
              << " gamma=" << format_double(sp.gamma) << " kappa=" << format_double(sp.kappa)
              << " x0hat=" << format_double(sp.x_hat0) << " c0=" << format_double(sp.c0)
              << " c1=" << format_double(sp.c1) << '\n';
    if (sp.c1 == 0.0) {
        std::cout << "C1 = 0: LQG closed form u = " << format_double(sp.u_lqg()) << '\n';
        return res;
    }
    print_critical_points(std::cout, scalar_critical_points(sp));
    BilinearSystem sys = cfg.sys;
    sys.c0(0, 0) = sp.c0;
    sys.ck[0](0, 0) = sp.c1;
    const auto ctl = scalar_optimal_controller_T2(sys, cfg.noise, cfg.cost, sp);
    std::cout << "global minimizers:";
    for (double u : ctl.u0_candidates) std::cout << ' ' << format_double(u);
    std::cout << "\nselected u0=" << format_double(ctl.u0_selected) << " u1 gain=" << format_double(ctl.u1_gain)
              << "\ntheorem regime: " << (ctl.in_theorem_regime ? "yes" : "no") << '\n';
    for (const auto& w : ctl.warnings) std::cout << "  " << w << '\n';
    return res;
}

int finish(const std::string& command, const CommandResult& res) {
    if (res.failures.empty()) return 0;
    nlohmann::json j;
    j["status"] = "fail";
    j["command"] = command;
    j["failures"] = res.failures;
    std::cerr << j.dump() << '\n';
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Estimation and control with bilinear observations"};
    app.require_subcommand(1);

    LandscapeArgs landscape;
    auto* sc = app.add_subcommand("scalar-landscape", "Sweep the scalar two-stage cost-to-go");
    sc->add_option("--offset", landscape.offset, "Penalty peak minus u_LQG");
    sc->add_option("--grid", landscape.grid, "LO HI N")->expected(3);
    sc->add_option("--c1", landscape.c1, "Override C1 (default alpha)");
    sc->add_option("--out", landscape.out, "Output CSV path");

    DoubleIntegratorArgs di;
    auto* dc = app.add_subcommand("double-integrator", "Double integrator, three observation models");
    dc->add_option("--runs", di.runs);
    dc->add_option("--seed", di.seed);
    dc->add_option("--c1", di.c1, "Position sensor gain");
    dc->add_option("--out", di.out, "Output directory");

    OrthogonalArgs orth;
    auto* oc = app.add_subcommand("orthogonal", "Random system with C0 orthogonal to span{Ck}");
    oc->add_option("--runs", orth.runs);
    oc->add_option("--seed", orth.seed);
    oc->add_option("--variant", orth.variant)->check(CLI::IsMember({"a", "b"}));
    oc->add_option("--delta", orth.delta);
    oc->add_option("--out", orth.out, "Output directory");

    SimulateArgs sim;
    auto* smc = app.add_subcommand("simulate", "Monte Carlo rollouts of a JSON config");
    smc->add_option("--config", sim.config)->required();
    smc->add_option("--runs", sim.runs);
    smc->add_option("--seed", sim.seed);
    smc->add_option("--policy", sim.policy)
        ->check(CLI::IsMember({"perfect_state_lqr", "separation_lqg", "scalar_nonlinear_t2", "numeric_bellman"}));
    smc->add_option("--init", sim.init)->check(CLI::IsMember({"prior_mean", "sampled_from_prior"}));
    smc->add_option("--out", sim.out, "Output directory");

    ObservabilityArgs obs;
    auto* obc = app.add_subcommand("observability", "Gramians, sufficient condition and covariance probe");
    obc->add_option("--config", obs.config)->required();
    obc->add_option("--horizon", obs.horizon);
    obc->add_option("--delta", obs.delta);
    obc->add_option("--threshold", obs.threshold, "Probe bound on the covariance norm");
    obc->add_option("--seed", obs.seed);

    CriticalArgs crit;
    auto* cc = app.add_subcommand("critical-points", "Classify critical points of the scalar cost-to-go");
    cc->add_option("--config", crit.config)->required();
    cc->add_option("--x0hat", crit.x0hat);
    cc->add_option("--c0", crit.c0);
    cc->add_option("--c1", crit.c1);

    CLI11_PARSE(app, argc, argv);

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        if (*sc) return finish(name, cmd_scalar_landscape(landscape));
        if (*dc) return finish(name, cmd_double_integrator(di));
        if (*oc) return finish(name, cmd_orthogonal(orth));
        if (*smc) return finish(name, cmd_simulate(sim));
        if (*obc) return finish(name, cmd_observability(obs));
        if (*cc) return finish(name, cmd_critical_points(crit));
    } catch (const std::exception& e) {
        return finish(name, CommandResult{{e.what()}});
    }
    return 1;
}
