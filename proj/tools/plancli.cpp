// Command-line front end: solve single plans, sweep parameter grids,
// Monte Carlo-validate exported plans, and list scenario seeds.
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "reachplan/harness.hpp"
#include "reachplan/plan_io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNotConverged = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitValidation = 4;

struct GlobalOpts {
    int max_iter = 200;
    double xi = 1e-4;
    bool lax_parse = false;
    bool quiet = false;
};

void say(const GlobalOpts& g, const std::string& line) {
    if (!g.quiet) std::cout << line << "\n";
}

reachplan::Scenario load(const std::string& path, const GlobalOpts& g) {
    std::vector<std::string> warnings;
    reachplan::Scenario scenario = reachplan::load_scenario(path, g.lax_parse,
                                                            &warnings);
    for (const std::string& w : warnings)
        if (!g.quiet) std::cerr << "warning: " << w << "\n";
    return scenario;
}

std::vector<double> parse_eta_list(const std::string& text) {
    std::vector<double> etas;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        etas.push_back(reachplan::parse_double(item));
    return etas;
}

std::vector<reachplan::Strategy> parse_strategy_list(const std::string& text) {
    std::vector<reachplan::Strategy> strategies;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        strategies.push_back(reachplan::strategy_from_name(item));
    return strategies;
}

int run_solve(const std::string& scenario_path, double eta,
              const std::string& strategy_name, double delta, double Delta,
              bool custom_increments, const std::string& seed_label,
              const std::string& out_path, const GlobalOpts& g) {
    const reachplan::Scenario scenario = load(scenario_path, g);
    const reachplan::Strategy strategy =
        reachplan::strategy_from_name(strategy_name);
    if (strategy == reachplan::Strategy::kCustom && !custom_increments)
        throw CLI::ValidationError("--strategy custom requires --delta and --Delta");

    reachplan::SolverConfig config = reachplan::make_config(strategy, eta);
    if (custom_increments) {
        config.delta = delta;
        config.Delta = Delta;
    }
    config.max_iter = g.max_iter;
    config.xi = g.xi;

    const reachplan::SeedTrajectory seed =
        reachplan::resolve_seed(scenario, seed_label);
    const reachplan::PlanResult plan = reachplan::solve(scenario, seed, config);
    reachplan::export_plan(plan, scenario.dt, out_path);

    std::ostringstream line;
    line << (plan.converged ? "converged" : "not converged") << " after "
         << plan.iterations << " iterations; tau="
         << reachplan::format_double(plan.tau_final)
         << " lambda=" << reachplan::format_double(plan.lambda_final)
         << " effort=" << reachplan::format_double(plan.cost_effort)
         << "; wrote " << out_path;
    say(g, line.str());
    return plan.converged ? kExitOk : kExitNotConverged;
}

int run_sweep_cmd(const std::string& scenario_path, const std::string& etas_text,
                  const std::string& strategies_text,
                  const std::string& seed_labels_text, long rollouts,
                  uint64_t rng_seed, const std::string& out_path,
                  const GlobalOpts& g) {
    reachplan::SweepSpec spec;
    spec.scenario = load(scenario_path, g);
    spec.eta_values = parse_eta_list(etas_text);
    spec.strategies = parse_strategy_list(strategies_text);
    {
        std::stringstream ss(seed_labels_text);
        std::string item;
        while (std::getline(ss, item, ',')) spec.seed_labels.push_back(item);
    }
    if (spec.seed_labels.empty()) spec.seed_labels.push_back("straight");
    spec.mc_rollouts = rollouts;
    spec.mc_seed = rng_seed;
    spec.max_iter = g.max_iter;
    spec.xi = g.xi;

    const reachplan::SweepReport report = reachplan::run_sweep(spec);
    reachplan::export_sweep(report, out_path);

    int converged = 0;
    for (const reachplan::SweepRow& row : report.rows) {
        if (row.converged) ++converged;
        else if (!g.quiet && !row.error.empty())
            std::cerr << "warning: eta=" << reachplan::format_double(row.eta)
                      << " " << reachplan::strategy_name(row.strategy) << "/"
                      << row.homotopy_label << ": " << row.error << "\n";
    }
    std::ostringstream line;
    line << converged << "/" << report.rows.size()
         << " grid cells converged; wrote " << out_path;
    say(g, line.str());
    return converged > 0 ? kExitOk : kExitNotConverged;
}

int run_validate(const std::string& scenario_path, const std::string& plan_path,
                 long rollouts, uint64_t rng_seed, const std::string& out_path,
                 const GlobalOpts& g) {
    const reachplan::Scenario scenario = load(scenario_path, g);
    const reachplan::PlanFile plan = reachplan::import_plan(plan_path);
    if (plan.steps != scenario.steps)
        throw std::invalid_argument(
            "plan horizon (" + std::to_string(plan.steps) +
            " steps) does not match the scenario (" +
            std::to_string(scenario.steps) + ")");
    if (std::abs(plan.dt - scenario.dt) > 1e-12 * (1.0 + std::abs(scenario.dt)))
        throw std::invalid_argument("plan dt does not match the scenario");

    const reachplan::SystemModel sys = reachplan::system_of(scenario);
    const reachplan::StateMoments x0 = reachplan::initial_state(scenario);
    const reachplan::MCReport report = reachplan::simulate(
        sys, x0, plan.controls, scenario.obstacles, rollouts, rng_seed);
    reachplan::export_mc_report(report, out_path);

    const double eta = plan.eta;
    const double sigma = std::sqrt(eta * (1.0 - eta) / double(rollouts));
    const double threshold = eta - 3.0 * sigma;
    int failures = 0;
    double worst = 1.0;
    for (int j = 0; j < report.per_step_avoidance.rows(); ++j) {
        for (int t = 0; t < report.per_step_avoidance.cols(); ++t) {
            const double observed = report.per_step_avoidance(j, t);
            worst = std::min(worst, observed);
            if (observed < threshold) {
                ++failures;
                if (!g.quiet)
                    std::cerr << "avoidance below target: obstacle " << j
                              << " step " << t << " observed "
                              << reachplan::format_double(observed)
                              << " threshold "
                              << reachplan::format_double(threshold) << "\n";
            }
        }
    }
    std::ostringstream line;
    line << "worst per-step avoidance "
         << reachplan::format_double(worst) << " against threshold "
         << reachplan::format_double(threshold) << " (eta="
         << reachplan::format_double(eta) << ", n=" << rollouts << "); wrote "
         << out_path;
    say(g, line.str());
    return failures == 0 ? kExitOk : kExitValidation;
}

int run_seed(const std::string& scenario_path, const GlobalOpts& g) {
    const reachplan::Scenario scenario = load(scenario_path, g);
    std::cout << "straight\n";
    for (const reachplan::NamedSeed& seed : scenario.seeds) {
        std::cout << seed.label;
        for (const Eigen::Vector2d& via : seed.via)
            std::cout << " (" << reachplan::format_double(via.x()) << ", "
                      << reachplan::format_double(via.y()) << ")";
        std::cout << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Chance-constrained 2D trajectory planner"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--max-iter", g.max_iter, "Iteration cap for the solver")
        ->capture_default_str();
    app.add_option("--xi", g.xi, "Convergence threshold on the objective change")
        ->capture_default_str();
    app.add_flag("--lax-parse", g.lax_parse,
                 "Warn about unknown scenario keys instead of rejecting them");
    app.add_flag("--quiet", g.quiet, "Suppress progress output");

    std::string scenario_path, plan_path, out_path;
    double eta = 0.9, delta = 0.0, Delta = 1.0;
    std::string strategy = "lv", seed_label = "straight";
    std::string etas_text, strategies_text = "lv,hc", seed_labels_text = "straight";
    long rollouts = 100000;
    uint64_t rng_seed = 1;
    bool list_seeds = false;

    CLI::App* solve = app.add_subcommand("solve", "Plan one trajectory");
    solve->add_option("scenario", scenario_path, "Scenario JSON file")->required();
    solve->add_option("--eta", eta, "Per-constraint avoidance probability target")
        ->required();
    solve->add_option("--strategy", strategy, "lv, hc, or custom")->required();
    CLI::Option* delta_opt =
        solve->add_option("--delta", delta, "Additive tau increment");
    CLI::Option* Delta_opt =
        solve->add_option("--Delta", Delta, "Multiplicative lambda increment");
    delta_opt->needs(Delta_opt);
    Delta_opt->needs(delta_opt);
    solve->add_option("--seed-label", seed_label,
                      "Homotopy seed (\"straight\" or a scenario label)")
        ->capture_default_str();
    solve->add_option("--out", out_path, "Output plan CSV")->required();

    CLI::App* sweep = app.add_subcommand("sweep", "Grid of (eta, strategy) solves");
    sweep->add_option("scenario", scenario_path, "Scenario JSON file")->required();
    sweep->add_option("--etas", etas_text, "Comma-separated eta grid")->required();
    sweep->add_option("--strategies", strategies_text, "Comma-separated strategies")
        ->capture_default_str();
    sweep->add_option("--seed-labels", seed_labels_text,
                      "Comma-separated homotopy seeds")
        ->capture_default_str();
    sweep->add_option("--rollouts", rollouts, "Monte Carlo rollouts per cell")
        ->capture_default_str();
    sweep->add_option("--rng-seed", rng_seed, "Monte Carlo seed")
        ->capture_default_str();
    sweep->add_option("--out", out_path, "Output report CSV")->required();

    CLI::App* validate =
        app.add_subcommand("validate", "Monte Carlo check of an exported plan");
    validate->add_option("scenario", scenario_path, "Scenario JSON file")
        ->required();
    validate->add_option("plan", plan_path, "Plan CSV from solve")->required();
    validate->add_option("--rollouts", rollouts, "Monte Carlo rollouts")
        ->required();
    validate->add_option("--rng-seed", rng_seed, "Monte Carlo seed")->required();
    validate->add_option("--out", out_path, "Output report CSV")->required();

    CLI::App* seed = app.add_subcommand("seed", "Inspect scenario seeds");
    seed->add_option("scenario", scenario_path, "Scenario JSON file")->required();
    seed->add_flag("--list", list_seeds, "Print available homotopy seeds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (solve->parsed())
            return run_solve(scenario_path, eta, strategy, delta, Delta,
                             delta_opt->count() > 0, seed_label, out_path, g);
        if (sweep->parsed())
            return run_sweep_cmd(scenario_path, etas_text, strategies_text,
                                 seed_labels_text, rollouts, rng_seed, out_path,
                                 g);
        if (validate->parsed())
            return run_validate(scenario_path, plan_path, rollouts, rng_seed,
                                out_path, g);
        if (seed->parsed()) return run_seed(scenario_path, g);
    } catch (const reachplan::InfeasibleError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.get_name() << ": " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
