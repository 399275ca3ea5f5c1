#include "reachplan/sqp.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace reachplan {

namespace {

// Linearization reference for (obstacle, t), nudged off the obstacle center
// when the reference degenerates there.
AffineConstraint linearize_at(const Obstacle& obs, double x, double y) {
    if (std::hypot(x - obs.mu_x, y - obs.mu_y) < 1e-9) x += 1e-6;
    return linearize(obs, x, y);
}

std::vector<std::vector<AffineConstraint>> linearize_all(
    const std::vector<Obstacle>& obstacles, const Eigen::MatrixXd& ref) {
    const int T = int(ref.rows()) - 1;
    std::vector<std::vector<AffineConstraint>> lins(obstacles.size());
    for (size_t j = 0; j < obstacles.size(); ++j) {
        lins[j].reserve(T);
        for (int t = 1; t <= T; ++t)
            lins[j].push_back(linearize_at(obstacles[j], ref(t, 0), ref(t, 1)));
    }
    return lins;
}

// Margins at all timesteps 0..T, each linearized at the evaluation mean
// itself, so the expected part reduces to the true collision value plus the
// radius-variance offset.
Eigen::MatrixXd margins_at(const std::vector<Obstacle>& obstacles,
                           const Eigen::MatrixXd& mean_pos,
                           const Eigen::MatrixXd& pos_var, double k) {
    const int T = int(mean_pos.rows()) - 1;
    Eigen::MatrixXd margins(obstacles.size(), T + 1);
    for (size_t j = 0; j < obstacles.size(); ++j) {
        for (int t = 0; t <= T; ++t) {
            const AffineConstraint lin =
                linearize_at(obstacles[j], mean_pos(t, 0), mean_pos(t, 1));
            const double e = expected_c(lin, mean_pos(t, 0), mean_pos(t, 1));
            const double v = variance_c(lin, pos_var(t, 0), pos_var(t, 1));
            margins(int(j), t) = surrogate_margin(e, v, k);
        }
    }
    return margins;
}

struct CostBreakdown {
    double effort = 0.0;
    double state = 0.0;
    double variance_sum = 0.0;  // unweighted positional variance sum
};

CostBreakdown evaluate_costs(const SystemModel& sys, const CostWeights& weights,
                             const ControlSequence& controls,
                             const MomentTrajectory& moments) {
    CostBreakdown costs;
    costs.effort = controls.u.squaredNorm();
    const int T = sys.horizon;
    for (int t = T - weights.cost_window + 1; t <= T; ++t) {
        const StateMoments& s = moments.states[t];
        for (int i = 0; i < 6; ++i) {
            const double err = s.mean(i) - weights.target(i);
            costs.state += weights.w(i) * (err * err + s.cov(i, i));
        }
    }
    for (int t = 0; t <= T; ++t)
        costs.variance_sum +=
            moments.states[t].cov(kX, kX) + moments.states[t].cov(kY, kY);
    return costs;
}

void check_config(const SolverConfig& config) {
    if (!(config.eta >= 0.0 && config.eta < 1.0))
        throw std::invalid_argument("solve: eta must lie in [0, 1)");
    if (config.tau0 < 0.0)
        throw std::invalid_argument("solve: tau0 must be non-negative");
    if (config.lambda0 < 0.0)
        throw std::invalid_argument("solve: lambda0 must be non-negative");
    if (!(config.delta > 0.0))
        throw std::invalid_argument("solve: delta must be positive");
    if (!(config.Delta >= 1.0))
        throw std::invalid_argument("solve: Delta must be at least 1");
    if (!(config.xi > 0.0))
        throw std::invalid_argument("solve: xi must be positive");
    if (config.max_iter < 1)
        throw std::invalid_argument("solve: max_iter must be at least 1");
}

[[noreturn]] void raise_infeasible(const QPProblem& problem,
                                   const QPSolution& sol) {
    std::vector<ConstraintTag> rows;
    std::ostringstream message;
    message << "collision constraints are jointly infeasible; certificate rows:";
    for (const auto& [row, weight] : sol.certificate) {
        const ConstraintTag tag = problem.tags[size_t(row)];
        rows.push_back(tag);
        if (tag.obstacle >= 0)
            message << " (obstacle " << tag.obstacle << ", t=" << tag.step << ")";
        else
            message << " (terminal, t=" << tag.step << ")";
        (void)weight;
    }
    throw InfeasibleError(message.str(), std::move(rows));
}

}  // namespace

std::string strategy_name(Strategy strategy) {
    switch (strategy) {
        case Strategy::kLowVelocity: return "lv";
        case Strategy::kHighClearance: return "hc";
        case Strategy::kCustom: return "custom";
    }
    return "custom";
}

Strategy strategy_from_name(const std::string& name) {
    if (name == "lv") return Strategy::kLowVelocity;
    if (name == "hc") return Strategy::kHighClearance;
    if (name == "custom") return Strategy::kCustom;
    throw std::invalid_argument("unknown strategy \"" + name +
                                "\" (expected lv, hc, or custom)");
}

std::pair<double, double> strategy_preset(Strategy strategy) {
    switch (strategy) {
        case Strategy::kLowVelocity: return {0.00005, 10.0};
        case Strategy::kHighClearance: return {0.0001, 10.0};
        case Strategy::kCustom:
            throw std::invalid_argument(
                "strategy_preset: custom strategies have no preset increments");
    }
    throw std::invalid_argument("strategy_preset: unknown strategy");
}

SolverConfig make_config(Strategy strategy, double eta) {
    SolverConfig config;
    config.strategy = strategy;
    config.eta = eta;
    if (strategy != Strategy::kCustom) {
        const auto [delta, Delta] = strategy_preset(strategy);
        config.delta = delta;
        config.Delta = Delta;
    }
    return config;
}

SeedTrajectory seed_straight(const Eigen::Vector2d& start,
                             const Eigen::Vector2d& goal, int horizon) {
    return seed_via(start, goal, {}, horizon, "straight");
}

SeedTrajectory seed_via(const Eigen::Vector2d& start, const Eigen::Vector2d& goal,
                        const std::vector<Eigen::Vector2d>& via, int horizon,
                        const std::string& label) {
    if (horizon < 2)
        throw std::invalid_argument("seed_via: horizon must be at least 2");
    std::vector<Eigen::Vector2d> knots;
    knots.push_back(start);
    knots.insert(knots.end(), via.begin(), via.end());
    knots.push_back(goal);

    std::vector<double> cum{0.0};
    for (size_t i = 1; i < knots.size(); ++i)
        cum.push_back(cum.back() + (knots[i] - knots[i - 1]).norm());
    const double total = cum.back();

    SeedTrajectory seed;
    seed.homotopy_label = label;
    seed.points.resize(horizon + 1, 2);
    if (!(total > 0.0)) {
        seed.points.rowwise() = start.transpose();
        return seed;
    }
    size_t segment = 0;
    for (int t = 0; t <= horizon; ++t) {
        const double target = total * double(t) / double(horizon);
        while (segment + 2 < knots.size() && cum[segment + 1] < target) ++segment;
        const double seg_len = cum[segment + 1] - cum[segment];
        const double alpha =
            seg_len > 0.0 ? (target - cum[segment]) / seg_len : 0.0;
        const Eigen::Vector2d p =
            knots[segment] + alpha * (knots[segment + 1] - knots[segment]);
        seed.points.row(t) = p;
    }
    return seed;
}

SeedTrajectory resolve_seed(const Scenario& scenario, const std::string& label) {
    if (label.empty() || label == "straight")
        return seed_straight(scenario.start, scenario.goal, scenario.steps);
    for (const NamedSeed& seed : scenario.seeds)
        if (seed.label == label)
            return seed_via(scenario.start, scenario.goal, seed.via,
                            scenario.steps, seed.label);
    throw std::invalid_argument("no seed labeled \"" + label +
                                "\" in the scenario");
}

PlanResult solve(const Scenario& scenario, const SeedTrajectory& seed,
                 const SolverConfig& config) {
    check_config(config);
    validate_scenario(scenario);
    const SystemModel sys = system_of(scenario);
    const int T = sys.horizon;
    if (seed.points.rows() != T + 1 || seed.points.cols() != 2)
        throw std::invalid_argument("solve: seed must have horizon + 1 points");
    if ((seed.points.row(0).transpose() - scenario.start).norm() > 1e-9 ||
        (seed.points.row(T).transpose() - scenario.goal).norm() > 1e-9)
        throw std::invalid_argument("solve: seed endpoints must match start/goal");

    const StateMoments x0 = initial_state(scenario);
    const AffineQuadraticMaps maps = control_to_moment_maps(sys, x0);
    CostWeights weights = scenario.weights;
    weights.hard_terminal = config.hard_terminal;

    PlanResult plan;
    plan.k = eta_to_k(config.eta);
    plan.eta = config.eta;
    plan.strategy = config.strategy;
    plan.homotopy_label = seed.homotopy_label;

    double tau = config.tau0;
    double lambda = config.lambda0;

    // Margins for the first continuation check: seed positions with the
    // variances of the uncontrolled rollout.
    Eigen::MatrixXd ref = seed.points;
    Eigen::MatrixXd pos_var(T + 1, 2);
    {
        ControlSequence zero;
        zero.u = Eigen::MatrixXd::Zero(T, 2);
        const MomentTrajectory free_traj = rollout_moments(sys, x0, zero);
        for (int t = 0; t <= T; ++t) {
            pos_var(t, 0) = free_traj.states[t].cov(kX, kX);
            pos_var(t, 1) = free_traj.states[t].cov(kY, kY);
        }
    }
    Eigen::MatrixXd margins = margins_at(scenario.obstacles, ref, pos_var, plan.k);
    double worst_violation = std::max(0.0, margins.size() ? margins.maxCoeff() : 0.0);

    double j_prev = std::numeric_limits<double>::quiet_NaN();
    for (int it = 1; it <= config.max_iter; ++it) {
        plan.iterations = it;
        const bool violated = margins.size() > 0 && margins.maxCoeff() > 0.0;
        if (violated) {
            tau += config.delta;
            lambda *= config.Delta;
        }

        const auto lins = linearize_all(scenario.obstacles, ref);
        const QPProblem problem =
            assemble_qp(sys, x0, weights, maps, lins, tau, lambda);
        const QPSolution sol = solve_qp(problem);
        if (sol.status == QPStatus::kInfeasible) raise_infeasible(problem, sol);

        const ControlSequence controls = unstack_controls(sol.u);
        const MomentTrajectory moments = rollout_moments(sys, x0, controls);

        Eigen::MatrixXd new_ref(T + 1, 2);
        for (int t = 0; t <= T; ++t) {
            new_ref(t, 0) = moments.states[t].mean(kX);
            new_ref(t, 1) = moments.states[t].mean(kY);
            pos_var(t, 0) = moments.states[t].cov(kX, kX);
            pos_var(t, 1) = moments.states[t].cov(kY, kY);
        }

        if (config.step_guard && margins.size() > 0) {
            double worst = 0.0;
            for (const Obstacle& obs : scenario.obstacles)
                for (int t = 0; t <= T; ++t)
                    worst = std::max(worst, eval_collision(new_ref(t, 0),
                                                           new_ref(t, 1), obs,
                                                           obs.mu_r));
            if (worst > 10.0 * std::max(worst_violation, 1e-12)) {
                // Reject the step: keep the previous reference so the next
                // iteration re-tightens from the same point.
                plan.trace.push_back({tau, lambda, j_prev, false});
                continue;
            }
            worst_violation = std::max(worst, 1e-12);
        }

        const CostBreakdown costs = evaluate_costs(sys, weights, controls, moments);
        const double j_opt = costs.effort + costs.state;

        ref = new_ref;
        margins = margins_at(scenario.obstacles, ref, pos_var, plan.k);
        const bool margins_ok = margins.size() == 0 || margins.maxCoeff() <= 0.0;

        plan.controls = controls;
        plan.moments = moments;
        plan.cost_effort = costs.effort;
        plan.cost_state = costs.state;
        plan.cost_variance = lambda * costs.variance_sum;
        plan.tau_final = tau;
        plan.lambda_final = lambda;
        plan.margins = margins;
        plan.trace.push_back({tau, lambda, j_opt, margins_ok});

        if (!std::isnan(j_prev) && std::abs(j_opt - j_prev) <= config.xi &&
            margins_ok) {
            plan.converged = true;
            break;
        }
        j_prev = j_opt;
    }
    return plan;
}

std::vector<PlanResult> solve_homotopies(const Scenario& scenario,
                                         const std::vector<SeedTrajectory>& seeds,
                                         const SolverConfig& config) {
    std::vector<PlanResult> results(seeds.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < long(seeds.size()); ++i) {
        try {
            results[size_t(i)] = solve(scenario, seeds[size_t(i)], config);
        } catch (const std::exception& e) {
            results[size_t(i)].homotopy_label = seeds[size_t(i)].homotopy_label;
            results[size_t(i)].error = e.what();
        }
    }
    return results;
}

}  // namespace reachplan
