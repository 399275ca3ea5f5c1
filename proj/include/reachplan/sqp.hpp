#pragma once

#include <string>
#include <vector>

#include "reachplan/chance.hpp"
#include "reachplan/dynamics.hpp"
#include "reachplan/qp.hpp"
#include "reachplan/scenario.hpp"

namespace reachplan {

enum class Strategy { kLowVelocity, kHighClearance, kCustom };

std::string strategy_name(Strategy strategy);
Strategy strategy_from_name(const std::string& name);

// Continuation increments (delta for tau, Delta for lambda) of the named
// preset; throws for kCustom, whose increments are caller-supplied.
std::pair<double, double> strategy_preset(Strategy strategy);

struct SolverConfig {
    double eta = 0.9;       // per-constraint avoidance target, in [0, 1)
    double tau0 = 0.0;      // initial constraint tightening
    double lambda0 = 1.0;   // initial variance penalty
    double delta = 0.0;     // additive tau increment per violated iteration
    double Delta = 1.0;     // multiplicative lambda increment, >= 1
    double xi = 1e-4;       // convergence threshold on |change in J|
    int max_iter = 200;
    Strategy strategy = Strategy::kCustom;
    bool hard_terminal = false;
    // Optional guard that rejects steps increasing the worst true collision
    // value more than tenfold; off by default.
    bool step_guard = false;
};

SolverConfig make_config(Strategy strategy, double eta);

struct SeedTrajectory {
    Eigen::MatrixXd points;  // (horizon + 1) x 2 reference positions
    std::string homotopy_label;
};

SeedTrajectory seed_straight(const Eigen::Vector2d& start,
                             const Eigen::Vector2d& goal, int horizon);

// Piecewise-linear polyline start -> via... -> goal, resampled at uniform
// arc length into horizon + 1 points.
SeedTrajectory seed_via(const Eigen::Vector2d& start, const Eigen::Vector2d& goal,
                        const std::vector<Eigen::Vector2d>& via, int horizon,
                        const std::string& label = "via");

struct IterationRecord {
    double tau = 0.0;
    double lambda = 0.0;
    double j_opt = 0.0;
    bool margins_ok = false;
};

struct PlanResult {
    ControlSequence controls;
    MomentTrajectory moments;
    double cost_effort = 0.0;    // ||u||^2
    double cost_state = 0.0;     // expected state cost over the window
    double cost_variance = 0.0;  // lambda * summed positional variances
    double tau_final = 0.0;
    double lambda_final = 0.0;
    double k = 0.0;
    double eta = 0.0;
    int iterations = 0;
    bool converged = false;
    // Surrogate margins at the returned trajectory, linearized at its own
    // mean positions: obstacles x (horizon + 1). Converged plans have every
    // entry <= 0.
    Eigen::MatrixXd margins;
    Strategy strategy = Strategy::kCustom;
    std::string homotopy_label;
    std::vector<IterationRecord> trace;
    std::string error;  // non-empty when a batch solve failed on this seed
};

// Raised when a continuation step produces an infeasible QP; `rows` names the
// (obstacle, timestep) constraints in the infeasibility certificate.
struct InfeasibleError : std::runtime_error {
    InfeasibleError(const std::string& message, std::vector<ConstraintTag> rows_)
        : std::runtime_error(message), rows(std::move(rows_)) {}
    std::vector<ConstraintTag> rows;
};

// Successive convexification with continuation: linearize the collision
// constraints at the reference, tighten (tau, lambda) while any surrogate
// margin is positive, solve the QP, move the reference to the new mean
// positions, and stop once the objective settles with all margins
// non-positive.
PlanResult solve(const Scenario& scenario, const SeedTrajectory& seed,
                 const SolverConfig& config);

// Solves one plan per seed (in parallel when OpenMP is available). Per-seed
// failures are reported in the result's `error` field and do not abort the
// batch; result order matches seed order.
std::vector<PlanResult> solve_homotopies(const Scenario& scenario,
                                         const std::vector<SeedTrajectory>& seeds,
                                         const SolverConfig& config);

// Seed listed in the scenario (or the built-in "straight") resolved to a
// trajectory for its horizon.
SeedTrajectory resolve_seed(const Scenario& scenario, const std::string& label);

}  // namespace reachplan
