#pragma once

#include <optional>
#include <string>
#include <vector>

#include "reachplan/chance.hpp"
#include "reachplan/dynamics.hpp"
#include "reachplan/qp.hpp"

namespace reachplan {

struct NamedSeed {
    std::string label;
    std::vector<Eigen::Vector2d> via;  // interior waypoints between start and goal
};

// A planning problem: endpoints, obstacle field, system parameters, cost
// weights, and optional homotopy seed waypoints. Mirrors the JSON scenario
// format documented in the README.
struct Scenario {
    Eigen::Vector2d start = Eigen::Vector2d::Zero();
    Eigen::Vector2d goal = Eigen::Vector2d::Zero();
    std::vector<Obstacle> obstacles;
    double dt = 0.01;
    int steps = 100;
    double noise_x = 0.15;
    double noise_y = 0.15;
    CostWeights weights;
    std::vector<NamedSeed> seeds;
    // Optional replacement for the default initial condition (start position,
    // zero velocity/acceleration, zero covariance).
    std::optional<StateMoments> initial_override;
};

// Cost weights used when a scenario file has no "weights" object; target
// defaults to the goal position at rest and the window to the full horizon.
CostWeights default_weights(const Eigen::Vector2d& goal, int steps);

StateMoments initial_state(const Scenario& scenario);
SystemModel system_of(const Scenario& scenario);

// Throws std::invalid_argument naming the violated rule: distinct endpoints,
// positive radii, radius_std <= radius_mean / 3, goal outside every mean
// disc, positive dt, steps >= 2, non-negative noise and weights, window in
// [1, steps].
void validate_scenario(const Scenario& scenario);

// Parses and validates a scenario file. Unknown keys are an error in strict
// mode; with lax=true they are reported through `warnings` instead. Parse
// errors carry line/column positions.
Scenario load_scenario(const std::string& path, bool lax = false,
                       std::vector<std::string>* warnings = nullptr);

void save_scenario(const Scenario& scenario, const std::string& path);

}  // namespace reachplan
