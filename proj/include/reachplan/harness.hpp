#pragma once

#include <string>
#include <vector>

#include "reachplan/mc_oracle.hpp"
#include "reachplan/scenario.hpp"
#include "reachplan/sqp.hpp"

namespace reachplan {

struct SweepSpec {
    Scenario scenario;
    std::vector<double> eta_values;  // strictly increasing, within [0.5, 0.995]
    std::vector<Strategy> strategies;
    std::vector<std::string> seed_labels;  // resolved against the scenario
    long mc_rollouts = 100000;
    uint64_t mc_seed = 1;
    double xi = 1e-4;
    int max_iter = 200;
};

struct SweepRow {
    double eta = 0.0;
    Strategy strategy = Strategy::kCustom;
    std::string homotopy_label;
    double j_u = 0.0;      // effort cost
    double j_total = 0.0;  // effort + state + variance penalty
    double min_clearance = 0.0;
    double time_of_peak_speed = 0.0;  // fraction of the horizon
    double mc_per_step_min = 0.0;
    bool converged = false;
    std::string error;
};

struct SweepReport {
    std::vector<SweepRow> rows;
};

// Solves and Monte Carlo-validates every (eta, strategy, seed) cell. Failed
// cells keep their row with converged=false and the error recorded.
SweepReport run_sweep(const SweepSpec& spec);

// Minimum over timesteps and obstacles of (distance from the mean position to
// the obstacle center − mean radius).
double min_clearance(const MomentTrajectory& moments,
                     const std::vector<Obstacle>& obstacles);

// Index of the fastest mean speed as a fraction of the horizon; earliest
// timestep wins ties.
double time_of_peak_speed(const MomentTrajectory& moments);

struct CurveSelector {
    Strategy strategy = Strategy::kCustom;
    std::string homotopy_label;  // empty matches any label
};

struct RatioCurve {
    std::vector<std::pair<double, double>> points;  // (eta, cost ratio)
    std::vector<std::string> warnings;              // skipped grid points
};

// Per-eta ratio of effort costs between two converged row selections;
// grid points where either side is missing or unconverged are skipped with a
// warning.
RatioCurve ratio_curve(const SweepReport& report, const CurveSelector& numerator,
                       const CurveSelector& denominator);

// report.csv plus one <stem>_<strategy>_<label>.csv per curve with columns
// eta, J_U, J_total, min_clearance, time_of_peak_speed, mc_per_step_min.
void export_sweep(const SweepReport& report, const std::string& path);

}  // namespace reachplan
