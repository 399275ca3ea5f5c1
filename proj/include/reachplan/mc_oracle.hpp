#pragma once

#include <cstdint>
#include <vector>

#include "reachplan/chance.hpp"
#include "reachplan/dynamics.hpp"

namespace reachplan {

struct MCReport {
    long n_rollouts = 0;
    uint64_t seed = 0;
    // Fraction of rollouts outside each obstacle at each timestep,
    // obstacles x (horizon + 1).
    Eigen::MatrixXd per_step_avoidance;
    // Fraction of rollouts outside every obstacle at every timestep.
    double joint_avoidance = 0.0;
    std::vector<StateVec> empirical_means;  // horizon + 1
    std::vector<StateCov> empirical_covs;   // horizon + 1 (sample covariance)
    std::vector<double> clamped_fraction;   // per obstacle, radius draws < 0
};

// Samples `n` rollouts of the noisy system, one radius draw per obstacle per
// rollout (clamped at zero), and reports avoidance frequencies and empirical
// state moments. Noise is drawn from counter-based substreams keyed by
// (rollout, timestep), and sums are reduced over fixed-size rollout blocks in
// index order, so the report is bitwise identical for any thread count.
MCReport simulate(const SystemModel& sys, const StateMoments& x0,
                  const ControlSequence& controls,
                  const std::vector<Obstacle>& obstacles, long n, uint64_t seed);

// Plain single-loop reference implementation of the same contract, kept as
// the correctness baseline for the parallel kernel. Avoidance counts match
// simulate() exactly; moment sums agree to reduction-order rounding.
MCReport simulate_serial(const SystemModel& sys, const StateMoments& x0,
                         const ControlSequence& controls,
                         const std::vector<Obstacle>& obstacles, long n,
                         uint64_t seed);

struct ConstraintMomentEstimate {
    double mean = 0.0;
    double variance = 0.0;
    double fourth_central = 0.0;  // for standard-error estimates of the variance
    long n = 0;
};

// Samples the linearized collision value at one timestep by rolling out the
// noisy system directly (no analytic moment propagation on this path), with
// the radius re-sampled per rollout. Requires n >= 1000.
ConstraintMomentEstimate estimate_constraint_moments(
    const SystemModel& sys, const StateMoments& x0,
    const ControlSequence& controls, const AffineConstraint& lin, int step,
    long n, uint64_t seed);

}  // namespace reachplan
