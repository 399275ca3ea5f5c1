#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

namespace reachplan {

// State ordering used throughout: (x, y, xd, yd, xdd, ydd).
enum StateIndex { kX = 0, kY = 1, kVX = 2, kVY = 3, kAX = 4, kAY = 5 };

using StateVec = Eigen::Matrix<double, 6, 1>;
using StateCov = Eigen::Matrix<double, 6, 6>;

// Exact zero-order-hold discretization of a per-axis triple integrator driven
// by jerk, two decoupled axes stacked into one 6-state system. The commanded
// jerk is corrupted by zero-mean noise whose standard deviation scales with
// the command itself: std(eps_x) = noise_x * |u_x| per step.
struct SystemModel {
    double dt = 0.0;
    int horizon = 0;  // number of control steps T; trajectories have T+1 states
    double noise_x = 0.0;
    double noise_y = 0.0;
    Eigen::Matrix<double, 6, 6> A;
    Eigen::Matrix<double, 6, 2> B;
};

struct StateMoments {
    StateVec mean = StateVec::Zero();
    StateCov cov = StateCov::Zero();
};

// One row per control step: column 0 = u_x, column 1 = u_y.
struct ControlSequence {
    Eigen::Matrix<double, Eigen::Dynamic, 2> u;
};

struct MomentTrajectory {
    std::vector<StateMoments> states;  // horizon + 1 entries
};

SystemModel make_system(double dt, int horizon, double noise_x, double noise_y);

StateVec propagate_mean(const SystemModel& sys, const StateVec& mean,
                        const Eigen::Vector2d& u);

// One covariance step: A S A^T + B W(u) B^T with W(u) the signal-dependent
// per-step noise variance diag(noise_x^2 u_x^2, noise_y^2 u_y^2). Rejects
// asymmetric input.
StateCov propagate_covariance(const SystemModel& sys, const StateCov& cov,
                              const Eigen::Vector2d& u);

MomentTrajectory rollout_moments(const SystemModel& sys, const StateMoments& x0,
                                 const ControlSequence& controls);

// Closed-form maps from the stacked control vector to per-timestep moments.
// Stacked layout is step-major: (u_x(0), u_y(0), u_x(1), u_y(1), ...).
// For every state component i:
//   mean_i(t)     = mean_coeff[i].row(t) * u_stacked + mean_const[i](t)
//   variance_i(t) = var_const[i](t)
//                   + sum_s var_ux[i](t,s) * (noise_x * u_x(s))^2
//                   + sum_s var_uy[i](t,s) * (noise_y * u_y(s))^2
// Variance weights are squared impulse responses, hence non-negative, and zero
// for s >= t (a later control cannot affect an earlier state).
struct AffineQuadraticMaps {
    int horizon = 0;
    std::array<Eigen::MatrixXd, 6> mean_coeff;  // (T+1) x 2T
    std::array<Eigen::VectorXd, 6> mean_const;  // T+1
    std::array<Eigen::MatrixXd, 6> var_ux;      // (T+1) x T
    std::array<Eigen::MatrixXd, 6> var_uy;      // (T+1) x T
    std::array<Eigen::VectorXd, 6> var_const;   // T+1

    double mean_of(int comp, int t, const Eigen::VectorXd& u_stacked) const;
    double variance_of(int comp, int t, const SystemModel& sys,
                       const Eigen::VectorXd& u_stacked) const;
};

AffineQuadraticMaps control_to_moment_maps(const SystemModel& sys,
                                           const StateMoments& x0);

Eigen::VectorXd stack_controls(const ControlSequence& controls);
ControlSequence unstack_controls(const Eigen::VectorXd& u_stacked);

}  // namespace reachplan
