#include "reachplan/dynamics.hpp"

#include <stdexcept>

namespace reachplan {

SystemModel make_system(double dt, int horizon, double noise_x, double noise_y) {
    if (!(dt > 0.0))
        throw std::invalid_argument("make_system: dt must be positive");
    if (horizon < 2)
        throw std::invalid_argument("make_system: horizon must be at least 2");
    if (noise_x < 0.0 || noise_y < 0.0)
        throw std::invalid_argument("make_system: noise scales must be non-negative");

    SystemModel sys;
    sys.dt = dt;
    sys.horizon = horizon;
    sys.noise_x = noise_x;
    sys.noise_y = noise_y;

    const double dt2 = dt * dt;
    const double dt3 = dt2 * dt;
    sys.A.setIdentity();
    sys.A(kX, kVX) = dt;
    sys.A(kY, kVY) = dt;
    sys.A(kX, kAX) = 0.5 * dt2;
    sys.A(kY, kAY) = 0.5 * dt2;
    sys.A(kVX, kAX) = dt;
    sys.A(kVY, kAY) = dt;

    sys.B.setZero();
    sys.B(kX, 0) = dt3 / 6.0;
    sys.B(kVX, 0) = 0.5 * dt2;
    sys.B(kAX, 0) = dt;
    sys.B(kY, 1) = dt3 / 6.0;
    sys.B(kVY, 1) = 0.5 * dt2;
    sys.B(kAY, 1) = dt;
    return sys;
}

StateVec propagate_mean(const SystemModel& sys, const StateVec& mean,
                        const Eigen::Vector2d& u) {
    return sys.A * mean + sys.B * u;
}

StateCov propagate_covariance(const SystemModel& sys, const StateCov& cov,
                              const Eigen::Vector2d& u) {
    const double asym = (cov - cov.transpose()).cwiseAbs().maxCoeff();
    const double scale = 1.0 + cov.cwiseAbs().maxCoeff();
    if (asym > 1e-9 * scale)
        throw std::invalid_argument(
            "propagate_covariance: covariance must be symmetric");

    const Eigen::Vector2d w(sys.noise_x * u.x(), sys.noise_y * u.y());
    StateCov next = sys.A * cov * sys.A.transpose();
    next += sys.B * w.cwiseAbs2().asDiagonal() * sys.B.transpose();
    return 0.5 * (next + next.transpose());
}

MomentTrajectory rollout_moments(const SystemModel& sys, const StateMoments& x0,
                                 const ControlSequence& controls) {
    if (controls.u.rows() != sys.horizon)
        throw std::invalid_argument(
            "rollout_moments: control count must equal the horizon");

    MomentTrajectory traj;
    traj.states.resize(sys.horizon + 1);
    traj.states[0] = x0;
    for (int t = 0; t < sys.horizon; ++t) {
        const Eigen::Vector2d u = controls.u.row(t);
        traj.states[t + 1].mean = propagate_mean(sys, traj.states[t].mean, u);
        traj.states[t + 1].cov = propagate_covariance(sys, traj.states[t].cov, u);
    }
    return traj;
}

double AffineQuadraticMaps::mean_of(int comp, int t,
                                    const Eigen::VectorXd& u_stacked) const {
    return mean_coeff[comp].row(t).dot(u_stacked) + mean_const[comp](t);
}

double AffineQuadraticMaps::variance_of(int comp, int t, const SystemModel& sys,
                                        const Eigen::VectorXd& u_stacked) const {
    const double cx2 = sys.noise_x * sys.noise_x;
    const double cy2 = sys.noise_y * sys.noise_y;
    double v = var_const[comp](t);
    for (int s = 0; s < horizon; ++s) {
        const double ux = u_stacked(2 * s);
        const double uy = u_stacked(2 * s + 1);
        v += var_ux[comp](t, s) * cx2 * ux * ux;
        v += var_uy[comp](t, s) * cy2 * uy * uy;
    }
    return v;
}

AffineQuadraticMaps control_to_moment_maps(const SystemModel& sys,
                                           const StateMoments& x0) {
    const int T = sys.horizon;
    AffineQuadraticMaps maps;
    maps.horizon = T;

    // impulse[l] = A^l B: response of the state l+1 steps after a unit input.
    std::vector<Eigen::Matrix<double, 6, 2>> impulse(T);
    impulse[0] = sys.B;
    for (int l = 1; l < T; ++l) impulse[l] = sys.A * impulse[l - 1];

    Eigen::Matrix<double, 6, 6> power = Eigen::Matrix<double, 6, 6>::Identity();
    std::vector<StateVec> mean_free(T + 1);
    std::vector<StateCov> cov_free(T + 1);
    for (int t = 0; t <= T; ++t) {
        mean_free[t] = power * x0.mean;
        cov_free[t] = power * x0.cov * power.transpose();
        power = sys.A * power;
    }

    for (int i = 0; i < 6; ++i) {
        maps.mean_coeff[i] = Eigen::MatrixXd::Zero(T + 1, 2 * T);
        maps.mean_const[i] = Eigen::VectorXd::Zero(T + 1);
        maps.var_ux[i] = Eigen::MatrixXd::Zero(T + 1, T);
        maps.var_uy[i] = Eigen::MatrixXd::Zero(T + 1, T);
        maps.var_const[i] = Eigen::VectorXd::Zero(T + 1);
        for (int t = 0; t <= T; ++t) {
            maps.mean_const[i](t) = mean_free[t](i);
            maps.var_const[i](t) = cov_free[t](i, i);
        }
    }
    for (int t = 1; t <= T; ++t) {
        for (int s = 0; s < t; ++s) {
            const auto& K = impulse[t - 1 - s];
            for (int i = 0; i < 6; ++i) {
                maps.mean_coeff[i](t, 2 * s) = K(i, 0);
                maps.mean_coeff[i](t, 2 * s + 1) = K(i, 1);
                maps.var_ux[i](t, s) = K(i, 0) * K(i, 0);
                maps.var_uy[i](t, s) = K(i, 1) * K(i, 1);
            }
        }
    }
    return maps;
}

Eigen::VectorXd stack_controls(const ControlSequence& controls) {
    const int T = int(controls.u.rows());
    Eigen::VectorXd u(2 * T);
    for (int t = 0; t < T; ++t) {
        u(2 * t) = controls.u(t, 0);
        u(2 * t + 1) = controls.u(t, 1);
    }
    return u;
}

ControlSequence unstack_controls(const Eigen::VectorXd& u_stacked) {
    if (u_stacked.size() % 2 != 0)
        throw std::invalid_argument("unstack_controls: stacked size must be even");
    const int T = int(u_stacked.size() / 2);
    ControlSequence controls;
    controls.u.resize(T, 2);
    for (int t = 0; t < T; ++t) {
        controls.u(t, 0) = u_stacked(2 * t);
        controls.u(t, 1) = u_stacked(2 * t + 1);
    }
    return controls;
}

}  // namespace reachplan
