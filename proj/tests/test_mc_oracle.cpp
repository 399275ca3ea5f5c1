#include <doctest.h>

#include <reachplan/mc_oracle.hpp>
#include <reachplan/philox.hpp>

#include <cmath>

using namespace reachplan;

namespace {

ControlSequence swerve_controls(int horizon, double scale) {
    ControlSequence ctl;
    ctl.u.resize(horizon, 2);
    for (int t = 0; t < horizon; ++t) {
        const double phase = double(t) / double(horizon);
        ctl.u(t, 0) = scale * (1.0 - phase);
        ctl.u(t, 1) = scale * 0.4 * std::sin(6.28 * phase);
    }
    return ctl;
}

}  // namespace

TEST_CASE("parallel and serial kernels agree") {
    const SystemModel sys = make_system(0.05, 25, 0.2, 0.15);
    StateMoments x0;
    x0.mean << 0.0, 0.0, 0.1, 0.0, 0.0, 0.0;
    const ControlSequence ctl = swerve_controls(25, 0.8);
    const std::vector<Obstacle> obstacles{{0.12, 0.02, 0.04, 0.008},
                                          {0.05, -0.03, 0.02, 0.002}};
    const long n = 30000;
    const MCReport par = simulate(sys, x0, ctl, obstacles, n, 42);
    const MCReport ser = simulate_serial(sys, x0, ctl, obstacles, n, 42);

    // Avoidance and clamp counts are integer totals, identical bit for bit.
    CHECK((par.per_step_avoidance - ser.per_step_avoidance)
              .cwiseAbs()
              .maxCoeff()
          == 0.0);
    CHECK(par.joint_avoidance == ser.joint_avoidance);
    REQUIRE(par.clamped_fraction.size() == 2);
    CHECK(par.clamped_fraction[0] == ser.clamped_fraction[0]);
    CHECK(par.clamped_fraction[1] == ser.clamped_fraction[1]);

    REQUIRE(par.empirical_means.size() == 26);
    for (int t = 0; t <= 25; ++t) {
        CHECK((par.empirical_means[t] - ser.empirical_means[t])
                  .cwiseAbs()
                  .maxCoeff()
              < 1e-12);
        CHECK((par.empirical_covs[t] - ser.empirical_covs[t])
                  .cwiseAbs()
                  .maxCoeff()
              < 1e-12);
    }
}

TEST_CASE("identical seeds reproduce the report exactly") {
    const SystemModel sys = make_system(0.05, 15, 0.25, 0.25);
    const ControlSequence ctl = swerve_controls(15, 0.5);
    const std::vector<Obstacle> obstacles{{0.04, 0.0, 0.02, 0.003}};
    const MCReport a = simulate(sys, StateMoments{}, ctl, obstacles, 20000, 7);
    const MCReport b = simulate(sys, StateMoments{}, ctl, obstacles, 20000, 7);
    CHECK((a.per_step_avoidance - b.per_step_avoidance).cwiseAbs().maxCoeff()
          == 0.0);
    for (int t = 0; t <= 15; ++t) {
        CHECK((a.empirical_means[t] - b.empirical_means[t]).cwiseAbs().maxCoeff()
              == 0.0);
        CHECK((a.empirical_covs[t] - b.empirical_covs[t]).cwiseAbs().maxCoeff()
              == 0.0);
    }

    const MCReport c = simulate(sys, StateMoments{}, ctl, obstacles, 20000, 8);
    CHECK((a.empirical_means[15] - c.empirical_means[15]).cwiseAbs().maxCoeff()
          > 0.0);
}

TEST_CASE("sample moments track the analytic recursion") {
    const SystemModel sys = make_system(0.04, 30, 0.2, 0.1);
    StateMoments x0;
    x0.mean << 0.02, -0.01, 0.15, 0.05, 0.0, 0.0;
    const ControlSequence ctl = swerve_controls(30, 1.2);
    const long n = 40000;
    const MCReport rep = simulate(sys, x0, ctl, {}, n, 3);
    const MomentTrajectory traj = rollout_moments(sys, x0, ctl);

    for (int t : {5, 15, 30}) {
        const StateVec& mean = traj.states[t].mean;
        const StateCov& cov = traj.states[t].cov;
        for (int i = 0; i < 6; ++i) {
            const double se = std::sqrt(std::max(cov(i, i), 0.0) / double(n));
            CHECK(std::abs(rep.empirical_means[t](i) - mean(i))
                  <= 5.0 * se + 1e-12);
        }
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) {
                const double spread =
                    std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j))
                              / double(n - 1));
                CHECK(std::abs(rep.empirical_covs[t](i, j) - cov(i, j))
                      <= 5.0 * spread + 1e-12);
            }
    }
}

TEST_CASE("zero noise collapses the sample spread") {
    const SystemModel sys = make_system(0.05, 10, 0.0, 0.0);
    const ControlSequence ctl = swerve_controls(10, 0.6);
    const MCReport rep = simulate(sys, StateMoments{}, ctl, {}, 5000, 1);
    const MomentTrajectory traj = rollout_moments(sys, StateMoments{}, ctl);
    for (int t = 0; t <= 10; ++t) {
        CHECK((rep.empirical_means[t] - traj.states[t].mean)
                  .cwiseAbs()
                  .maxCoeff()
              < 1e-12);
        CHECK(rep.empirical_covs[t].cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("avoidance frequencies hit the obvious extremes") {
    const SystemModel sys = make_system(0.05, 10, 0.1, 0.1);
    const ControlSequence ctl = swerve_controls(10, 0.2);
    // One disc covers the start, another sits far away.
    const std::vector<Obstacle> obstacles{{0.0, 0.0, 0.05, 0.0},
                                          {5.0, 5.0, 0.1, 0.01}};
    const MCReport rep = simulate(sys, StateMoments{}, ctl, obstacles, 4000, 2);
    CHECK(rep.per_step_avoidance(0, 0) == 0.0);
    for (int t = 0; t <= 10; ++t)
        CHECK(rep.per_step_avoidance(1, t) == 1.0);
    CHECK(rep.joint_avoidance == 0.0);
    CHECK(rep.n_rollouts == 4000);
    CHECK(rep.seed == 2);
}

TEST_CASE("radius clamping happens at the documented rate") {
    const SystemModel sys = make_system(0.05, 4, 0.0, 0.0);
    ControlSequence ctl;
    ctl.u = Eigen::MatrixXd::Zero(4, 2);
    const std::vector<Obstacle> obstacles{{1.0, 1.0, 0.3, 0.1},
                                          {1.0, -1.0, 0.3, 0.0}};
    const long n = 200000;
    const MCReport rep = simulate(sys, StateMoments{}, ctl, obstacles, n, 5);
    // Pr(R < 0) at sigma = mu/3 is the 3-sigma tail, about 1.35e-3.
    CHECK(rep.clamped_fraction[0] > 0.0005);
    CHECK(rep.clamped_fraction[0] < 0.0030);
    CHECK(rep.clamped_fraction[1] == 0.0);
}

TEST_CASE("rollout count and horizon are validated") {
    const SystemModel sys = make_system(0.05, 4, 0.1, 0.1);
    ControlSequence ctl;
    ctl.u = Eigen::MatrixXd::Zero(4, 2);
    CHECK_THROWS_AS(simulate(sys, StateMoments{}, ctl, {}, 0, 1),
                    std::invalid_argument);
    ControlSequence short_ctl;
    short_ctl.u = Eigen::MatrixXd::Zero(3, 2);
    CHECK_THROWS_AS(simulate(sys, StateMoments{}, short_ctl, {}, 100, 1),
                    std::invalid_argument);
}

TEST_CASE("constraint moment sampling matches the closed forms") {
    const SystemModel sys = make_system(0.05, 15, 0.15, 0.1);
    StateMoments x0;
    x0.mean << 0.1, -0.05, 0.2, 0.1, 0.0, 0.0;
    ControlSequence ctl;
    ctl.u.resize(15, 2);
    ctl.u.col(0).setConstant(0.3);
    ctl.u.col(1).setConstant(-0.2);
    const Obstacle obs{0.6, 0.1, 0.2, 0.05};
    const AffineConstraint lin = linearize(obs, 0.2, -0.1);
    const int step = 12;
    const long n = 200000;
    const ConstraintMomentEstimate est =
        estimate_constraint_moments(sys, x0, ctl, lin, step, n, 7);
    REQUIRE(est.n == n);

    const MomentTrajectory traj = rollout_moments(sys, x0, ctl);
    const double mean = expected_c(lin, traj.states[step].mean(kX),
                                   traj.states[step].mean(kY));
    const double var = variance_c(lin, traj.states[step].cov(kX, kX),
                                  traj.states[step].cov(kY, kY));
    const double mean_se = std::sqrt(est.variance / double(n));
    CHECK(std::abs(est.mean - mean) <= 5.0 * mean_se);
    const double var_se =
        std::sqrt(std::max(est.fourth_central - est.variance * est.variance, 0.0)
                  / double(n));
    CHECK(std::abs(est.variance - var) <= 5.0 * var_se);
    CHECK(est.fourth_central > 0.0);
}

TEST_CASE("constraint moment sampling validates its inputs") {
    const SystemModel sys = make_system(0.05, 10, 0.1, 0.1);
    ControlSequence ctl;
    ctl.u = Eigen::MatrixXd::Zero(10, 2);
    const Obstacle obs{1.0, 0.0, 0.2, 0.01};
    const AffineConstraint lin = linearize(obs, 0.0, 0.0);
    CHECK_THROWS_AS(
        estimate_constraint_moments(sys, StateMoments{}, ctl, lin, 5, 999, 1),
        std::invalid_argument);
    CHECK_THROWS_AS(
        estimate_constraint_moments(sys, StateMoments{}, ctl, lin, 11, 2000, 1),
        std::invalid_argument);
    CHECK_THROWS_AS(
        estimate_constraint_moments(sys, StateMoments{}, ctl, lin, -1, 2000, 1),
        std::invalid_argument);
}
