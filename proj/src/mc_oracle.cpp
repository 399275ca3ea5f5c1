#include "reachplan/mc_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "reachplan/philox.hpp"

namespace reachplan {

namespace {

// Substream identifiers for the per-rollout counter blocks.
constexpr uint32_t kStreamControlNoise = 0;
constexpr uint32_t kStreamRadius = 1;
constexpr uint32_t kStreamInitialState = 2;

constexpr long kBlock = 4096;  // rollouts per reduction block

Eigen::Matrix<double, 6, 6> cov_sqrt(const StateCov& cov) {
    Eigen::SelfAdjointEigenSolver<StateCov> eig(cov);
    const StateVec clipped = eig.eigenvalues().cwiseMax(0.0);
    return eig.eigenvectors() * clipped.cwiseSqrt().asDiagonal() *
           eig.eigenvectors().transpose();
}

StateVec sample_initial_state(const StateMoments& x0,
                              const Eigen::Matrix<double, 6, 6>& sqrt_cov,
                              bool randomized, uint64_t seed, long rollout) {
    StateVec state = x0.mean;
    if (!randomized) return state;
    StateVec z;
    for (int i = 0; i < 3; ++i) {
        const GaussianPair g =
            gaussian_pair(seed, uint64_t(rollout), uint32_t(i), kStreamInitialState);
        z(2 * i) = g.z0;
        z(2 * i + 1) = g.z1;
    }
    state += sqrt_cov * z;
    return state;
}

double sample_radius(const Obstacle& obs, uint64_t seed, long rollout, int j,
                     bool* clamped) {
    const GaussianPair g =
        gaussian_pair(seed, uint64_t(rollout), uint32_t(j), kStreamRadius);
    double radius = obs.mu_r + obs.sigma_r * g.z0;
    *clamped = radius < 0.0;
    if (*clamped) radius = 0.0;
    return radius;
}

struct BlockAccum {
    std::vector<int64_t> avoid;    // n_obs * (T+1), time-major per obstacle
    int64_t joint = 0;
    std::vector<int64_t> clamped;  // per obstacle
    std::vector<double> sum1;      // (T+1) * 6
    std::vector<double> sum2;      // (T+1) * 36

    void init(int n_obs, int T) {
        avoid.assign(size_t(n_obs) * (T + 1), 0);
        clamped.assign(n_obs, 0);
        sum1.assign(size_t(T + 1) * 6, 0.0);
        sum2.assign(size_t(T + 1) * 36, 0.0);
    }
};

// One rollout of the noisy dynamics; shared verbatim by the parallel kernel,
// the serial reference, and the constraint-moment sampler so that a given
// (seed, rollout) index always produces the identical trajectory.
template <typename Visitor>
void run_rollout(const SystemModel& sys, const StateMoments& x0,
                 const ControlSequence& controls,
                 const Eigen::Matrix<double, 6, 6>& sqrt_cov, bool x0_random,
                 uint64_t seed, long rollout, Visitor&& visit) {
    StateVec state = sample_initial_state(x0, sqrt_cov, x0_random, seed, rollout);
    visit(0, state);
    for (int t = 0; t < sys.horizon; ++t) {
        const GaussianPair g = gaussian_pair(seed, uint64_t(rollout), uint32_t(t),
                                             kStreamControlNoise);
        const Eigen::Vector2d u(
            controls.u(t, 0) + sys.noise_x * controls.u(t, 0) * g.z0,
            controls.u(t, 1) + sys.noise_y * controls.u(t, 1) * g.z1);
        state = sys.A * state + sys.B * u;
        visit(t + 1, state);
    }
}

void run_block(const SystemModel& sys, const StateMoments& x0,
               const ControlSequence& controls,
               const std::vector<Obstacle>& obstacles,
               const Eigen::Matrix<double, 6, 6>& sqrt_cov, bool x0_random,
               uint64_t seed, long first, long count, BlockAccum& acc) {
    const int T = sys.horizon;
    const int n_obs = int(obstacles.size());
    acc.init(n_obs, T);
    std::vector<double> radii(n_obs);
    for (long r = first; r < first + count; ++r) {
        for (int j = 0; j < n_obs; ++j) {
            bool clamped = false;
            radii[j] = sample_radius(obstacles[j], seed, r, j, &clamped);
            if (clamped) ++acc.clamped[j];
        }
        bool joint_ok = true;
        run_rollout(sys, x0, controls, sqrt_cov, x0_random, seed, r,
                    [&](int t, const StateVec& state) {
                        double* s1 = acc.sum1.data() + size_t(t) * 6;
                        double* s2 = acc.sum2.data() + size_t(t) * 36;
                        for (int i = 0; i < 6; ++i) {
                            s1[i] += state(i);
                            for (int k = 0; k < 6; ++k)
                                s2[i * 6 + k] += state(i) * state(k);
                        }
                        for (int j = 0; j < n_obs; ++j) {
                            const bool avoided =
                                eval_collision(state(kX), state(kY), obstacles[j],
                                               radii[j]) <= 0.0;
                            if (avoided)
                                ++acc.avoid[size_t(j) * (T + 1) + t];
                            else
                                joint_ok = false;
                        }
                    });
        if (joint_ok) ++acc.joint;
    }
}

MCReport reduce_blocks(const SystemModel& sys,
                       const std::vector<Obstacle>& obstacles,
                       const std::vector<BlockAccum>& blocks, long n,
                       uint64_t seed) {
    const int T = sys.horizon;
    const int n_obs = int(obstacles.size());
    MCReport report;
    report.n_rollouts = n;
    report.seed = seed;

    BlockAccum total;
    total.init(n_obs, T);
    for (const BlockAccum& b : blocks) {
        for (size_t i = 0; i < total.avoid.size(); ++i) total.avoid[i] += b.avoid[i];
        for (size_t i = 0; i < total.clamped.size(); ++i)
            total.clamped[i] += b.clamped[i];
        for (size_t i = 0; i < total.sum1.size(); ++i) total.sum1[i] += b.sum1[i];
        for (size_t i = 0; i < total.sum2.size(); ++i) total.sum2[i] += b.sum2[i];
        total.joint += b.joint;
    }

    report.per_step_avoidance.resize(n_obs, T + 1);
    for (int j = 0; j < n_obs; ++j)
        for (int t = 0; t <= T; ++t)
            report.per_step_avoidance(j, t) =
                double(total.avoid[size_t(j) * (T + 1) + t]) / double(n);
    report.joint_avoidance = double(total.joint) / double(n);
    report.clamped_fraction.resize(n_obs);
    for (int j = 0; j < n_obs; ++j)
        report.clamped_fraction[j] = double(total.clamped[j]) / double(n);

    report.empirical_means.resize(T + 1);
    report.empirical_covs.resize(T + 1);
    for (int t = 0; t <= T; ++t) {
        StateVec mean;
        for (int i = 0; i < 6; ++i)
            mean(i) = total.sum1[size_t(t) * 6 + i] / double(n);
        StateCov cov;
        for (int i = 0; i < 6; ++i)
            for (int k = 0; k < 6; ++k) {
                const double raw = total.sum2[size_t(t) * 36 + i * 6 + k];
                cov(i, k) = (raw - double(n) * mean(i) * mean(k)) /
                            double(std::max<long>(n - 1, 1));
            }
        report.empirical_means[t] = mean;
        report.empirical_covs[t] = 0.5 * (cov + cov.transpose());
    }
    return report;
}

void check_inputs(const SystemModel& sys, const ControlSequence& controls,
                  long n) {
    if (n < 1) throw std::invalid_argument("simulate: need at least one rollout");
    if (controls.u.rows() != sys.horizon)
        throw std::invalid_argument("simulate: control count must equal the horizon");
}

}  // namespace

MCReport simulate(const SystemModel& sys, const StateMoments& x0,
                  const ControlSequence& controls,
                  const std::vector<Obstacle>& obstacles, long n, uint64_t seed) {
    check_inputs(sys, controls, n);
    const bool x0_random = x0.cov.cwiseAbs().maxCoeff() > 0.0;
    const Eigen::Matrix<double, 6, 6> sqrt_cov =
        x0_random ? cov_sqrt(x0.cov) : Eigen::Matrix<double, 6, 6>::Zero().eval();

    const long nblocks = (n + kBlock - 1) / kBlock;
    std::vector<BlockAccum> blocks(static_cast<size_t>(nblocks));
#pragma omp parallel for schedule(static)
    for (long b = 0; b < nblocks; ++b) {
        const long first = b * kBlock;
        run_block(sys, x0, controls, obstacles, sqrt_cov, x0_random, seed, first,
                  std::min(kBlock, n - first), blocks[size_t(b)]);
    }
    return reduce_blocks(sys, obstacles, blocks, n, seed);
}

MCReport simulate_serial(const SystemModel& sys, const StateMoments& x0,
                         const ControlSequence& controls,
                         const std::vector<Obstacle>& obstacles, long n,
                         uint64_t seed) {
    check_inputs(sys, controls, n);
    const bool x0_random = x0.cov.cwiseAbs().maxCoeff() > 0.0;
    const Eigen::Matrix<double, 6, 6> sqrt_cov =
        x0_random ? cov_sqrt(x0.cov) : Eigen::Matrix<double, 6, 6>::Zero().eval();

    std::vector<BlockAccum> one(1);
    run_block(sys, x0, controls, obstacles, sqrt_cov, x0_random, seed, 0, n,
              one[0]);
    return reduce_blocks(sys, obstacles, one, n, seed);
}

ConstraintMomentEstimate estimate_constraint_moments(
    const SystemModel& sys, const StateMoments& x0,
    const ControlSequence& controls, const AffineConstraint& lin, int step,
    long n, uint64_t seed) {
    check_inputs(sys, controls, n);
    if (n < 1000)
        throw std::invalid_argument(
            "estimate_constraint_moments: need at least 1000 samples");
    if (step < 0 || step > sys.horizon)
        throw std::invalid_argument("estimate_constraint_moments: step out of range");

    const bool x0_random = x0.cov.cwiseAbs().maxCoeff() > 0.0;
    const Eigen::Matrix<double, 6, 6> sqrt_cov =
        x0_random ? cov_sqrt(x0.cov) : Eigen::Matrix<double, 6, 6>::Zero().eval();
    const Obstacle& obs = lin.obstacle;
    const double mu_r2 = obs.mu_r * obs.mu_r;

    auto sample_value = [&](long r) {
        bool clamped = false;
        const double radius = sample_radius(obs, seed, r, 0, &clamped);
        double value = 0.0;
        run_rollout(sys, x0, controls, sqrt_cov, x0_random, seed, r,
                    [&](int t, const StateVec& state) {
                        if (t != step) return;
                        // Linearized collision value with the sampled radius:
                        // replace the mu_r^2 inside b by radius^2.
                        value = lin.a_x * (state(kX) - lin.ref_x) +
                                lin.a_y * (state(kY) - lin.ref_y) + lin.b -
                                mu_r2 + radius * radius;
                    });
        return value;
    };

    // Shift by the first sample to keep the raw power sums well conditioned.
    const double shift = sample_value(0);

    const long nblocks = (n + kBlock - 1) / kBlock;
    std::vector<std::array<double, 4>> sums(size_t(nblocks), {0.0, 0.0, 0.0, 0.0});
#pragma omp parallel for schedule(static)
    for (long b = 0; b < nblocks; ++b) {
        const long first = b * kBlock;
        const long count = std::min(kBlock, n - first);
        std::array<double, 4>& s = sums[size_t(b)];
        for (long r = first; r < first + count; ++r) {
            const double v = sample_value(r) - shift;
            const double v2 = v * v;
            s[0] += v;
            s[1] += v2;
            s[2] += v2 * v;
            s[3] += v2 * v2;
        }
    }
    std::array<double, 4> total = {0.0, 0.0, 0.0, 0.0};
    for (const auto& s : sums)
        for (int i = 0; i < 4; ++i) total[i] += s[i];

    ConstraintMomentEstimate est;
    est.n = n;
    const double m1 = total[0] / double(n);
    const double m2 = total[1] / double(n);
    const double m3 = total[2] / double(n);
    const double m4 = total[3] / double(n);
    est.mean = shift + m1;
    const double c2 = m2 - m1 * m1;
    est.variance = c2 * double(n) / double(n - 1);
    est.fourth_central =
        m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1 * m1 * m1 * m1;
    return est;
}

}  // namespace reachplan
