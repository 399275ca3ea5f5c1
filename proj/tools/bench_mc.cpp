// Times the OpenMP Monte Carlo kernel against the serial reference on the
// same workload and cross-checks that both produce identical avoidance counts.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "reachplan/mc_oracle.hpp"

using namespace reachplan;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

}  // namespace

int main(int argc, char** argv) {
    long n = 200000;
    int steps = 100;
    if (argc > 1) n = std::atol(argv[1]);
    if (argc > 2) steps = std::atoi(argv[2]);
    if (n < 1000 || steps < 2) {
        std::fprintf(stderr, "usage: bench_mc [rollouts >= 1000] [steps >= 2]\n");
        return 1;
    }

    const SystemModel sys = make_system(0.01, steps, 0.15, 0.15);
    StateMoments x0;
    x0.mean.setZero();
    x0.cov.setZero();

    ControlSequence controls;
    controls.u.resize(steps, 2);
    for (int t = 0; t < steps; ++t) {
        controls.u(t, 0) = 20.0 * std::sin(0.07 * t + 0.3);
        controls.u(t, 1) = 12.0 * std::cos(0.05 * t);
    }

    std::vector<Obstacle> obstacles{{0.05, 0.01, 0.04, 0.002},
                                    {0.12, -0.03, 0.05, 0.001}};
    const uint64_t seed = 2026;

#ifdef _OPENMP
    std::printf("omp max threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; both kernels run serially\n");
#endif
    std::printf("workload: %ld rollouts, %d steps, %zu obstacles\n", n, steps,
                obstacles.size());

    auto t0 = std::chrono::steady_clock::now();
    const MCReport serial = simulate_serial(sys, x0, controls, obstacles, n, seed);
    const double serial_s = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    const MCReport parallel = simulate(sys, x0, controls, obstacles, n, seed);
    const double parallel_s = seconds_since(t0);

    std::printf("serial reference: %8.3f s  (%.3g rollout-steps/s)\n", serial_s,
                double(n) * steps / serial_s);
    std::printf("parallel kernel:  %8.3f s  (%.3g rollout-steps/s)\n", parallel_s,
                double(n) * steps / parallel_s);
    std::printf("speedup: %.2fx\n", serial_s / parallel_s);

    const bool counts_match =
        serial.per_step_avoidance == parallel.per_step_avoidance &&
        serial.joint_avoidance == parallel.joint_avoidance;
    std::printf("avoidance counts identical: %s\n", counts_match ? "yes" : "NO");
    std::printf("joint avoidance: %.6f\n", parallel.joint_avoidance);
    return counts_match ? 0 : 1;
}
