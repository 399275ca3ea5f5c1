#include "reachplan/chance.hpp"

#include <cmath>

namespace reachplan {

double eval_collision(double x, double y, const Obstacle& obs, double radius) {
    const double dx = x - obs.mu_x;
    const double dy = y - obs.mu_y;
    return -dx * dx - dy * dy + radius * radius;
}

AffineConstraint linearize(const Obstacle& obs, double ref_x, double ref_y) {
    const double dx = ref_x - obs.mu_x;
    const double dy = ref_y - obs.mu_y;
    if (std::hypot(dx, dy) < 1e-9)
        throw DegeneratePointError(
            "linearize: reference point coincides with the obstacle center");

    AffineConstraint lin;
    lin.ref_x = ref_x;
    lin.ref_y = ref_y;
    lin.a_x = -2.0 * dx;
    lin.a_y = -2.0 * dy;
    lin.b = eval_collision(ref_x, ref_y, obs, obs.mu_r);
    lin.obstacle = obs;
    return lin;
}

double expected_c(const AffineConstraint& lin, double mean_x, double mean_y) {
    // E[a_x (x - x*) + a_y (y - y*) - (x* - ox)^2 - (y* - oy)^2 + R^2] with
    // E[R^2] = mu_r^2 + sigma_r^2, expanded so the affine structure in the
    // position mean is explicit.
    const Obstacle& o = lin.obstacle;
    return o.sigma_r * o.sigma_r + o.mu_r * o.mu_r
           + 2.0 * mean_x * o.mu_x - o.mu_x * o.mu_x
           + 2.0 * mean_y * o.mu_y - o.mu_y * o.mu_y
           - 2.0 * mean_x * lin.ref_x - 2.0 * mean_y * lin.ref_y
           + lin.ref_x * lin.ref_x + lin.ref_y * lin.ref_y;
}

double variance_c(const AffineConstraint& lin, double var_x, double var_y) {
    if (var_x < 0.0 || var_y < 0.0)
        throw std::invalid_argument("variance_c: variances must be non-negative");
    // Var of an affine function of independent (x, y) plus Var[R^2] for
    // Gaussian R: 4 mu_r^2 sigma_r^2 + 2 sigma_r^4.
    const Obstacle& o = lin.obstacle;
    const double sr2 = o.sigma_r * o.sigma_r;
    return 4.0 * o.mu_r * o.mu_r * sr2 + 2.0 * sr2 * sr2
           + lin.a_x * lin.a_x * var_x + lin.a_y * lin.a_y * var_y;
}

double surrogate_margin(double expected, double variance, double k) {
    if (variance < 0.0)
        throw std::invalid_argument("surrogate_margin: variance must be non-negative");
    if (k < 0.0)
        throw std::invalid_argument("surrogate_margin: k must be non-negative");
    return expected + k * std::sqrt(variance);
}

double eta_to_k(double eta) {
    if (!(eta >= 0.0 && eta < 1.0))
        throw std::invalid_argument("eta_to_k: eta must lie in [0, 1)");
    return std::sqrt(eta / (1.0 - eta));
}

double k_to_eta(double k) {
    if (k < 0.0)
        throw std::invalid_argument("k_to_eta: k must be non-negative");
    return k * k / (1.0 + k * k);
}

}  // namespace reachplan
