#pragma once

#include <stdexcept>

namespace reachplan {

// Disc obstacle with Gaussian-uncertain radius, clamped at zero when sampled.
struct Obstacle {
    double mu_x = 0.0;
    double mu_y = 0.0;
    double mu_r = 0.0;     // mean radius, > 0
    double sigma_r = 0.0;  // radius std dev, in [0, mu_r / 3]
};

// Affine in (x, y) upper bound on the collision function, obtained by
// linearizing its concave positional part at (ref_x, ref_y):
//   value(x, y) = a_x * (x - ref_x) + a_y * (y - ref_y) + b
// where b is the collision function evaluated at the reference with the mean
// radius. Because the positional part is concave, the bound is global:
// value(x, y) >= eval_collision(x, y, obstacle, mu_r) everywhere.
struct AffineConstraint {
    double ref_x = 0.0;
    double ref_y = 0.0;
    double a_x = 0.0;
    double a_y = 0.0;
    double b = 0.0;
    Obstacle obstacle;
};

struct DegeneratePointError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Collision indicator function: positive inside the disc of the given radius,
// zero on its boundary, negative outside.
double eval_collision(double x, double y, const Obstacle& obs, double radius);

// Throws DegeneratePointError if the reference sits within 1e-9 of the
// obstacle center, where the gradient of the positional part vanishes.
AffineConstraint linearize(const Obstacle& obs, double ref_x, double ref_y);

// Moments of the linearized collision value when the position is Gaussian
// with the given mean/variance per axis (axes independent) and the radius is
// Gaussian, independent of position. Closed forms; no sampling.
double expected_c(const AffineConstraint& lin, double mean_x, double mean_y);
double variance_c(const AffineConstraint& lin, double var_x, double var_y);

// One-sided concentration surrogate: if expected + k*sqrt(variance) <= 0 then
// Pr(value <= 0) >= k^2 / (1 + k^2), for any distribution with these moments.
double surrogate_margin(double expected, double variance, double k);

// Avoidance probability target eta in [0, 1) and its surrogate multiplier k
// are linked by eta = k^2 / (1 + k^2).
double eta_to_k(double eta);
double k_to_eta(double k);

}  // namespace reachplan
