#pragma once

#include <map>
#include <string>

#include "reachplan/mc_oracle.hpp"
#include "reachplan/sqp.hpp"

namespace reachplan {

// Format a double with 17 significant digits, locale-independent; parsing the
// result recovers the value exactly.
std::string format_double(double value);
double parse_double(const std::string& text);

// Writes a plan as CSV: a '#'-prefixed metadata block (eta, k, tau, lambda,
// strategy, homotopy label, costs, convergence, dt, steps) followed by rows
//   t, mu_x, mu_y, sigma2_x, sigma2_y, speed, u_x, u_y
// with horizon + 1 state rows; the control columns of the final row are left
// blank since there are only horizon controls. The file is written to a
// temporary and renamed into place.
void export_plan(const PlanResult& plan, double dt, const std::string& path);

struct PlanFile {
    std::map<std::string, std::string> metadata;
    Eigen::MatrixXd trajectory;  // (T+1) x 6: mu_x, mu_y, sigma2_x, sigma2_y, speed columns...
    ControlSequence controls;
    double eta = 0.0;
    double dt = 0.0;
    int steps = 0;
};

PlanFile import_plan(const std::string& path);

// Per-step avoidance matrix as CSV: metadata block, then one row per
// timestep with one avoidance column per obstacle.
void export_mc_report(const MCReport& report, const std::string& path);

}  // namespace reachplan
