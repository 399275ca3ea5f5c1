#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "reachplan/chance.hpp"
#include "reachplan/dynamics.hpp"

namespace reachplan {

// Quadratic state cost sum_i w(i) * ((mean_i - target(i))^2 + variance_i),
// applied over the last cost_window timesteps of the horizon. hard_terminal
// additionally pins the final mean position with equality constraints.
struct CostWeights {
    Eigen::Matrix<double, 6, 1> w = Eigen::Matrix<double, 6, 1>::Zero();
    StateVec target = StateVec::Zero();
    int cost_window = 1;
    bool hard_terminal = false;
};

// Which scenario row a constraint came from; obstacle == -1 marks rows that
// are not collision constraints (terminal equalities).
struct ConstraintTag {
    int obstacle = -1;
    int step = -1;
};

// minimize 0.5 u^T H u + f^T u + constant
// subject to G.topRows(n_eq) u  = h.head(n_eq)
//            G.bottomRows(...) u <= h.tail(...)
struct QPProblem {
    Eigen::MatrixXd H;
    Eigen::VectorXd f;
    double constant = 0.0;
    Eigen::MatrixXd G;
    Eigen::VectorXd h;
    int n_eq = 0;
    std::vector<ConstraintTag> tags;
};

enum class QPStatus { kOptimal, kInfeasible, kMaxIterations };

struct QPSolution {
    Eigen::VectorXd u;
    double objective = 0.0;
    QPStatus status = QPStatus::kOptimal;
    int iterations = 0;
    // KKT residuals at the returned point.
    double stationarity = 0.0;
    double primal_violation = 0.0;
    double complementarity = 0.0;
    Eigen::VectorXd multipliers;  // one per row of G, zero when inactive
    // Farkas certificate for infeasible problems: (row, weight) pairs y with
    // y >= 0 on inequality rows, sum_k y_k G.row(k) == 0 and y . h < 0.
    std::vector<std::pair<int, double>> certificate;
};

// Builds the trajectory QP for one convex-concave iteration: effort cost
// ||u||^2, expected state cost over the window, lambda times the summed
// positional variances, and one affine row per (obstacle, timestep) requiring
// expected collision value + tau <= 0 for t = 1..T. `lins[j][t-1]` is the
// linearization of obstacle j at the reference position for timestep t.
QPProblem assemble_qp(const SystemModel& sys, const StateMoments& x0,
                      const CostWeights& weights, const AffineQuadraticMaps& maps,
                      const std::vector<std::vector<AffineConstraint>>& lins,
                      double tau, double lambda);

// Dense dual active-set solver (Goldfarb-Idnani). Requires H positive
// definite; deterministic given identical inputs.
QPSolution solve_qp(const QPProblem& problem, double tol = 1e-11);

// Debug dump of the assembled matrices as <prefix>H.csv, f.csv, G.csv, h.csv.
void dump_qp_csv(const QPProblem& problem, const std::string& prefix);

}  // namespace reachplan
