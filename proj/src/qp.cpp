#include "reachplan/qp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace reachplan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Active-set factorization state for the dual method: with N the matrix of
// active constraint normals, J = L^-T Q and R satisfy L^-1 N = Q [R; 0] where
// H = L L^T. Columns 0..q-1 of J span the active subspace in the H metric.
struct Workspace {
    Eigen::MatrixXd J;
    Eigen::MatrixXd R;
    Eigen::VectorXd d;
    int q = 0;
    double r_norm = 1.0;
};

// Reflection-based update that zeroes d(j) into d(j-1) and applies the same
// orthogonal transform to columns (j-1, j) of J.
void apply_reflection(Eigen::MatrixXd& J, Eigen::VectorXd& d, int j) {
    double cc = d(j - 1);
    double ss = d(j);
    const double h = std::hypot(cc, ss);
    if (h == 0.0) return;
    d(j) = 0.0;
    ss /= h;
    cc /= h;
    if (cc < 0.0) {
        cc = -cc;
        ss = -ss;
        d(j - 1) = -h;
    } else {
        d(j - 1) = h;
    }
    const double xny = ss / (1.0 + cc);
    const int n = int(J.rows());
    for (int k = 0; k < n; ++k) {
        const double t1 = J(k, j - 1);
        const double t2 = J(k, j);
        J(k, j - 1) = t1 * cc + t2 * ss;
        J(k, j) = xny * (t1 + J(k, j - 1)) - t2;
    }
}

bool add_constraint(Workspace& ws) {
    const int n = int(ws.J.rows());
    for (int j = n - 1; j >= ws.q + 1; --j) apply_reflection(ws.J, ws.d, j);
    ws.R.col(ws.q).head(ws.q + 1) = ws.d.head(ws.q + 1);
    ++ws.q;
    ws.r_norm = std::max(ws.r_norm, std::abs(ws.d(ws.q - 1)));
    return std::abs(ws.d(ws.q - 1)) > 1e-12 * ws.r_norm;
}

void delete_constraint(Workspace& ws, std::vector<int>& active,
                       Eigen::VectorXd& u_act, int pos) {
    const int n = int(ws.J.rows());
    for (int i = pos; i < ws.q - 1; ++i) {
        active[i] = active[i + 1];
        u_act(i) = u_act(i + 1);
        ws.R.col(i).head(i + 2) = ws.R.col(i + 1).head(i + 2);
    }
    active.pop_back();
    --ws.q;
    u_act.conservativeResize(ws.q);
    if (ws.q == 0) return;

    // Re-triangularize R: chase the subdiagonal introduced by the shift.
    for (int j = pos; j < ws.q; ++j) {
        double cc = ws.R(j, j);
        double ss = ws.R(j + 1, j);
        const double h = std::hypot(cc, ss);
        if (h == 0.0) continue;
        cc /= h;
        ss /= h;
        ws.R(j + 1, j) = 0.0;
        if (cc < 0.0) {
            ws.R(j, j) = -h;
            cc = -cc;
            ss = -ss;
        } else {
            ws.R(j, j) = h;
        }
        const double xny = ss / (1.0 + cc);
        for (int k = j + 1; k < ws.q; ++k) {
            const double t1 = ws.R(j, k);
            const double t2 = ws.R(j + 1, k);
            ws.R(j, k) = t1 * cc + t2 * ss;
            ws.R(j + 1, k) = xny * (t1 + ws.R(j, k)) - t2;
        }
        for (int k = 0; k < n; ++k) {
            const double t1 = ws.J(k, j);
            const double t2 = ws.J(k, j + 1);
            ws.J(k, j) = t1 * cc + t2 * ss;
            ws.J(k, j + 1) = xny * (ws.J(k, j) + t1) - t2;
        }
    }
}

struct StepDirections {
    Eigen::VectorXd z;  // primal direction
    Eigen::VectorXd r;  // multipliers of np in terms of active normals
    double ztnp = 0.0;  // np . z = squared norm of the free component
};

StepDirections compute_step(const Workspace& ws, const Eigen::VectorXd& np) {
    const int n = int(ws.J.rows());
    StepDirections s;
    Eigen::VectorXd d = ws.J.transpose() * np;
    s.z = ws.J.rightCols(n - ws.q) * d.tail(n - ws.q);
    s.ztnp = d.tail(n - ws.q).squaredNorm();
    if (ws.q > 0)
        s.r = ws.R.topLeftCorner(ws.q, ws.q)
                  .triangularView<Eigen::Upper>()
                  .solve(d.head(ws.q));
    else
        s.r = Eigen::VectorXd();
    // Treat np as lying in the active span when its free component is
    // negligible relative to the whole vector in the transformed metric.
    if (s.ztnp <= 1e-26 * d.squaredNorm()) {
        s.z.setZero();
        s.ztnp = 0.0;
    }
    return s;
}

void kkt_residuals(const QPProblem& p, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& mult, QPSolution& sol) {
    Eigen::VectorXd grad = p.H * x + p.f;
    if (p.G.rows() > 0) grad += p.G.transpose() * mult;
    sol.stationarity = grad.cwiseAbs().maxCoeff();
    sol.primal_violation = 0.0;
    sol.complementarity = 0.0;
    for (int k = 0; k < p.G.rows(); ++k) {
        const double slack = p.G.row(k).dot(x) - p.h(k);
        if (k < p.n_eq)
            sol.primal_violation = std::max(sol.primal_violation, std::abs(slack));
        else {
            sol.primal_violation = std::max(sol.primal_violation, slack);
            sol.complementarity =
                std::max(sol.complementarity, std::abs(mult(k) * slack));
        }
    }
    sol.primal_violation = std::max(sol.primal_violation, 0.0);
}

double contract_score(const QPProblem& p, const QPSolution& sol) {
    const double fscale = 1.0 + (p.f.size() ? p.f.cwiseAbs().maxCoeff() : 0.0);
    return std::max({sol.stationarity / fscale, sol.primal_violation,
                     sol.complementarity});
}

// Re-solves the equality-constrained problem defined by the final active set
// through a Schur complement; tightens residuals that the incremental updates
// may have accumulated.
bool polish(const QPProblem& p, const Eigen::LLT<Eigen::MatrixXd>& chol,
            const std::vector<int>& active, Eigen::VectorXd& x,
            Eigen::VectorXd& mult) {
    const int q = int(active.size());
    if (q == 0) {
        x = -chol.solve(p.f);
        mult.setZero(p.G.rows());
        return true;
    }
    Eigen::MatrixXd Ga(q, p.H.cols());
    Eigen::VectorXd ha(q);
    for (int i = 0; i < q; ++i) {
        Ga.row(i) = p.G.row(active[i]);
        ha(i) = p.h(active[i]);
    }
    const Eigen::MatrixXd Y = chol.solve(Ga.transpose());
    const Eigen::MatrixXd S = Ga * Y;
    Eigen::LDLT<Eigen::MatrixXd> sch(S);
    if (sch.info() != Eigen::Success) return false;
    const Eigen::VectorXd nu = sch.solve(-(ha + Ga * chol.solve(p.f)));
    Eigen::VectorXd cand_mult = Eigen::VectorXd::Zero(p.G.rows());
    for (int i = 0; i < q; ++i) {
        if (active[i] >= p.n_eq && nu(i) < -1e-10) return false;
        cand_mult(active[i]) = nu(i);
    }
    x = -chol.solve(p.f + Ga.transpose() * nu);
    mult = cand_mult;
    return true;
}

}  // namespace

QPSolution solve_qp(const QPProblem& problem, double tol) {
    const int n = int(problem.H.rows());
    const int m = int(problem.G.rows());
    if (problem.H.cols() != n || problem.f.size() != n)
        throw std::invalid_argument("solve_qp: inconsistent H/f dimensions");
    if (m > 0 && problem.G.cols() != n)
        throw std::invalid_argument("solve_qp: G column count must match H");
    if (problem.h.size() != m)
        throw std::invalid_argument("solve_qp: h size must match G rows");
    if (problem.n_eq < 0 || problem.n_eq > m)
        throw std::invalid_argument("solve_qp: n_eq out of range");

    // Factor H, escalating a ridge only if it is semidefinite to roundoff.
    Eigen::LLT<Eigen::MatrixXd> chol;
    const double hscale = 1.0 + problem.H.cwiseAbs().maxCoeff() / std::max(n, 1);
    double ridge = 0.0;
    for (int attempt = 0;; ++attempt) {
        Eigen::MatrixXd Hr = problem.H;
        if (ridge > 0.0) Hr.diagonal().array() += ridge;
        chol.compute(Hr);
        if (chol.info() == Eigen::Success) break;
        if (attempt >= 6)
            throw std::invalid_argument("solve_qp: H is not positive definite");
        ridge = (ridge == 0.0) ? 1e-12 * hscale : 10.0 * ridge;
    }

    QPSolution sol;
    sol.u = -chol.solve(problem.f);
    sol.multipliers = Eigen::VectorXd::Zero(m);
    sol.status = QPStatus::kOptimal;

    Workspace ws;
    ws.J = chol.matrixU().solve(Eigen::MatrixXd::Identity(n, n));
    ws.R = Eigen::MatrixXd::Zero(n, n);
    ws.d = Eigen::VectorXd::Zero(n);

    std::vector<int> active;
    Eigen::VectorXd u_act;
    Eigen::VectorXd& x = sol.u;
    const double viol_tol =
        std::max(tol, 1e-11) * (1.0 + (m ? problem.h.cwiseAbs().maxCoeff() : 0.0));

    auto build_certificate = [&](int row, const Eigen::VectorXd& r) {
        sol.certificate.clear();
        sol.certificate.emplace_back(row, 1.0);
        for (int i = 0; i < int(active.size()); ++i)
            if (std::abs(r(i)) > 1e-14)
                sol.certificate.emplace_back(active[i], -r(i));
        sol.status = QPStatus::kInfeasible;
    };

    // Install equality rows first; their multipliers are unrestricted and they
    // never leave the active set.
    for (int i = 0; i < problem.n_eq; ++i) {
        const Eigen::VectorXd np = -problem.G.row(i).transpose();
        const StepDirections st = compute_step(ws, np);
        const double resid = np.dot(x) + problem.h(i);  // want np.x = -h(i)
        if (st.ztnp > 0.0) {
            const double t2 = -resid / st.ztnp;
            x += t2 * st.z;
            if (ws.q > 0) u_act.head(ws.q) -= t2 * st.r;
            u_act.conservativeResize(ws.q + 1);
            u_act(ws.q) = t2;
            active.push_back(i);
            ws.d = ws.J.transpose() * np;
            if (!add_constraint(ws))
                throw std::invalid_argument(
                    "solve_qp: linearly dependent equality constraints");
        } else if (std::abs(resid) > 1e-9 * (1.0 + std::abs(problem.h(i)))) {
            build_certificate(i, st.r);
            kkt_residuals(problem, x, sol.multipliers, sol);
            sol.objective = 0.5 * x.dot(problem.H * x) + problem.f.dot(x) +
                            problem.constant;
            return sol;
        }
    }

    const int iter_cap = 100 + 20 * (n + m);
    while (true) {
        if (++sol.iterations > iter_cap) {
            sol.status = QPStatus::kMaxIterations;
            break;
        }
        // Most violated inactive inequality; ties keep the lowest row index.
        int ip = -1;
        double worst = viol_tol;
        for (int k = problem.n_eq; k < m; ++k) {
            if (std::find(active.begin(), active.end(), k) != active.end())
                continue;
            const double s = problem.G.row(k).dot(x) - problem.h(k);
            if (s > worst) {
                worst = s;
                ip = k;
            }
        }
        if (ip < 0) break;  // optimal

        const Eigen::VectorXd np = -problem.G.row(ip).transpose();
        const double b_ip = -problem.h(ip);
        double u_plus = 0.0;
        bool resolved = false;
        while (!resolved) {
            if (++sol.iterations > iter_cap) {
                sol.status = QPStatus::kMaxIterations;
                break;
            }
            const StepDirections st = compute_step(ws, np);

            double t1 = kInf;
            int drop_pos = -1;
            for (int pos = problem.n_eq; pos < ws.q; ++pos) {
                if (st.r(pos) > 0.0 && u_act(pos) / st.r(pos) < t1) {
                    t1 = u_act(pos) / st.r(pos);
                    drop_pos = pos;
                }
            }
            const double s_ip = np.dot(x) - b_ip;
            const double t2 = (st.ztnp > 0.0) ? -s_ip / st.ztnp : kInf;
            const double t = std::min(t1, t2);

            if (t == kInf) {
                build_certificate(ip, st.r);
                resolved = true;
                break;
            }
            if (t2 == kInf) {
                // Step in the dual only, dropping the blocking constraint.
                if (ws.q > 0) u_act.head(ws.q) -= t * st.r;
                u_plus += t;
                delete_constraint(ws, active, u_act, drop_pos);
                continue;
            }
            x += t * st.z;
            if (ws.q > 0) u_act.head(ws.q) -= t * st.r;
            u_plus += t;
            if (t == t2) {
                u_act.conservativeResize(ws.q + 1);
                u_act(ws.q) = u_plus;
                active.push_back(ip);
                ws.d = ws.J.transpose() * np;
                if (!add_constraint(ws)) {
                    sol.status = QPStatus::kMaxIterations;
                }
                resolved = true;
            } else {
                delete_constraint(ws, active, u_act, drop_pos);
            }
        }
        if (sol.status != QPStatus::kOptimal) break;
    }

    for (int i = 0; i < int(active.size()); ++i)
        sol.multipliers(active[i]) = u_act(i);

    if (sol.status == QPStatus::kOptimal && m > 0) {
        kkt_residuals(problem, x, sol.multipliers, sol);
        const double raw_score = contract_score(problem, sol);
        Eigen::VectorXd xp = x, mp = sol.multipliers;
        if (polish(problem, chol, active, xp, mp)) {
            QPSolution trial = sol;
            trial.u = xp;
            trial.multipliers = mp;
            kkt_residuals(problem, xp, mp, trial);
            if (contract_score(problem, trial) < raw_score) {
                sol.u = xp;
                sol.multipliers = mp;
            }
        }
    }
    kkt_residuals(problem, sol.u, sol.multipliers, sol);
    sol.objective = 0.5 * sol.u.dot(problem.H * sol.u) + problem.f.dot(sol.u) +
                    problem.constant;
    return sol;
}

QPProblem assemble_qp(const SystemModel& sys, const StateMoments& x0,
                      const CostWeights& weights, const AffineQuadraticMaps& maps,
                      const std::vector<std::vector<AffineConstraint>>& lins,
                      double tau, double lambda) {
    const int T = sys.horizon;
    const int n = 2 * T;
    if (maps.horizon != T)
        throw std::invalid_argument("assemble_qp: maps horizon mismatch");
    if (weights.cost_window < 1 || weights.cost_window > T)
        throw std::invalid_argument("assemble_qp: cost_window must lie in [1, T]");
    if ((weights.w.array() < 0.0).any())
        throw std::invalid_argument("assemble_qp: weights must be non-negative");
    if (tau < 0.0 || lambda < 0.0)
        throw std::invalid_argument("assemble_qp: tau and lambda must be non-negative");
    for (const auto& per_obstacle : lins)
        if (int(per_obstacle.size()) != T)
            throw std::invalid_argument(
                "assemble_qp: need one linearization per timestep 1..T");
    for (int i = 0; i < 6; ++i)
        if (std::abs(maps.mean_const[i](0) - x0.mean(i)) >
            1e-9 * (1.0 + std::abs(x0.mean(i))))
            throw std::invalid_argument(
                "assemble_qp: maps were built from a different initial state");

    QPProblem p;
    p.H = Eigen::MatrixXd::Zero(n, n);
    p.f = Eigen::VectorXd::Zero(n);
    p.constant = 0.0;
    p.H.diagonal().array() += 2.0;  // effort cost ||u||^2

    const double cx2 = sys.noise_x * sys.noise_x;
    const double cy2 = sys.noise_y * sys.noise_y;
    const int t_first = T - weights.cost_window + 1;

    // Mean part of the state cost: collect scaled rows, one GEMM.
    int active_rows = 0;
    for (int i = 0; i < 6; ++i)
        if (weights.w(i) > 0.0) active_rows += weights.cost_window;
    if (active_rows > 0) {
        Eigen::MatrixXd M(active_rows, n);
        Eigen::VectorXd v(active_rows);
        int r = 0;
        for (int t = t_first; t <= T; ++t) {
            for (int i = 0; i < 6; ++i) {
                const double wi = weights.w(i);
                if (wi <= 0.0) continue;
                const double scale = std::sqrt(2.0 * wi);
                M.row(r) = scale * maps.mean_coeff[i].row(t);
                const double beta = maps.mean_const[i](t) - weights.target(i);
                v(r) = scale * beta;
                p.constant += wi * beta * beta;
                ++r;
            }
        }
        p.H.noalias() += M.transpose() * M;
        p.f.noalias() += M.transpose() * v;
    }

    // Variance parts are diagonal in the stacked controls.
    for (int t = t_first; t <= T; ++t) {
        for (int i = 0; i < 6; ++i) {
            const double wi = weights.w(i);
            if (wi <= 0.0) continue;
            for (int s = 0; s < T; ++s) {
                p.H(2 * s, 2 * s) += 2.0 * wi * maps.var_ux[i](t, s) * cx2;
                p.H(2 * s + 1, 2 * s + 1) += 2.0 * wi * maps.var_uy[i](t, s) * cy2;
            }
            p.constant += wi * maps.var_const[i](t);
        }
    }
    if (lambda > 0.0) {
        for (int t = 0; t <= T; ++t) {
            for (int i : {int(kX), int(kY)}) {
                for (int s = 0; s < T; ++s) {
                    p.H(2 * s, 2 * s) += 2.0 * lambda * maps.var_ux[i](t, s) * cx2;
                    p.H(2 * s + 1, 2 * s + 1) +=
                        2.0 * lambda * maps.var_uy[i](t, s) * cy2;
                }
                p.constant += lambda * maps.var_const[i](t);
            }
        }
    }
    p.H = 0.5 * (p.H + p.H.transpose()).eval();

    const int n_obs = int(lins.size());
    p.n_eq = weights.hard_terminal ? 2 : 0;
    const int rows = p.n_eq + n_obs * T;
    p.G = Eigen::MatrixXd::Zero(rows, n);
    p.h = Eigen::VectorXd::Zero(rows);
    p.tags.assign(rows, ConstraintTag{});

    int r = 0;
    if (weights.hard_terminal) {
        for (int i : {int(kX), int(kY)}) {
            p.G.row(r) = maps.mean_coeff[i].row(T);
            p.h(r) = weights.target(i) - maps.mean_const[i](T);
            p.tags[r] = {-1, T};
            ++r;
        }
    }
    for (int j = 0; j < n_obs; ++j) {
        for (int t = 1; t <= T; ++t) {
            const AffineConstraint& lin = lins[j][t - 1];
            p.G.row(r) = lin.a_x * maps.mean_coeff[kX].row(t) +
                         lin.a_y * maps.mean_coeff[kY].row(t);
            const double at_zero =
                expected_c(lin, maps.mean_const[kX](t), maps.mean_const[kY](t));
            p.h(r) = -tau - at_zero;
            p.tags[r] = {j, t};
            ++r;
        }
    }
    return p;
}

void dump_qp_csv(const QPProblem& problem, const std::string& prefix) {
    const Eigen::IOFormat fmt(Eigen::FullPrecision, Eigen::DontAlignCols, ",", "\n");
    const auto write = [&](const std::string& name, const Eigen::MatrixXd& mat) {
        std::ofstream out(prefix + name + ".csv");
        if (!out)
            throw std::runtime_error("dump_qp_csv: cannot open output file");
        out << mat.format(fmt) << "\n";
    };
    write("H", problem.H);
    write("f", problem.f);
    write("G", problem.G);
    write("h", problem.h);
}

}  // namespace reachplan
