#include "reachplan/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "reachplan/plan_io.hpp"

namespace reachplan {

namespace {

void check_spec(const SweepSpec& spec) {
    if (spec.eta_values.empty())
        throw std::invalid_argument("run_sweep: eta grid must be non-empty");
    for (size_t i = 0; i < spec.eta_values.size(); ++i) {
        const double eta = spec.eta_values[i];
        if (!(eta >= 0.5 && eta <= 0.995))
            throw std::invalid_argument(
                "run_sweep: eta grid values must lie in [0.5, 0.995]");
        if (i > 0 && !(eta > spec.eta_values[i - 1]))
            throw std::invalid_argument(
                "run_sweep: eta grid must be strictly increasing");
    }
    if (spec.strategies.empty())
        throw std::invalid_argument("run_sweep: need at least one strategy");
    if (spec.seed_labels.empty())
        throw std::invalid_argument("run_sweep: need at least one seed label");
    if (spec.mc_rollouts < 1000)
        throw std::invalid_argument("run_sweep: need at least 1000 MC rollouts");
}

std::string sanitize(const std::string& label) {
    std::string out;
    for (char c : label)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')
                   ? c
                   : '_';
    return out.empty() ? std::string("seed") : out;
}

}  // namespace

double min_clearance(const MomentTrajectory& moments,
                     const std::vector<Obstacle>& obstacles) {
    double clearance = std::numeric_limits<double>::infinity();
    for (const StateMoments& s : moments.states)
        for (const Obstacle& obs : obstacles)
            clearance = std::min(
                clearance,
                std::hypot(s.mean(kX) - obs.mu_x, s.mean(kY) - obs.mu_y) - obs.mu_r);
    return clearance;
}

double time_of_peak_speed(const MomentTrajectory& moments) {
    const int T = int(moments.states.size()) - 1;
    int best = 0;
    double best_speed = -1.0;
    for (int t = 0; t <= T; ++t) {
        const double speed =
            std::hypot(moments.states[t].mean(kVX), moments.states[t].mean(kVY));
        if (speed > best_speed) {
            best_speed = speed;
            best = t;
        }
    }
    return T > 0 ? double(best) / double(T) : 0.0;
}

SweepReport run_sweep(const SweepSpec& spec) {
    check_spec(spec);
    validate_scenario(spec.scenario);
    const SystemModel sys = system_of(spec.scenario);
    const StateMoments x0 = initial_state(spec.scenario);

    SweepReport report;
    for (double eta : spec.eta_values) {
        for (Strategy strategy : spec.strategies) {
            for (const std::string& label : spec.seed_labels) {
                SweepRow row;
                row.eta = eta;
                row.strategy = strategy;
                row.homotopy_label = label;
                try {
                    SolverConfig config = make_config(strategy, eta);
                    config.xi = spec.xi;
                    config.max_iter = spec.max_iter;
                    const SeedTrajectory seed = resolve_seed(spec.scenario, label);
                    const PlanResult plan = solve(spec.scenario, seed, config);
                    row.converged = plan.converged;
                    row.j_u = plan.cost_effort;
                    row.j_total =
                        plan.cost_effort + plan.cost_state + plan.cost_variance;
                    row.min_clearance =
                        min_clearance(plan.moments, spec.scenario.obstacles);
                    row.time_of_peak_speed = time_of_peak_speed(plan.moments);
                    const MCReport mc =
                        simulate(sys, x0, plan.controls, spec.scenario.obstacles,
                                 spec.mc_rollouts, spec.mc_seed);
                    row.mc_per_step_min = mc.per_step_avoidance.size()
                                              ? mc.per_step_avoidance.minCoeff()
                                              : 1.0;
                } catch (const std::exception& e) {
                    row.converged = false;
                    row.error = e.what();
                }
                report.rows.push_back(std::move(row));
            }
        }
    }
    return report;
}

RatioCurve ratio_curve(const SweepReport& report, const CurveSelector& numerator,
                       const CurveSelector& denominator) {
    std::vector<double> etas;
    for (const SweepRow& row : report.rows)
        if (etas.empty() || std::find(etas.begin(), etas.end(), row.eta) == etas.end())
            etas.push_back(row.eta);
    std::sort(etas.begin(), etas.end());

    const auto find_row = [&](double eta, const CurveSelector& sel) -> const SweepRow* {
        for (const SweepRow& row : report.rows)
            if (row.eta == eta && row.strategy == sel.strategy &&
                (sel.homotopy_label.empty() ||
                 row.homotopy_label == sel.homotopy_label))
                return &row;
        return nullptr;
    };

    RatioCurve curve;
    for (double eta : etas) {
        const SweepRow* num = find_row(eta, numerator);
        const SweepRow* den = find_row(eta, denominator);
        std::ostringstream why;
        if (!num || !den)
            why << "no matching row";
        else if (!num->converged || !den->converged)
            why << "unconverged plan";
        else if (den->j_u == 0.0)
            why << "zero denominator cost";
        if (why.str().empty()) {
            curve.points.emplace_back(eta, num->j_u / den->j_u);
        } else {
            std::ostringstream warning;
            warning << "eta=" << eta << " skipped: " << why.str();
            curve.warnings.push_back(warning.str());
        }
    }
    return curve;
}

void export_sweep(const SweepReport& report, const std::string& path) {
    std::ostringstream out;
    out << "# reachplan sweep v1\n";
    out << "eta,strategy,homotopy,J_U,J_total,min_clearance,time_of_peak_speed,"
           "mc_per_step_min,converged\n";
    for (const SweepRow& row : report.rows) {
        out << format_double(row.eta) << ',' << strategy_name(row.strategy) << ','
            << row.homotopy_label << ',' << format_double(row.j_u) << ','
            << format_double(row.j_total) << ',' << format_double(row.min_clearance)
            << ',' << format_double(row.time_of_peak_speed) << ','
            << format_double(row.mc_per_step_min) << ',' << (row.converged ? 1 : 0)
            << '\n';
    }
    {
        std::ofstream file(path, std::ios::binary);
        if (!file)
            throw std::runtime_error("export_sweep: cannot open \"" + path + "\"");
        file << out.str();
    }

    // One plot-ready file per (strategy, seed) curve, x column first.
    std::string stem = path;
    const size_t dot = stem.rfind('.');
    if (dot != std::string::npos && stem.find('/', dot) == std::string::npos)
        stem = stem.substr(0, dot);
    std::vector<std::pair<Strategy, std::string>> curves;
    for (const SweepRow& row : report.rows) {
        const auto key = std::make_pair(row.strategy, row.homotopy_label);
        if (std::find(curves.begin(), curves.end(), key) == curves.end())
            curves.push_back(key);
    }
    for (const auto& [strategy, label] : curves) {
        std::ostringstream curve;
        curve << "eta,J_U,J_total,min_clearance,time_of_peak_speed,mc_per_step_min\n";
        for (const SweepRow& row : report.rows) {
            if (row.strategy != strategy || row.homotopy_label != label ||
                !row.converged)
                continue;
            curve << format_double(row.eta) << ',' << format_double(row.j_u) << ','
                  << format_double(row.j_total) << ','
                  << format_double(row.min_clearance) << ','
                  << format_double(row.time_of_peak_speed) << ','
                  << format_double(row.mc_per_step_min) << '\n';
        }
        const std::string curve_path =
            stem + "_" + strategy_name(strategy) + "_" + sanitize(label) + ".csv";
        std::ofstream file(curve_path, std::ios::binary);
        if (!file)
            throw std::runtime_error("export_sweep: cannot open \"" + curve_path +
                                     "\"");
        file << curve.str();
    }
}

}  // namespace reachplan
