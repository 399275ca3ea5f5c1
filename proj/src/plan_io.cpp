#include "reachplan/plan_io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace reachplan {

namespace {

[[noreturn]] void fail(const std::string& message) {
    throw std::runtime_error("plan_io: " + message);
}

void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) fail("cannot open \"" + tmp + "\" for writing");
        out << content;
        if (!out) fail("write to \"" + tmp + "\" failed");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        fail("cannot rename \"" + tmp + "\" to \"" + path + "\"");
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, sep)) fields.push_back(field);
    if (!line.empty() && line.back() == sep) fields.push_back("");
    return fields;
}

}  // namespace

std::string format_double(double value) {
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value,
                                      std::chars_format::general, 17);
    return std::string(buffer, result.ptr);
}

double parse_double(const std::string& text) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    const auto result = std::from_chars(first, last, value);
    if (result.ec != std::errc() || result.ptr != last)
        fail("cannot parse number \"" + text + "\"");
    return value;
}

void export_plan(const PlanResult& plan, double dt, const std::string& path) {
    const int T = int(plan.controls.u.rows());
    if (int(plan.moments.states.size()) != T + 1)
        fail("export_plan: inconsistent plan (states vs controls)");

    std::ostringstream out;
    out << "# reachplan plan v1\n";
    out << "# eta=" << format_double(plan.eta) << "\n";
    out << "# k=" << format_double(plan.k) << "\n";
    out << "# tau=" << format_double(plan.tau_final) << "\n";
    out << "# lambda=" << format_double(plan.lambda_final) << "\n";
    out << "# strategy=" << strategy_name(plan.strategy) << "\n";
    out << "# homotopy=" << plan.homotopy_label << "\n";
    out << "# cost_effort=" << format_double(plan.cost_effort) << "\n";
    out << "# cost_state=" << format_double(plan.cost_state) << "\n";
    out << "# cost_variance=" << format_double(plan.cost_variance) << "\n";
    out << "# converged=" << (plan.converged ? 1 : 0) << "\n";
    out << "# iterations=" << plan.iterations << "\n";
    out << "# dt=" << format_double(dt) << "\n";
    out << "# steps=" << T << "\n";
    out << "t,mu_x,mu_y,sigma2_x,sigma2_y,speed,u_x,u_y\n";
    for (int t = 0; t <= T; ++t) {
        const StateMoments& s = plan.moments.states[t];
        const double speed = std::hypot(s.mean(kVX), s.mean(kVY));
        out << t << ',' << format_double(s.mean(kX)) << ','
            << format_double(s.mean(kY)) << ',' << format_double(s.cov(kX, kX))
            << ',' << format_double(s.cov(kY, kY)) << ',' << format_double(speed);
        if (t < T)
            out << ',' << format_double(plan.controls.u(t, 0)) << ','
                << format_double(plan.controls.u(t, 1));
        else
            out << ",,";  // no control at the final state
        out << '\n';
    }
    atomic_write(path, out.str());
}

PlanFile import_plan(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open \"" + path + "\"");

    PlanFile file;
    std::string line;
    bool header_seen = false;
    std::vector<std::array<double, 8>> rows;
    std::vector<bool> has_control;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const size_t eq = line.find('=');
            if (eq != std::string::npos) {
                std::string key = line.substr(1, eq - 1);
                while (!key.empty() && key.front() == ' ') key.erase(key.begin());
                file.metadata[key] = line.substr(eq + 1);
            }
            continue;
        }
        if (!header_seen) {
            if (line != "t,mu_x,mu_y,sigma2_x,sigma2_y,speed,u_x,u_y")
                fail("unexpected column header \"" + line + "\"");
            header_seen = true;
            continue;
        }
        const std::vector<std::string> fields = split(line, ',');
        if (fields.size() != 8) fail("expected 8 columns, got row \"" + line + "\"");
        std::array<double, 8> row{};
        for (int i = 0; i < 6; ++i) row[size_t(i)] = parse_double(fields[size_t(i)]);
        const bool with_control = !fields[6].empty() || !fields[7].empty();
        if (with_control) {
            row[6] = parse_double(fields[6]);
            row[7] = parse_double(fields[7]);
        }
        rows.push_back(row);
        has_control.push_back(with_control);
    }
    if (!header_seen) fail("missing column header");
    if (rows.size() < 2) fail("need at least two trajectory rows");
    const int T = int(rows.size()) - 1;
    for (int t = 0; t < T; ++t)
        if (!has_control[size_t(t)]) fail("missing control columns before the final row");
    if (has_control[size_t(T)]) fail("final row must leave the control columns blank");

    file.steps = T;
    file.trajectory.resize(T + 1, 5);
    file.controls.u.resize(T, 2);
    for (int t = 0; t <= T; ++t) {
        if (long(std::lround(rows[size_t(t)][0])) != t)
            fail("timestep column must count 0..steps");
        for (int c = 0; c < 5; ++c) file.trajectory(t, c) = rows[size_t(t)][c + 1];
        if (t < T) {
            file.controls.u(t, 0) = rows[size_t(t)][6];
            file.controls.u(t, 1) = rows[size_t(t)][7];
        }
    }
    if (!file.metadata.count("eta")) fail("metadata is missing eta");
    if (!file.metadata.count("dt")) fail("metadata is missing dt");
    file.eta = parse_double(file.metadata.at("eta"));
    file.dt = parse_double(file.metadata.at("dt"));
    return file;
}

void export_mc_report(const MCReport& report, const std::string& path) {
    const int n_obs = int(report.per_step_avoidance.rows());
    const int T = int(report.per_step_avoidance.cols()) - 1;

    std::ostringstream out;
    out << "# reachplan mc v1\n";
    out << "# rollouts=" << report.n_rollouts << "\n";
    out << "# rng_seed=" << report.seed << "\n";
    out << "# joint_avoidance=" << format_double(report.joint_avoidance) << "\n";
    for (int j = 0; j < n_obs; ++j)
        out << "# clamped_fraction_obs" << j << "="
            << format_double(report.clamped_fraction[size_t(j)]) << "\n";
    out << "t";
    for (int j = 0; j < n_obs; ++j) out << ",avoid_obs" << j;
    out << "\n";
    for (int t = 0; t <= T; ++t) {
        out << t;
        for (int j = 0; j < n_obs; ++j)
            out << ',' << format_double(report.per_step_avoidance(j, t));
        out << '\n';
    }
    atomic_write(path, out.str());
}

}  // namespace reachplan
