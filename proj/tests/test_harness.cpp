#include <doctest.h>

#include <reachplan/harness.hpp>

#include <filesystem>
#include <fstream>
#include <limits>

using namespace reachplan;
namespace fs = std::filesystem;

namespace {

Scenario sweep_scenario() {
    Scenario sc;
    sc.start = {0.0, 0.0};
    sc.goal = {0.18, 0.0};
    sc.obstacles.push_back({0.09, 0.008, 0.025, 0.0005});
    sc.dt = 0.01;
    sc.steps = 60;
    sc.noise_x = 0.15;
    sc.noise_y = 0.15;
    sc.weights.w << 1e4, 1e4, 1e2, 1e2, 1e-2, 1e-2;
    sc.weights.target << 0.18, 0.0, 0.0, 0.0, 0.0, 0.0;
    sc.weights.cost_window = 12;
    sc.seeds.push_back({"high", {Eigen::Vector2d(0.09, 0.05)}});
    return sc;
}

MomentTrajectory path_with_speeds(const std::vector<double>& xs,
                                  const std::vector<double>& speeds) {
    MomentTrajectory traj;
    traj.states.resize(xs.size());
    for (size_t t = 0; t < xs.size(); ++t) {
        traj.states[t].mean(kX) = xs[t];
        traj.states[t].mean(kVX) = speeds[t];
    }
    return traj;
}

}  // namespace

TEST_CASE("clearance is the worst mean distance to any disc edge") {
    const MomentTrajectory traj =
        path_with_speeds({0.0, 0.1, 0.2, 0.3}, {0.0, 0.0, 0.0, 0.0});
    const std::vector<Obstacle> obstacles{{0.1, 0.03, 0.02, 0.0},
                                          {0.3, -0.04, 0.01, 0.0}};
    // Closest approach: state 1 sits 0.03 above the first center.
    CHECK(min_clearance(traj, obstacles)
          == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(min_clearance(traj, {}) == std::numeric_limits<double>::infinity());
}

TEST_CASE("peak-speed time is a fraction with ties to the earliest step") {
    const MomentTrajectory traj = path_with_speeds(
        {0.0, 0.0, 0.0, 0.0, 0.0}, {0.1, 0.4, 0.9, 0.4, 0.1});
    CHECK(time_of_peak_speed(traj) == doctest::Approx(0.5).epsilon(1e-15));

    const MomentTrajectory tie = path_with_speeds(
        {0.0, 0.0, 0.0, 0.0, 0.0}, {0.1, 0.9, 0.9, 0.4, 0.1});
    CHECK(time_of_peak_speed(tie) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("sweep specs are validated before any solve") {
    SweepSpec spec;
    spec.scenario = sweep_scenario();
    spec.strategies = {Strategy::kLowVelocity};
    spec.seed_labels = {"straight"};

    spec.eta_values = {};
    CHECK_THROWS_AS(run_sweep(spec), std::invalid_argument);
    spec.eta_values = {0.4};
    CHECK_THROWS_AS(run_sweep(spec), std::invalid_argument);
    spec.eta_values = {0.9, 0.8};
    CHECK_THROWS_AS(run_sweep(spec), std::invalid_argument);
    spec.eta_values = {0.8, 0.8};
    CHECK_THROWS_AS(run_sweep(spec), std::invalid_argument);

    spec.eta_values = {0.8};
    spec.strategies = {};
    CHECK_THROWS_AS(run_sweep(spec), std::invalid_argument);
    spec.strategies = {Strategy::kLowVelocity};
    spec.seed_labels = {};
    CHECK_THROWS_AS(run_sweep(spec), std::invalid_argument);
    spec.seed_labels = {"straight"};
    spec.mc_rollouts = 999;
    CHECK_THROWS_AS(run_sweep(spec), std::invalid_argument);
}

TEST_CASE("sweep rows cover the grid in eta-major order") {
    SweepSpec spec;
    spec.scenario = sweep_scenario();
    spec.eta_values = {0.8, 0.9};
    spec.strategies = {Strategy::kLowVelocity, Strategy::kHighClearance};
    spec.seed_labels = {"straight", "high"};
    spec.mc_rollouts = 2000;

    const SweepReport report = run_sweep(spec);
    REQUIRE(report.rows.size() == 8);
    int idx = 0;
    for (double eta : spec.eta_values)
        for (Strategy strategy : spec.strategies)
            for (const std::string& label : spec.seed_labels) {
                const SweepRow& row = report.rows[size_t(idx)];
                CHECK(row.eta == eta);
                CHECK(row.strategy == strategy);
                CHECK(row.homotopy_label == label);
                CHECK(row.converged);
                CHECK(row.error.empty());
                CHECK(row.j_u > 0.0);
                CHECK(row.j_total >= row.j_u);
                CHECK(row.min_clearance > 0.0);
                CHECK(row.time_of_peak_speed >= 0.0);
                CHECK(row.time_of_peak_speed <= 1.0);
                CHECK(row.mc_per_step_min > 0.5);
                CHECK(row.mc_per_step_min <= 1.0);
                ++idx;
            }

    SUBCASE("ratio curves follow the eta grid") {
        const RatioCurve curve =
            ratio_curve(report, {Strategy::kLowVelocity, "straight"},
                        {Strategy::kHighClearance, "straight"});
        REQUIRE(curve.points.size() == 2);
        CHECK(curve.warnings.empty());
        CHECK(curve.points[0].first == 0.8);
        CHECK(curve.points[1].first == 0.9);
        for (const auto& [eta, ratio] : curve.points) {
            const auto find = [&](Strategy s) {
                for (const SweepRow& row : report.rows)
                    if (row.eta == eta && row.strategy == s &&
                        row.homotopy_label == "straight")
                        return row.j_u;
                return 0.0;
            };
            CHECK(ratio
                  == doctest::Approx(find(Strategy::kLowVelocity)
                                     / find(Strategy::kHighClearance))
                         .epsilon(1e-15));
        }

        // An empty label matches the first row of the strategy at each eta.
        const RatioCurve any_label =
            ratio_curve(report, {Strategy::kLowVelocity, ""},
                        {Strategy::kHighClearance, ""});
        REQUIRE(any_label.points.size() == 2);
        CHECK(any_label.points[0].second
              == doctest::Approx(curve.points[0].second).epsilon(1e-15));
    }

    SUBCASE("unconverged and missing cells are skipped with warnings") {
        SweepReport broken = report;
        broken.rows[0].converged = false;
        const RatioCurve curve =
            ratio_curve(broken, {Strategy::kLowVelocity, "straight"},
                        {Strategy::kHighClearance, "straight"});
        REQUIRE(curve.points.size() == 1);
        CHECK(curve.points[0].first == 0.9);
        REQUIRE(curve.warnings.size() == 1);
        CHECK(curve.warnings[0].find("unconverged") != std::string::npos);

        const RatioCurve empty =
            ratio_curve(report, {Strategy::kLowVelocity, "nope"},
                        {Strategy::kHighClearance, "straight"});
        CHECK(empty.points.empty());
        CHECK(empty.warnings.size() == 2);
    }

    SUBCASE("export writes the report and one file per curve") {
        const fs::path dir =
            fs::temp_directory_path() / "reachplan_harness_test";
        fs::create_directories(dir);
        const std::string path = (dir / "report.csv").string();
        export_sweep(report, path);

        std::ifstream in(path);
        REQUIRE(in.good());
        std::string line;
        std::getline(in, line);
        CHECK(line == "# reachplan sweep v1");
        std::getline(in, line);
        CHECK(line
              == "eta,strategy,homotopy,J_U,J_total,min_clearance,"
                 "time_of_peak_speed,mc_per_step_min,converged");
        int rows = 0;
        while (std::getline(in, line))
            if (!line.empty()) ++rows;
        CHECK(rows == 8);

        for (const char* name :
             {"report_lv_straight.csv", "report_lv_high.csv",
              "report_hc_straight.csv", "report_hc_high.csv"}) {
            std::ifstream curve(dir / name);
            REQUIRE(curve.good());
            std::string header;
            std::getline(curve, header);
            CHECK(header
                  == "eta,J_U,J_total,min_clearance,time_of_peak_speed,"
                     "mc_per_step_min");
            int curve_rows = 0;
            std::string row;
            while (std::getline(curve, row))
                if (!row.empty()) ++curve_rows;
            CHECK(curve_rows == 2);
        }
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
}

TEST_CASE("a failing cell keeps its row and records the error") {
    SweepSpec spec;
    spec.scenario = sweep_scenario();
    spec.eta_values = {0.8};
    spec.strategies = {Strategy::kLowVelocity};
    spec.seed_labels = {"straight", "missing_label"};
    spec.mc_rollouts = 1000;
    const SweepReport report = run_sweep(spec);
    REQUIRE(report.rows.size() == 2);
    CHECK(report.rows[0].converged);
    CHECK(!report.rows[1].converged);
    CHECK(report.rows[1].error.find("missing_label") != std::string::npos);
}
