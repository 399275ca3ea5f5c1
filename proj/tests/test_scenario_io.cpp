#include <doctest.h>

#include <reachplan/plan_io.hpp>
#include <reachplan/scenario.hpp>
#include <reachplan/sqp.hpp>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

using namespace reachplan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path()
               / ("reachplan_io_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const {
        return (path / name).string();
    }
};

std::string write_file(const TempDir& dir, const std::string& name,
                       const std::string& content) {
    const std::string p = dir.file(name);
    std::ofstream out(p);
    out << content;
    return p;
}

const char* kMinimal = R"({
  "version": 1,
  "start": [0.0, 0.0],
  "goal": [0.3, 0.1]
})";

const char* kFull = R"({
  "version": 1,
  "start": [0.0, 0.0],
  "goal": [0.2, 0.0],
  "obstacles": [
    {"x": 0.1, "y": 0.01, "radius_mean": 0.03, "radius_std": 0.005}
  ],
  "system": {"dt": 0.02, "steps": 40, "noise_x": 0.1, "noise_y": 0.05},
  "weights": {"w": [1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
    "target": [0.2, 0.0, 0.0, 0.0, 0.0, 0.0], "window": 7},
  "seeds": [{"label": "up", "via": [[0.1, 0.05]]}]
})";

}  // namespace

TEST_CASE("minimal scenario gets the documented defaults") {
    TempDir dir;
    const Scenario sc = load_scenario(write_file(dir, "min.json", kMinimal));
    CHECK(sc.dt == 0.01);
    CHECK(sc.steps == 100);
    CHECK(sc.noise_x == 0.15);
    CHECK(sc.noise_y == 0.15);
    CHECK(sc.obstacles.empty());
    CHECK(sc.seeds.empty());
    CHECK(!sc.initial_override.has_value());
    CHECK(sc.weights.cost_window == 100);
    CHECK(sc.weights.w(0) == 1e4);
    CHECK(sc.weights.w(2) == 1e2);
    CHECK(sc.weights.w(4) == 1e-2);
    CHECK(sc.weights.target(0) == 0.3);
    CHECK(sc.weights.target(1) == 0.1);
    CHECK(sc.weights.target(2) == 0.0);

    const StateMoments x0 = initial_state(sc);
    CHECK(x0.mean(kX) == 0.0);
    CHECK(x0.mean(kY) == 0.0);
    CHECK(x0.cov.cwiseAbs().maxCoeff() == 0.0);

    const SystemModel sys = system_of(sc);
    CHECK(sys.dt == 0.01);
    CHECK(sys.horizon == 100);
}

TEST_CASE("full scenario round-trips through save and load") {
    TempDir dir;
    Scenario sc = load_scenario(write_file(dir, "full.json", kFull));
    CHECK(sc.steps == 40);
    CHECK(sc.dt == 0.02);
    CHECK(sc.noise_y == 0.05);
    REQUIRE(sc.obstacles.size() == 1);
    CHECK(sc.obstacles[0].mu_r == 0.03);
    CHECK(sc.weights.cost_window == 7);
    REQUIRE(sc.seeds.size() == 1);
    CHECK(sc.seeds[0].label == "up");

    sc.initial_override = StateMoments{};
    sc.initial_override->mean << 0.0, 0.0, 0.1, -0.05, 0.0, 0.0;
    sc.initial_override->cov.diagonal().setConstant(1e-6);

    const std::string saved = dir.file("roundtrip.json");
    save_scenario(sc, saved);
    const Scenario back = load_scenario(saved);
    CHECK(back.start == sc.start);
    CHECK(back.goal == sc.goal);
    CHECK(back.dt == sc.dt);
    CHECK(back.steps == sc.steps);
    CHECK(back.noise_x == sc.noise_x);
    CHECK(back.noise_y == sc.noise_y);
    REQUIRE(back.obstacles.size() == 1);
    CHECK(back.obstacles[0].mu_x == sc.obstacles[0].mu_x);
    CHECK(back.obstacles[0].sigma_r == sc.obstacles[0].sigma_r);
    CHECK((back.weights.w - sc.weights.w).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.weights.target - sc.weights.target).cwiseAbs().maxCoeff()
          == 0.0);
    CHECK(back.weights.cost_window == 7);
    REQUIRE(back.seeds.size() == 1);
    CHECK(back.seeds[0].label == "up");
    REQUIRE(back.seeds[0].via.size() == 1);
    CHECK(back.seeds[0].via[0] == sc.seeds[0].via[0]);
    REQUIRE(back.initial_override.has_value());
    CHECK((back.initial_override->mean - sc.initial_override->mean)
              .cwiseAbs()
              .maxCoeff()
          == 0.0);
    CHECK((back.initial_override->cov - sc.initial_override->cov)
              .cwiseAbs()
              .maxCoeff()
          == 0.0);
}

TEST_CASE("structural requirements of the scenario format") {
    TempDir dir;
    CHECK_THROWS_WITH_AS(
        load_scenario(write_file(dir, "v.json",
                                 R"({"start": [0,0], "goal": [1,0]})")),
        doctest::Contains("\"version\""), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        load_scenario(write_file(dir, "v2.json",
                                 R"({"version": 2, "start": [0,0],
                                     "goal": [1,0]})")),
        doctest::Contains("\"version\""), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        load_scenario(write_file(dir, "nostart.json", R"({"version": 1})")),
        doctest::Contains("required"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        load_scenario(write_file(dir, "arr.json", R"([1, 2, 3])")),
        doctest::Contains("object"), std::invalid_argument);
    CHECK_THROWS_AS(load_scenario(dir.file("missing.json")),
                    std::invalid_argument);
}

TEST_CASE("parse errors carry a line position") {
    TempDir dir;
    const std::string p =
        write_file(dir, "broken.json",
                   "{\n  \"version\": 1,\n  \"start\": [0, 0\n}");
    CHECK_THROWS_WITH_AS(load_scenario(p), doctest::Contains("line"),
                         std::invalid_argument);
}

TEST_CASE("unknown keys fail strict parsing and warn in lax mode") {
    TempDir dir;
    const std::string p = write_file(dir, "extra.json", R"({
      "version": 1, "start": [0,0], "goal": [1,0], "extra_key": 5
    })");
    CHECK_THROWS_WITH_AS(load_scenario(p), doctest::Contains("extra_key"),
                         std::invalid_argument);
    std::vector<std::string> warnings;
    const Scenario sc = load_scenario(p, true, &warnings);
    CHECK(sc.steps == 100);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("extra_key") != std::string::npos);
}

TEST_CASE("every validation rule names its violation") {
    Scenario base;
    base.start = {0.0, 0.0};
    base.goal = {0.3, 0.0};
    base.obstacles.push_back({0.15, 0.02, 0.03, 0.005});

    auto expect = [](Scenario sc, const char* needle) {
        try {
            validate_scenario(sc);
            FAIL_CHECK("expected a validation error containing: " << needle);
        } catch (const std::invalid_argument& err) {
            CHECK(std::string(err.what()).find(needle) != std::string::npos);
        }
    };

    Scenario sc = base;
    sc.goal = sc.start;
    expect(sc, "distinct");

    sc = base;
    sc.dt = 0.0;
    expect(sc, "dt");

    sc = base;
    sc.steps = 1;
    expect(sc, "steps");

    sc = base;
    sc.noise_x = -0.1;
    expect(sc, "noise");

    sc = base;
    sc.obstacles[0].mu_r = 0.0;
    expect(sc, "radius_mean");

    sc = base;
    sc.obstacles[0].sigma_r = -0.001;
    expect(sc, "radius_std");

    sc = base;
    sc.obstacles[0].sigma_r = 0.011;
    expect(sc, "radius_mean / 3");

    sc = base;
    sc.obstacles[0].mu_x = 0.29;
    sc.obstacles[0].mu_y = 0.0;
    expect(sc, "goal lies inside");

    sc = base;
    sc.weights.w(3) = -1.0;
    expect(sc, "weights.w");

    sc = base;
    sc.weights.cost_window = 0;
    expect(sc, "window");

    sc = base;
    sc.weights.cost_window = base.steps + 1;
    expect(sc, "window");

    sc = base;
    sc.seeds.push_back({"", {}});
    expect(sc, "label");

    sc = base;
    sc.seeds.push_back({"a", {}});
    sc.seeds.push_back({"a", {}});
    expect(sc, "duplicate");

    sc = base;
    sc.seeds.push_back({"straight", {}});
    expect(sc, "duplicate");

    sc = base;
    sc.initial_override = StateMoments{};
    sc.initial_override->cov(0, 1) = 1.0;
    expect(sc, "symmetric");

    base.weights = default_weights(base.goal, base.steps);
    base.weights.cost_window = base.steps;
    CHECK_NOTHROW(validate_scenario(base));
}

namespace {

PlanResult quick_plan(const Scenario& sc) {
    SolverConfig cfg = make_config(Strategy::kLowVelocity, 0.9);
    return solve(sc, seed_straight(sc.start, sc.goal, sc.steps), cfg);
}

Scenario tiny_scenario() {
    Scenario sc;
    sc.start = {0.0, 0.0};
    sc.goal = {0.12, 0.0};
    sc.obstacles.push_back({0.06, 0.006, 0.018, 0.0004});
    sc.dt = 0.01;
    sc.steps = 40;
    sc.weights = default_weights(sc.goal, sc.steps);
    sc.weights.cost_window = 8;
    return sc;
}

}  // namespace

TEST_CASE("plan files round-trip exactly") {
    TempDir dir;
    const Scenario sc = tiny_scenario();
    const PlanResult plan = quick_plan(sc);
    REQUIRE(plan.converged);

    const std::string path = dir.file("plan.csv");
    export_plan(plan, sc.dt, path);
    const PlanFile file = import_plan(path);

    CHECK(file.eta == plan.eta);
    CHECK(file.dt == sc.dt);
    CHECK(file.steps == sc.steps);
    CHECK(file.metadata.at("strategy") == "lv");
    CHECK(file.metadata.at("homotopy") == "straight");
    CHECK(file.metadata.at("converged") == "1");
    CHECK(parse_double(file.metadata.at("tau")) == plan.tau_final);
    CHECK(parse_double(file.metadata.at("lambda")) == plan.lambda_final);
    CHECK(parse_double(file.metadata.at("cost_effort")) == plan.cost_effort);

    REQUIRE(file.trajectory.rows() == sc.steps + 1);
    REQUIRE(file.controls.u.rows() == sc.steps);
    for (int t = 0; t <= sc.steps; ++t) {
        const StateMoments& s = plan.moments.states[size_t(t)];
        CHECK(file.trajectory(t, 0) == s.mean(kX));
        CHECK(file.trajectory(t, 1) == s.mean(kY));
        CHECK(file.trajectory(t, 2) == s.cov(kX, kX));
        CHECK(file.trajectory(t, 3) == s.cov(kY, kY));
    }
    CHECK((file.controls.u - plan.controls.u).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("malformed plan files are rejected") {
    TempDir dir;
    const Scenario sc = tiny_scenario();
    const PlanResult plan = quick_plan(sc);
    const std::string path = dir.file("plan.csv");
    export_plan(plan, sc.dt, path);

    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    in.close();

    auto rewrite = [&](const std::string& name, auto edit) {
        std::vector<std::string> copy = lines;
        edit(copy);
        const std::string p = dir.file(name);
        std::ofstream out(p);
        for (const std::string& l : copy) out << l << "\n";
        out.close();
        CHECK_THROWS_AS(import_plan(p), std::runtime_error);
    };

    rewrite("truncated.csv", [](std::vector<std::string>& l) { l.pop_back(); });
    rewrite("no_eta.csv", [](std::vector<std::string>& l) {
        for (std::string& s : l)
            if (s.rfind("# eta=", 0) == 0) s = "# misc=1";
    });
    rewrite("bad_columns.csv",
            [](std::vector<std::string>& l) { l.back() += ",9"; });
    rewrite("control_on_last.csv", [](std::vector<std::string>& l) {
        l.back() = l.back().substr(0, l.back().size() - 2) + "0.1,0.2";
    });
    rewrite("missing_control.csv", [](std::vector<std::string>& l) {
        for (std::string& s : l)
            if (s.rfind("1,", 0) == 0) {
                s = s.substr(0, s.find_last_of(','));
                s = s.substr(0, s.find_last_of(',')) + ",,";
                break;
            }
    });
    CHECK_THROWS_AS(import_plan(dir.file("absent.csv")), std::runtime_error);
}

TEST_CASE("doubles survive the text round trip") {
    for (double v : {1.0 / 3.0, -0.0, 1e-300, 6.02214076e23, 0.1, -2.5e-8,
                     1.7976931348623157e308}) {
        CHECK(parse_double(format_double(v)) == v);
    }
    CHECK(format_double(0.25) == "0.25");
    CHECK_THROWS_AS(parse_double("not_a_number"), std::runtime_error);
    CHECK_THROWS_AS(parse_double(""), std::runtime_error);
    CHECK_THROWS_AS(parse_double("1.5x"), std::runtime_error);
}

TEST_CASE("avoidance reports list one row per timestep") {
    TempDir dir;
    const Scenario sc = tiny_scenario();
    const PlanResult plan = quick_plan(sc);
    const MCReport rep = simulate(system_of(sc), initial_state(sc),
                                  plan.controls, sc.obstacles, 2000, 3);
    const std::string path = dir.file("mc.csv");
    export_mc_report(rep, path);

    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    int meta = 0, data = 0;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.rfind("# ", 0) == 0 || line.rfind("#", 0) == 0) {
            ++meta;
        } else if (line.rfind("t,", 0) == 0) {
            header = true;
            CHECK(line == "t,avoid_obs0");
        } else if (!line.empty()) {
            ++data;
        }
    }
    CHECK(header);
    CHECK(meta >= 4);
    CHECK(data == sc.steps + 1);
}
