#include "reachplan/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

namespace reachplan {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& message) {
    throw std::invalid_argument("scenario: " + message);
}

void check_keys(const json& object, const std::string& where,
                const std::set<std::string>& known, bool lax,
                std::vector<std::string>* warnings) {
    for (const auto& item : object.items()) {
        if (known.count(item.key())) continue;
        const std::string note = "unknown key \"" + item.key() + "\" in " + where;
        if (!lax) fail(note);
        if (warnings) warnings->push_back(note);
    }
}

double number_at(const json& object, const std::string& key,
                 const std::string& where) {
    if (!object.at(key).is_number())
        fail(where + "." + key + " must be a number");
    const double v = object.at(key).get<double>();
    if (!std::isfinite(v)) fail(where + "." + key + " must be finite");
    return v;
}

Eigen::Vector2d point_at(const json& value, const std::string& where) {
    if (!value.is_array() || value.size() != 2 || !value[0].is_number() ||
        !value[1].is_number())
        fail(where + " must be a [x, y] pair");
    const Eigen::Vector2d p(value[0].get<double>(), value[1].get<double>());
    if (!p.allFinite()) fail(where + " must be finite");
    return p;
}

std::pair<int, int> line_column(const std::string& text, size_t byte) {
    int line = 1, column = 1;
    for (size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

}  // namespace

CostWeights default_weights(const Eigen::Vector2d& goal, int steps) {
    CostWeights weights;
    weights.w << 1e4, 1e4, 1e2, 1e2, 1e-2, 1e-2;
    weights.target << goal.x(), goal.y(), 0.0, 0.0, 0.0, 0.0;
    weights.cost_window = steps;
    return weights;
}

StateMoments initial_state(const Scenario& scenario) {
    if (scenario.initial_override) return *scenario.initial_override;
    StateMoments x0;
    x0.mean << scenario.start.x(), scenario.start.y(), 0.0, 0.0, 0.0, 0.0;
    return x0;
}

SystemModel system_of(const Scenario& scenario) {
    return make_system(scenario.dt, scenario.steps, scenario.noise_x,
                       scenario.noise_y);
}

void validate_scenario(const Scenario& s) {
    if ((s.start - s.goal).norm() < 1e-12)
        fail("start and goal must be distinct");
    if (!(s.dt > 0.0)) fail("system.dt must be positive");
    if (s.steps < 2) fail("system.steps must be at least 2");
    if (s.noise_x < 0.0 || s.noise_y < 0.0)
        fail("system noise scales must be non-negative");
    for (size_t j = 0; j < s.obstacles.size(); ++j) {
        const Obstacle& o = s.obstacles[j];
        const std::string where = "obstacles[" + std::to_string(j) + "]";
        if (!(o.mu_r > 0.0)) fail(where + ".radius_mean must be positive");
        if (o.sigma_r < 0.0) fail(where + ".radius_std must be non-negative");
        if (o.sigma_r > o.mu_r / 3.0)
            fail(where + ".radius_std must not exceed radius_mean / 3");
        const double dist = std::hypot(s.goal.x() - o.mu_x, s.goal.y() - o.mu_y);
        if (dist <= o.mu_r)
            fail("goal lies inside the mean disc of " + where);
    }
    if ((s.weights.w.array() < 0.0).any())
        fail("weights.w entries must be non-negative");
    if (s.weights.cost_window < 1 || s.weights.cost_window > s.steps)
        fail("weights.window must lie in [1, steps]");
    if (!s.weights.target.allFinite()) fail("weights.target must be finite");
    std::set<std::string> labels{"straight"};
    for (const NamedSeed& seed : s.seeds) {
        if (seed.label.empty()) fail("seeds entries need a non-empty label");
        if (!labels.insert(seed.label).second)
            fail("duplicate seed label \"" + seed.label + "\"");
        for (const Eigen::Vector2d& p : seed.via)
            if (!p.allFinite()) fail("seed \"" + seed.label + "\" has a non-finite via point");
    }
    if (s.initial_override) {
        if (!s.initial_override->mean.allFinite() ||
            !s.initial_override->cov.allFinite())
            fail("initial override must be finite");
        const StateCov& cov = s.initial_override->cov;
        if ((cov - cov.transpose()).cwiseAbs().maxCoeff() >
            1e-9 * (1.0 + cov.cwiseAbs().maxCoeff()))
            fail("initial.cov must be symmetric");
    }
}

Scenario load_scenario(const std::string& path, bool lax,
                       std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) fail("cannot open \"" + path + "\"");
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();

    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, column] = line_column(text, e.byte ? e.byte - 1 : 0);
        fail("parse error at line " + std::to_string(line) + ", column " +
             std::to_string(column) + ": " + e.what());
    }
    if (!root.is_object()) fail("top level must be an object");
    check_keys(root, "top level",
               {"version", "start", "goal", "obstacles", "system", "weights",
                "seeds", "initial"},
               lax, warnings);

    if (!root.contains("version") || root["version"] != 1)
        fail("\"version\": 1 is required");
    if (!root.contains("start") || !root.contains("goal"))
        fail("\"start\" and \"goal\" are required");

    Scenario s;
    s.start = point_at(root["start"], "start");
    s.goal = point_at(root["goal"], "goal");

    if (root.contains("system")) {
        const json& sys = root["system"];
        if (!sys.is_object()) fail("system must be an object");
        check_keys(sys, "system", {"dt", "steps", "noise_x", "noise_y"}, lax,
                   warnings);
        if (sys.contains("dt")) s.dt = number_at(sys, "dt", "system");
        if (sys.contains("steps")) {
            if (!sys["steps"].is_number_integer())
                fail("system.steps must be an integer");
            s.steps = sys["steps"].get<int>();
        }
        if (sys.contains("noise_x")) s.noise_x = number_at(sys, "noise_x", "system");
        if (sys.contains("noise_y")) s.noise_y = number_at(sys, "noise_y", "system");
    }

    if (root.contains("obstacles")) {
        if (!root["obstacles"].is_array()) fail("obstacles must be an array");
        for (size_t j = 0; j < root["obstacles"].size(); ++j) {
            const json& node = root["obstacles"][j];
            const std::string where = "obstacles[" + std::to_string(j) + "]";
            if (!node.is_object()) fail(where + " must be an object");
            check_keys(node, where, {"x", "y", "radius_mean", "radius_std"}, lax,
                       warnings);
            Obstacle o;
            o.mu_x = number_at(node, "x", where);
            o.mu_y = number_at(node, "y", where);
            o.mu_r = number_at(node, "radius_mean", where);
            o.sigma_r =
                node.contains("radius_std") ? number_at(node, "radius_std", where) : 0.0;
            s.obstacles.push_back(o);
        }
    }

    s.weights = default_weights(s.goal, s.steps);
    if (root.contains("weights")) {
        const json& w = root["weights"];
        if (!w.is_object()) fail("weights must be an object");
        check_keys(w, "weights", {"w", "target", "window"}, lax, warnings);
        if (w.contains("w")) {
            if (!w["w"].is_array() || w["w"].size() != 6)
                fail("weights.w must have 6 entries");
            for (int i = 0; i < 6; ++i) s.weights.w(i) = w["w"][i].get<double>();
        }
        if (w.contains("target")) {
            if (!w["target"].is_array() || w["target"].size() != 6)
                fail("weights.target must have 6 entries");
            for (int i = 0; i < 6; ++i)
                s.weights.target(i) = w["target"][i].get<double>();
        }
        if (w.contains("window")) {
            if (!w["window"].is_number_integer())
                fail("weights.window must be an integer");
            s.weights.cost_window = w["window"].get<int>();
        }
    }

    if (root.contains("seeds")) {
        if (!root["seeds"].is_array()) fail("seeds must be an array");
        for (size_t i = 0; i < root["seeds"].size(); ++i) {
            const json& node = root["seeds"][i];
            const std::string where = "seeds[" + std::to_string(i) + "]";
            if (!node.is_object()) fail(where + " must be an object");
            check_keys(node, where, {"label", "via"}, lax, warnings);
            NamedSeed seed;
            if (!node.contains("label") || !node["label"].is_string())
                fail(where + ".label must be a string");
            seed.label = node["label"].get<std::string>();
            if (node.contains("via")) {
                if (!node["via"].is_array()) fail(where + ".via must be an array");
                for (size_t p = 0; p < node["via"].size(); ++p)
                    seed.via.push_back(point_at(
                        node["via"][p], where + ".via[" + std::to_string(p) + "]"));
            }
            s.seeds.push_back(seed);
        }
    }

    if (root.contains("initial")) {
        const json& node = root["initial"];
        if (!node.is_object()) fail("initial must be an object");
        check_keys(node, "initial", {"state", "cov"}, lax, warnings);
        StateMoments x0;
        if (!node.contains("state") || !node["state"].is_array() ||
            node["state"].size() != 6)
            fail("initial.state must have 6 entries");
        for (int i = 0; i < 6; ++i) x0.mean(i) = node["state"][i].get<double>();
        if (node.contains("cov")) {
            const json& cov = node["cov"];
            if (!cov.is_array() || cov.size() != 6) fail("initial.cov must be 6 rows");
            for (int i = 0; i < 6; ++i) {
                if (!cov[i].is_array() || cov[i].size() != 6)
                    fail("initial.cov rows must have 6 entries");
                for (int k = 0; k < 6; ++k) x0.cov(i, k) = cov[i][k].get<double>();
            }
        }
        s.initial_override = x0;
    }

    validate_scenario(s);
    return s;
}

void save_scenario(const Scenario& s, const std::string& path) {
    json root;
    root["version"] = 1;
    root["start"] = {s.start.x(), s.start.y()};
    root["goal"] = {s.goal.x(), s.goal.y()};
    root["system"] = {{"dt", s.dt},
                      {"steps", s.steps},
                      {"noise_x", s.noise_x},
                      {"noise_y", s.noise_y}};
    root["obstacles"] = json::array();
    for (const Obstacle& o : s.obstacles)
        root["obstacles"].push_back({{"x", o.mu_x},
                                     {"y", o.mu_y},
                                     {"radius_mean", o.mu_r},
                                     {"radius_std", o.sigma_r}});
    root["weights"] = {{"w", std::vector<double>(s.weights.w.data(),
                                                 s.weights.w.data() + 6)},
                       {"target", std::vector<double>(s.weights.target.data(),
                                                      s.weights.target.data() + 6)},
                       {"window", s.weights.cost_window}};
    if (!s.seeds.empty()) {
        root["seeds"] = json::array();
        for (const NamedSeed& seed : s.seeds) {
            json vias = json::array();
            for (const Eigen::Vector2d& p : seed.via)
                vias.push_back({p.x(), p.y()});
            root["seeds"].push_back({{"label", seed.label}, {"via", vias}});
        }
    }
    if (s.initial_override) {
        json cov = json::array();
        for (int i = 0; i < 6; ++i) {
            json row = json::array();
            for (int k = 0; k < 6; ++k) row.push_back(s.initial_override->cov(i, k));
            cov.push_back(row);
        }
        root["initial"] = {
            {"state", std::vector<double>(s.initial_override->mean.data(),
                                          s.initial_override->mean.data() + 6)},
            {"cov", cov}};
    }

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) fail("cannot open \"" + tmp + "\" for writing");
        out << root.dump(2) << "\n";
    }
    std::rename(tmp.c_str(), path.c_str());
}

}  // namespace reachplan
