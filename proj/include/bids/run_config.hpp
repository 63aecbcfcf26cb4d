#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "bids/water_model.hpp"

namespace bids::config {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SolverBlock {
    double epsilon = 0.1;
    std::size_t n_atoms = 500;
    std::uint64_t seed = 20180101;
    double grid_lower = 0.0;
    double grid_upper = 120.0;
    std::size_t grid_points = 241;
    double control_lower = 0.0;
    double control_upper = 120.0;
    std::size_t control_points = 241;
};

struct ViBlock {
    double tol = 1e-6;
    int max_iter = 100000;
    std::vector<double> discounts{0.8, 0.95, 0.99};
};

struct SimBlock {
    std::size_t episodes = 10000;
    double delta_tail = 1e-3;
    std::uint64_t seed = 7;
};

/// Fully resolved run configuration; every field has a default.
struct RunConfig {
    water::WaterParams water{};
    SolverBlock solver{};
    ViBlock vi{};
    SimBlock sim{};

    /// Water parameters with the solver block's grid and noise settings applied.
    water::WaterParams water_params() const {
        water::WaterParams p = water;
        p.grid = {solver.grid_lower, solver.grid_upper, solver.grid_points};
        p.controls = {solver.control_lower, solver.control_upper, solver.control_points};
        p.noise = {solver.n_atoms, solver.seed};
        return p;
    }
};

namespace detail {

/// 1-based line of the first occurrence of "key" in the source text, or 0.
inline std::size_t line_of(const std::string& text, const std::string& key) {
    const auto pos = text.find("\"" + key + "\"");
    if (pos == std::string::npos) return 0;
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
}

class Reader {
public:
    explicit Reader(const std::string& text) : text_(text) {}

    [[noreturn]] void fail(const std::string& path, const std::string& key, const std::string& what) const {
        std::ostringstream os;
        os << "config";
        if (const auto line = line_of(text_, key); line > 0) os << " line " << line;
        os << ": " << path << ": " << what;
        throw ConfigError(os.str());
    }

    void reject_unknown(const nlohmann::json& obj, const std::string& path,
                        const std::set<std::string>& allowed) const {
        if (!obj.is_object()) fail(path, path, "must be an object");
        for (const auto& [key, _] : obj.items())
            if (!allowed.count(key)) fail(path + "." + key, key, "unknown key");
    }

    template <class T>
    void read(const nlohmann::json& obj, const std::string& path, const std::string& key, T& out) const {
        if (!obj.contains(key)) return;
        const auto& v = obj.at(key);
        const std::string full = path + "." + key;
        if constexpr (std::is_same_v<T, double>) {
            if (!v.is_number()) fail(full, key, "expected a number");
            out = v.get<double>();
        } else if constexpr (std::is_same_v<T, int>) {
            if (!v.is_number_integer()) fail(full, key, "expected an integer");
            out = v.get<int>();
        } else if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
            if (!v.is_number_unsigned()) fail(full, key, "expected a non-negative integer");
            out = v.get<T>();
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
            if (!v.is_array() || v.empty()) fail(full, key, "expected a non-empty array of numbers");
            out.clear();
            for (const auto& x : v) {
                if (!x.is_number()) fail(full, key, "expected a non-empty array of numbers");
                out.push_back(x.get<double>());
            }
        }
    }

private:
    const std::string& text_;
};

}  // namespace detail

/// Parses and validates a config document. Missing keys keep their defaults;
/// unknown keys and out-of-range values are errors naming the key and line.
inline RunConfig parse_config(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    detail::Reader r(text);
    RunConfig cfg;
    r.reject_unknown(doc, "$", {"water", "solver", "vi", "sim"});

    if (doc.contains("water")) {
        const auto& w = doc["water"];
        r.reject_unknown(w, "water", {"purchase_cost", "shortage_penalty", "flush_penalty",
                                      "holding_slope", "event_rate", "duration_rate",
                                      "horizon_cap", "discount"});
        r.read(w, "water", "purchase_cost", cfg.water.purchase_cost);
        r.read(w, "water", "shortage_penalty", cfg.water.shortage_penalty);
        r.read(w, "water", "flush_penalty", cfg.water.flush_penalty);
        r.read(w, "water", "holding_slope", cfg.water.holding_slope);
        r.read(w, "water", "event_rate", cfg.water.demand.event_rate);
        r.read(w, "water", "duration_rate", cfg.water.demand.duration_rate);
        r.read(w, "water", "horizon_cap", cfg.water.horizon_cap);
        r.read(w, "water", "discount", cfg.water.discount);
    }
    if (doc.contains("solver")) {
        const auto& s = doc["solver"];
        r.reject_unknown(s, "solver", {"epsilon", "n_atoms", "seed", "grid_lower", "grid_upper",
                                       "grid_points", "control_lower", "control_upper",
                                       "control_points"});
        r.read(s, "solver", "epsilon", cfg.solver.epsilon);
        r.read(s, "solver", "n_atoms", cfg.solver.n_atoms);
        r.read(s, "solver", "seed", cfg.solver.seed);
        r.read(s, "solver", "grid_lower", cfg.solver.grid_lower);
        r.read(s, "solver", "grid_upper", cfg.solver.grid_upper);
        r.read(s, "solver", "grid_points", cfg.solver.grid_points);
        r.read(s, "solver", "control_lower", cfg.solver.control_lower);
        r.read(s, "solver", "control_upper", cfg.solver.control_upper);
        r.read(s, "solver", "control_points", cfg.solver.control_points);
        if (!(cfg.solver.epsilon > 0.0)) r.fail("solver.epsilon", "epsilon", "must be > 0");
    }
    if (doc.contains("vi")) {
        const auto& v = doc["vi"];
        r.reject_unknown(v, "vi", {"tol", "max_iter", "discounts"});
        r.read(v, "vi", "tol", cfg.vi.tol);
        r.read(v, "vi", "max_iter", cfg.vi.max_iter);
        r.read(v, "vi", "discounts", cfg.vi.discounts);
        if (!(cfg.vi.tol > 0.0)) r.fail("vi.tol", "tol", "must be > 0");
        if (cfg.vi.max_iter < 1) r.fail("vi.max_iter", "max_iter", "must be >= 1");
        for (double g : cfg.vi.discounts)
            if (!(g >= 0.0 && g < 1.0)) r.fail("vi.discounts", "discounts", "entries must lie in [0, 1)");
    }
    if (doc.contains("sim")) {
        const auto& s = doc["sim"];
        r.reject_unknown(s, "sim", {"episodes", "delta_tail", "seed"});
        r.read(s, "sim", "episodes", cfg.sim.episodes);
        r.read(s, "sim", "delta_tail", cfg.sim.delta_tail);
        r.read(s, "sim", "seed", cfg.sim.seed);
        if (cfg.sim.episodes < 1) r.fail("sim.episodes", "episodes", "must be >= 1");
        if (!(cfg.sim.delta_tail > 0.0)) r.fail("sim.delta_tail", "delta_tail", "must be > 0");
    }

    if (auto errors = cfg.water_params().validate(); !errors.empty()) {
        std::string msg = "config: invalid parameters:";
        for (const auto& e : errors) msg += "\n  " + e;
        throw ConfigError(msg);
    }
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

inline nlohmann::ordered_json to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["water"] = {{"purchase_cost", c.water.purchase_cost},
                  {"shortage_penalty", c.water.shortage_penalty},
                  {"flush_penalty", c.water.flush_penalty},
                  {"holding_slope", c.water.holding_slope},
                  {"event_rate", c.water.demand.event_rate},
                  {"duration_rate", c.water.demand.duration_rate},
                  {"horizon_cap", c.water.horizon_cap},
                  {"discount", c.water.discount}};
    j["solver"] = {{"epsilon", c.solver.epsilon},
                   {"n_atoms", c.solver.n_atoms},
                   {"seed", c.solver.seed},
                   {"grid_lower", c.solver.grid_lower},
                   {"grid_upper", c.solver.grid_upper},
                   {"grid_points", c.solver.grid_points},
                   {"control_lower", c.solver.control_lower},
                   {"control_upper", c.solver.control_upper},
                   {"control_points", c.solver.control_points}};
    j["vi"] = {{"tol", c.vi.tol}, {"max_iter", c.vi.max_iter}, {"discounts", c.vi.discounts}};
    j["sim"] = {{"episodes", c.sim.episodes}, {"delta_tail", c.sim.delta_tail}, {"seed", c.sim.seed}};
    return j;
}

}  // namespace bids::config
