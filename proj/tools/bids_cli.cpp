// bids: solve, compare, simulate and export storage policies for the
// water-tank flushing problem.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bids/bids.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

enum Exit : int {
    kOk = 0,
    kConfigError = 2,
    kOracleMismatch = 3,
    kIoError = 4,
    kSolverError = 5,
    kPolicyError = 6,
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<double> epsilon;
};

bids::config::RunConfig resolve(const Common& c) {
    bids::config::RunConfig cfg;
    if (!c.config_path.empty()) {
        if (!fs::is_regular_file(c.config_path)) throw IoError("cannot read config '" + c.config_path + "'");
        cfg = bids::config::load_config(c.config_path);
    }
    if (c.seed) {
        cfg.solver.seed = *c.seed;
        cfg.sim.seed = *c.seed;
    }
    if (c.epsilon) {
        if (!(*c.epsilon > 0.0)) throw bids::config::ConfigError("--epsilon: must be > 0");
        cfg.solver.epsilon = *c.epsilon;
    }
    return cfg;
}

fs::path prepare_out(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
    return fs::path(dir);
}

template <class Writer>
void write_file(const fs::path& path, Writer&& writer) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    writer(os);
    os.flush();
    if (!os) throw IoError("write failed for '" + path.string() + "'");
}

void write_json(const fs::path& path, const ojson& j) {
    write_file(path, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double seconds(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- solve / export-policy -------------------------------------------------

struct Solved {
    bids::water::Instance inst;
    bids::SolveReport report;
};

Solved run_solver(const bids::config::RunConfig& cfg) {
    auto inst = bids::water::build_problem(cfg.water_params());
    auto report = bids::solve(inst.problem, inst.grid, inst.noise, cfg.solver.epsilon);
    return {std::move(inst), std::move(report)};
}

void write_policy_files(const fs::path& out, const Solved& s, const ojson& config) {
    const auto rows = bids::water::policy_rows(s.report.policy, s.inst.grid);
    write_file(out / "policy.csv", [&](std::ostream& os) { bids::water::write_policy_csv(os, rows); });
    write_json(out / "policy.json",
               bids::water::policy_json(rows, s.inst.grid, s.inst.problem.horizon_cap, config));
}

ojson zones_json(const bids::water::ZoneClassification& z) {
    ojson arr = ojson::array();
    for (const auto& age : z.ages) {
        ojson zones = ojson::array();
        for (const auto& iv : age.zones)
            zones.push_back({{"zone", std::string(bids::water::zone_name(iv.zone))},
                             {"x_low_L", iv.x_low},
                             {"x_high_L", iv.x_high}});
        arr.push_back({{"t", age.age}, {"thresholds_L", age.thresholds()}, {"zones", zones}});
    }
    return arr;
}

int cmd_solve(const Common& c, bool policy_only) {
    const auto cfg = resolve(c);
    const auto out = prepare_out(c.out_dir);
    const ojson config = bids::config::to_json(cfg);

    const Solved s = run_solver(cfg);
    const auto& r = s.report;
    const auto& grid = s.inst.grid;
    const int k = s.inst.problem.horizon_cap;
    const auto zones = bids::water::classify_zones(r.policy, grid);

    write_json(out / "config.resolved.json", config);
    write_policy_files(out, s, config);

    const auto zeta = grid.nearest_index(s.inst.problem.reset_state);
    std::printf("v* = %s  (Upsilon(v*) = %s, epsilon = %s)\n", bids::fmt::number(r.v_star).c_str(),
                bids::fmt::number(r.upsilon_star).c_str(), bids::fmt::number(r.epsilon).c_str());
    std::printf("outer iterations: %d (bound %d), wall time %.3f s\n", r.iterations,
                bids::iteration_bound(r.initial_upper, r.epsilon), r.wall_time.count());
    std::printf("after a flush, order %s L\n", bids::fmt::number(r.policy.at(zeta, 0).control).c_str());
    for (const auto& age : zones.ages) {
        std::printf("t=%d:", age.age);
        for (const auto& iv : age.zones)
            std::printf(" %s [%s, %s]", std::string(bids::water::zone_name(iv.zone)).c_str(),
                        bids::fmt::number(iv.x_low).c_str(), bids::fmt::number(iv.x_high).c_str());
        std::printf("\n");
    }
    for (const auto& w : zones.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    if (policy_only) return kOk;

    ojson history = ojson::array();
    for (const auto& step : r.bracket_history) history.push_back({{"v", step.v}, {"upsilon", step.upsilon}});
    ojson rep;
    rep["config"] = config;
    rep["epsilon"] = r.epsilon;
    rep["v_star"] = r.v_star;
    rep["upsilon_star"] = r.upsilon_star;
    rep["initial_upper"] = r.initial_upper;
    rep["iterations"] = r.iterations;
    rep["iteration_bound"] = bids::iteration_bound(r.initial_upper, r.epsilon);
    rep["final_bracket"] = {{"lower", r.final_bracket.lower}, {"upper", r.final_bracket.upper}};
    rep["bracket_history"] = history;
    rep["after_flush_order_L"] = r.policy.at(zeta, 0).control;
    rep["zones"] = zones_json(zones);
    rep["warnings"] = zones.warnings;
    write_json(out / "solve_report.json", rep);
    write_json(out / "timing.json", {{"wall_time_s", r.wall_time.count()}});

    write_file(out / "value_table.csv", [&](std::ostream& os) {
        os << "x_L,t,V\n";
        for (int t = 0; t <= k; ++t)
            for (std::size_t i = 0; i < grid.size(); ++i)
                os << bids::fmt::number(grid[i]) << ',' << t << ',' << bids::fmt::number(r.value_table(i, t)) << '\n';
    });

    for (int t = 1; t <= k; ++t) {
        const auto& age = zones.ages[static_cast<std::size_t>(t)];
        write_file(out / ("panel_t" + std::to_string(t) + ".csv"), [&](std::ostream& os) {
            os << "x_L,V,order_L,flush,zone\n";
            std::size_t z = 0;
            for (std::size_t i = 0; i < grid.size(); ++i) {
                while (age.zones[z].last < i) ++z;
                const auto& e = r.policy.at(i, t);
                os << bids::fmt::number(grid[i]) << ',' << bids::fmt::number(r.value_table(i, t)) << ','
                   << bids::fmt::number(e.control) << ',' << (e.reset ? 1 : 0) << ','
                   << bids::water::zone_name(age.zones[z].zone) << '\n';
            }
        });
    }
    return kOk;
}

// ---- compare ---------------------------------------------------------------

int cmd_compare(const Common& c) {
    const auto cfg = resolve(c);
    const auto out = prepare_out(c.out_dir);
    const double eps = cfg.solver.epsilon;
    const double tol = cfg.vi.tol;

    ojson rows = ojson::array();
    bool mismatch = false;
    bool stalled = false;
    std::ostringstream csv;
    csv << "gamma,v_star,J0,abs_diff,max_deviation,bids_iterations,bids_bound,vi_iterations,vi_converged,bids_time_s,vi_time_s\n";
    std::printf("%-6s %12s %12s %10s %10s %5s %5s %8s %9s %9s\n", "gamma", "v*", "J0", "|v*-J0|", "max dev",
                "bids", "bound", "vi", "bids s", "vi s");

    for (double gamma : cfg.vi.discounts) {
        auto run = cfg;
        run.water.discount = gamma;
        const auto inst = bids::water::build_problem(run.water_params());

        const auto t0 = std::chrono::steady_clock::now();
        const auto rep = bids::solve(inst.problem, inst.grid, inst.noise, eps);
        const double bids_s = seconds(t0);

        const auto t1 = std::chrono::steady_clock::now();
        bids::vi::AugmentedMDP mdp(inst.problem, inst.grid, inst.noise);
        const auto vi = bids::vi::solve_vi(mdp, tol, run.vi.max_iter);
        const double vi_s = seconds(t1);

        const auto zeta = inst.grid.nearest_index(inst.problem.reset_state);
        const double j0 = vi.values(zeta, 0);
        const double diff = std::abs(rep.v_star - j0);
        const double dev = rep.value_table.max_abs_difference(vi.values);
        const int bound = bids::iteration_bound(rep.initial_upper, eps);
        if (dev > eps + tol || diff > eps + tol) mismatch = true;
        if (!vi.converged) stalled = true;

        rows.push_back({{"gamma", gamma},
                        {"v_star", rep.v_star},
                        {"J0", j0},
                        {"abs_diff", diff},
                        {"max_deviation", dev},
                        {"bids_iterations", rep.iterations},
                        {"bids_bound", bound},
                        {"vi_iterations", vi.iterations},
                        {"vi_converged", vi.converged},
                        {"bids_time_s", bids_s},
                        {"vi_time_s", vi_s}});
        csv << bids::fmt::number(gamma) << ',' << bids::fmt::number(rep.v_star) << ',' << bids::fmt::number(j0)
            << ',' << bids::fmt::number(diff) << ',' << bids::fmt::number(dev) << ',' << rep.iterations << ','
            << bound << ',' << vi.iterations << ',' << (vi.converged ? 1 : 0) << ','
            << bids::fmt::number(bids_s) << ',' << bids::fmt::number(vi_s) << '\n';
        std::printf("%-6g %12.6f %12.6f %10.3e %10.3e %5d %5d %8d %9.3f %9.3f\n", gamma, rep.v_star, j0, diff, dev,
                    rep.iterations, bound, vi.iterations, bids_s, vi_s);
    }

    ojson doc;
    doc["config"] = bids::config::to_json(cfg);
    doc["tolerance"] = eps + tol;
    doc["rows"] = rows;
    doc["agree"] = !mismatch;
    write_json(out / "compare.json", doc);
    write_file(out / "compare.csv", [&](std::ostream& os) { os << csv.str(); });

    if (stalled) {
        std::fprintf(stderr, "error: value iteration hit vi.max_iter before converging\n");
        return kSolverError;
    }
    if (mismatch) {
        std::fprintf(stderr, "error: BiDS and value iteration disagree beyond epsilon + tol = %g\n", eps + tol);
        return kOracleMismatch;
    }
    std::printf("agreement within %g on every discount\n", eps + tol);
    return kOk;
}

// ---- simulate --------------------------------------------------------------

int cmd_simulate(const Common& c, const std::string& policy_path, std::optional<std::size_t> episodes) {
    auto cfg = resolve(c);
    if (episodes) {
        if (*episodes < 1) throw bids::config::ConfigError("--episodes: must be >= 1");
        cfg.sim.episodes = *episodes;
    }
    const auto out = prepare_out(c.out_dir);
    const auto inst = bids::water::build_problem(cfg.water_params());

    const std::string text = read_text(policy_path);
    std::vector<bids::water::PolicyRow> rows;
    if (fs::path(policy_path).extension() == ".json") {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw bids::water::PolicyFormatError(std::string("policy json: ") + e.what());
        }
        rows = bids::water::parse_policy_json_rows(j);
    } else {
        std::istringstream is(text);
        rows = bids::water::parse_policy_csv_rows(is);
    }
    const auto policy = bids::water::policy_from_rows(rows, inst.grid, inst.problem.controls, inst.problem.horizon_cap);

    const bids::sim::RolloutOptions opts{cfg.sim.episodes, cfg.sim.delta_tail, cfg.sim.seed, cfg.sim.episodes == 1};
    const auto stats = bids::sim::rollout(inst, policy, opts);

    ojson doc;
    doc["config"] = bids::config::to_json(cfg);
    doc["policy_file"] = fs::path(policy_path).filename().string();
    doc["mean_cost"] = stats.mean_cost;
    doc["std_error"] = stats.std_error;
    doc["episodes"] = stats.episodes;
    doc["horizon"] = stats.horizon;
    doc["shortfall_frequency"] = stats.shortfall_frequency;
    doc["flush_frequency"] = stats.flush_frequency;
    doc["mean_order_L"] = stats.mean_order;
    doc["max_age"] = stats.max_age;
    doc["min_level_L"] = stats.min_level;
    write_json(out / "rollout.json", doc);
    write_file(out / "rollout.csv", [&](std::ostream& os) {
        os << "mean_cost,std_error,episodes,horizon,shortfall_frequency,flush_frequency,mean_order_L\n"
           << bids::fmt::number(stats.mean_cost) << ',' << bids::fmt::number(stats.std_error) << ','
           << stats.episodes << ',' << stats.horizon << ',' << bids::fmt::number(stats.shortfall_frequency) << ','
           << bids::fmt::number(stats.flush_frequency) << ',' << bids::fmt::number(stats.mean_order) << '\n';
    });
    if (!stats.trace.empty()) {
        write_file(out / "trace.csv", [&](std::ostream& os) {
            os << "day,level_L,age,flush,order_L,demand_L,cost\n";
            for (const auto& s : stats.trace)
                os << s.day << ',' << bids::fmt::number(s.level) << ',' << s.age << ',' << (s.flush ? 1 : 0) << ','
                   << bids::fmt::number(s.order) << ',' << bids::fmt::number(s.demand) << ','
                   << bids::fmt::number(s.cost) << '\n';
        });
    }
    std::printf("discounted cost %s +- %s (%zu episodes, horizon %d days)\n", bids::fmt::number(stats.mean_cost).c_str(),
                bids::fmt::number(stats.std_error).c_str(), stats.episodes, stats.horizon);
    std::printf("shortfall days %.4f, flush days %.4f, mean order %.3f L\n", stats.shortfall_frequency,
                stats.flush_frequency, stats.mean_order);
    return kOk;
}

// ---- demand-stats ----------------------------------------------------------

int cmd_demand_stats(const Common& c, std::size_t samples, double bin_width) {
    const auto cfg = resolve(c);
    if (samples < 2) throw bids::config::ConfigError("--samples: must be >= 2");
    if (!(bin_width > 0.0)) throw bids::config::ConfigError("--bin-width: must be > 0");
    const auto out = prepare_out(c.out_dir);
    const auto& p = cfg.water.demand;

    std::mt19937_64 rng(cfg.solver.seed);
    std::vector<double> draws(samples);
    for (auto& d : draws) d = bids::prp::sample(p, rng);

    double mean = 0.0, m2 = 0.0;
    std::size_t zeros = 0;
    double max_draw = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        const double delta = draws[i] - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (draws[i] - mean);
        if (draws[i] == 0.0) ++zeros;
        max_draw = std::max(max_draw, draws[i]);
    }
    const double var = m2 / static_cast<double>(samples - 1);
    const auto analytic = bids::prp::moments(p);
    const double zero_mass = bids::prp::atom_mass(p);
    const double n = static_cast<double>(samples);

    // first row is the atom at zero; then [lo, hi) bins of positive demand
    const std::size_t bins = static_cast<std::size_t>(std::floor(max_draw / bin_width)) + 1;
    std::vector<std::size_t> counts(bins, 0);
    for (double d : draws)
        if (d > 0.0) ++counts[std::min(bins - 1, static_cast<std::size_t>(std::floor(d / bin_width)))];
    double total_mass = static_cast<double>(zeros) / n;
    for (auto k : counts) total_mass += static_cast<double>(k) / n;

    write_file(out / "demand_histogram.csv", [&](std::ostream& os) {
        os << "bin_low_L,bin_high_L,mass\n";
        os << "0,0," << bids::fmt::number(static_cast<double>(zeros) / n) << '\n';
        for (std::size_t b = 0; b < bins; ++b)
            os << bids::fmt::number(bin_width * static_cast<double>(b)) << ','
               << bids::fmt::number(bin_width * static_cast<double>(b + 1)) << ','
               << bids::fmt::number(static_cast<double>(counts[b]) / n) << '\n';
    });
    ojson doc;
    doc["config"] = bids::config::to_json(cfg);
    doc["samples"] = samples;
    doc["analytic"] = {{"mean_L", analytic.mean}, {"variance_L2", analytic.variance}, {"zero_mass", zero_mass}};
    doc["empirical"] = {{"mean_L", mean}, {"variance_L2", var}, {"zero_fraction", static_cast<double>(zeros) / n}};
    doc["histogram_mass"] = total_mass;
    write_json(out / "demand_stats.json", doc);

    std::printf("%-10s %24s %24s\n", "", "analytic", "empirical");
    std::printf("%-10s %24.6f %24.6f\n", "mean L", analytic.mean, mean);
    std::printf("%-10s %24.6f %24.6f\n", "var L^2", analytic.variance, var);
    std::printf("%-10s %24s %24s\n", "P(d=0)", bids::fmt::scientific(zero_mass).c_str(),
                bids::fmt::scientific(static_cast<double>(zeros) / n).c_str());
    std::printf("histogram: %zu bins of %s L, total mass %s\n", bins + 1, bids::fmt::number(bin_width).c_str(),
                bids::fmt::number(total_mass).c_str());
    return kOk;
}

void add_common(CLI::App* sub, Common& c, bool with_epsilon) {
    sub->add_option("--config", c.config_path, "JSON run configuration (defaults when omitted)");
    sub->add_option("--out", c.out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", c.seed, "override solver and simulation seeds");
    if (with_epsilon) sub->add_option("--epsilon", c.epsilon, "override solver.epsilon");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reset-constrained storage policies by binary search on the reset value"};
    app.require_subcommand(1);

    Common common;
    std::string policy_path;
    std::optional<std::size_t> episodes;
    std::size_t samples = 1000000;
    double bin_width = 1.0;

    auto* solve = app.add_subcommand("solve", "solve the instance and write report, tables, policy and panels");
    add_common(solve, common, true);
    auto* compare = app.add_subcommand("compare", "run BiDS and value iteration over vi.discounts");
    add_common(compare, common, true);
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo cost of an exported policy");
    add_common(simulate, common, false);
    simulate->add_option("--policy", policy_path, "policy.csv or policy.json")->required();
    simulate->add_option("--episodes", episodes, "override sim.episodes");
    auto* exporter = app.add_subcommand("export-policy", "solve and write only the policy table");
    add_common(exporter, common, true);
    auto* demand = app.add_subcommand("demand-stats", "analytic vs sampled demand statistics");
    add_common(demand, common, false);
    demand->add_option("--samples", samples, "number of demand draws")->capture_default_str();
    demand->add_option("--bin-width", bin_width, "histogram bin width in L")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*solve) return cmd_solve(common, false);
        if (*exporter) return cmd_solve(common, true);
        if (*compare) return cmd_compare(common);
        if (*simulate) return cmd_simulate(common, policy_path, episodes);
        if (*demand) return cmd_demand_stats(common, samples, bin_width);
    } catch (const bids::config::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kConfigError;
    } catch (const bids::water::PolicyFormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kPolicyError;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kIoError;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kConfigError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kSolverError;
    }
    return kSolverError;
}
