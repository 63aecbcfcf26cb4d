#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "bids/prp_demand.hpp"
#include "bids/reset_problem.hpp"
#include "bids/water_model.hpp"

namespace bids::sim {

struct RolloutOptions {
    std::size_t episodes = 10000;
    double delta_tail = 1e-3;
    std::uint64_t seed = 1;
    bool record_trace = false;  // keep the first episode's steps
};

struct StepRecord {
    int day;
    double level;   // x before acting
    int age;        // t before acting
    bool flush;
    double order;
    double demand;
    double cost;    // undiscounted stage + flush cost
};

struct RolloutStats {
    double mean_cost = 0.0;
    double std_error = 0.0;
    double shortfall_frequency = 0.0;
    double flush_frequency = 0.0;
    double mean_order = 0.0;
    std::size_t episodes = 0;
    int horizon = 0;
    int max_age = 0;
    double min_level = 0.0;
    std::vector<StepRecord> trace;
};

/// Worst one-stage cost of the policy's own actions over grid points and
/// the instance's demand atoms.
inline double stage_cost_bound(const water::Instance& inst, const PolicyTable& policy) {
    const auto& pr = inst.problem;
    double bound = 0.0;
    for (int t = 0; t <= policy.horizon_cap(); ++t)
        for (std::size_t i = 0; i < inst.grid.size(); ++i) {
            const auto& e = policy.at(i, t);
            const auto pre = ResetTransition::apply(inst.grid[i], t, e.reset, pr.reset_state);
            for (const auto& a : inst.noise.atoms()) {
                double c = pr.stage_cost(pre.state, pre.age, e.control, a.value);
                if (e.reset) c += pr.reset_cost(inst.grid[i], t, a.value);
                bound = std::max(bound, c);
            }
        }
    return bound;
}

/// Smallest N >= 1 with gamma^N * bound / (1 - gamma) <= delta.
inline int effective_horizon(double gamma, double bound, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("effective_horizon: delta must be > 0");
    int n = 1;
    double tail = gamma * bound / (1.0 - gamma);
    while (tail > delta) {
        tail *= gamma;
        ++n;
        if (n > 1000000) throw std::runtime_error("effective_horizon: tail does not shrink");
    }
    return n;
}

/**
 * Monte Carlo estimate of the discounted cost of following `policy` from
 * the empty, fresh tank. Demand is drawn fresh from the demand model, not
 * from the solver's atoms; tank levels are mapped to the nearest grid point.
 */
inline RolloutStats rollout(const water::Instance& inst, const PolicyTable& policy,
                            const RolloutOptions& opts) {
    if (opts.episodes == 0) throw std::invalid_argument("rollout: episodes must be >= 1");
    const auto& pr = inst.problem;
    const int k = pr.horizon_cap;
    if (policy.horizon_cap() != k || policy.grid_points() != inst.grid.size())
        throw std::invalid_argument("rollout: policy shape does not match the instance");

    RolloutStats stats;
    stats.episodes = opts.episodes;
    stats.horizon = effective_horizon(pr.discount, stage_cost_bound(inst, policy), opts.delta_tail);
    stats.min_level = pr.reset_state;

    double mean = 0.0;  // Welford accumulators over episode totals
    double m2 = 0.0;
    std::size_t days = 0;
    std::size_t shortfall_days = 0;
    std::size_t flush_days = 0;
    double order_total = 0.0;

    for (std::size_t ep = 0; ep < opts.episodes; ++ep) {
        std::seed_seq seq{static_cast<std::uint32_t>(opts.seed), static_cast<std::uint32_t>(opts.seed >> 32),
                          static_cast<std::uint32_t>(ep), static_cast<std::uint32_t>(ep >> 32)};
        std::mt19937_64 rng(seq);

        double x = pr.reset_state;
        int t = 0;
        double discount = 1.0;
        double total = 0.0;
        for (int n = 0; n < stats.horizon; ++n) {
            const std::size_t i = inst.grid.nearest_index(x);
            const auto& action = policy.at(i, t);
            if (t == k && !action.reset)
                throw std::logic_error("rollout: policy keeps the tank at the age cap");
            const double d = prp::sample(inst.params.demand, rng);
            const auto pre = ResetTransition::apply(x, t, action.reset, pr.reset_state);

            double cost = pr.stage_cost(pre.state, pre.age, action.control, d);
            if (action.reset) cost += pr.reset_cost(x, t, d);
            total += discount * cost;
            discount *= pr.discount;

            ++days;
            if (pre.state + action.control - d < 0.0) ++shortfall_days;
            if (action.reset) ++flush_days;
            order_total += action.control;
            if (opts.record_trace && ep == 0)
                stats.trace.push_back({n, x, t, action.reset, action.control, d, cost});

            x = pr.dynamics(pre.state, pre.age, action.control, d);
            t = pre.age + 1;
            stats.max_age = std::max(stats.max_age, t);
            stats.min_level = std::min(stats.min_level, x);
        }
        const double delta = total - mean;
        mean += delta / static_cast<double>(ep + 1);
        m2 += delta * (total - mean);
    }

    const double n = static_cast<double>(opts.episodes);
    stats.mean_cost = mean;
    if (opts.episodes > 1) stats.std_error = std::sqrt(m2 / (n - 1.0)) / std::sqrt(n);
    stats.shortfall_frequency = static_cast<double>(shortfall_days) / static_cast<double>(days);
    stats.flush_frequency = static_cast<double>(flush_days) / static_cast<double>(days);
    stats.mean_order = order_total / static_cast<double>(days);
    return stats;
}

}  // namespace bids::sim
