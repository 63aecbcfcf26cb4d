#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bids/reset_problem.hpp"

namespace bids::vi {

/**
 * The discretized problem as an ordinary MDP over (grid point, age).
 *
 * Actions are (u, r). r = 1 pays E s(x,t,w) and then acts from (zeta, 0);
 * r = 0 is infeasible at age k.
 */
template <class Problem>
class AugmentedMDP {
public:
    AugmentedMDP(const Problem& problem, const StateGrid& grid, const DiscreteNoise& noise)
        : problem_(problem), grid_(grid), noise_(noise) {
        const int k = problem.horizon_cap;
        reset_costs_.assign(grid.size() * static_cast<std::size_t>(k + 1), 0.0);
        for (int t = 0; t <= k; ++t)
            for (std::size_t i = 0; i < grid.size(); ++i)
                reset_costs_[static_cast<std::size_t>(t) * grid.size() + i] =
                    expected_reset_cost(problem, grid[i], t, noise);
    }

    const Problem& problem() const { return problem_; }
    const StateGrid& grid() const { return grid_; }
    const DiscreteNoise& noise() const { return noise_; }
    int horizon_cap() const { return problem_.horizon_cap; }
    double discount() const { return problem_.discount; }

    double reset_cost(std::size_t i, int t) const {
        return reset_costs_[static_cast<std::size_t>(t) * grid_.size() + i];
    }

    /// min_u E[g(xi,tau,u,w) + gamma J(h(xi,tau,u,w), tau+1)]
    double best_action_value(const ValueTable& J, double xi, int tau) const {
        double best = std::numeric_limits<double>::infinity();
        const auto next = J.stage(tau + 1);
        for (double u : problem_.controls) {
            double acc = 0.0;
            for (const auto& a : noise_.atoms()) {
                const double cost = problem_.stage_cost(xi, tau, u, a.value);
                const double x_next = problem_.dynamics(xi, tau, u, a.value);
                acc += a.probability * (cost + problem_.discount * interpolate(next, grid_, x_next));
            }
            best = std::min(best, acc);
        }
        return best;
    }

private:
    const Problem& problem_;
    const StateGrid& grid_;
    const DiscreteNoise& noise_;
    std::vector<double> reset_costs_;
};

template <class Problem>
AugmentedMDP(const Problem&, const StateGrid&, const DiscreteNoise&) -> AugmentedMDP<Problem>;

struct Result {
    ValueTable values;
    double reset_value = 0.0;  // J(zeta, 0) evaluated with the final table
    int iterations = 0;
    bool converged = false;
    std::vector<double> sup_differences;  // ||J_{n+1} - J_n|| per sweep
};

/// One synchronous Bellman sweep over every (x_i, t).
template <class Problem>
ValueTable bellman_backup(const AugmentedMDP<Problem>& mdp, const ValueTable& J) {
    const int k = mdp.horizon_cap();
    const auto& grid = mdp.grid();
    ValueTable out(grid.size(), k);
    const double after_reset = mdp.best_action_value(J, mdp.problem().reset_state, 0);
    for (std::size_t i = 0; i < grid.size(); ++i) out(i, k) = mdp.reset_cost(i, k) + after_reset;
    for (int t = 0; t < k; ++t) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double reset = mdp.reset_cost(i, t) + after_reset;
            const double keep = mdp.best_action_value(J, grid[i], t);
            out(i, t) = std::min(reset, keep);
        }
    }
    out.set_reference(after_reset);
    return out;
}

/**
 * Value iteration from J = 0. Stops once the sweep difference certifies
 * ||J - J*|| <= tol, i.e. diff <= tol (1-gamma) / (2 gamma), additionally
 * capped at tol so that gamma -> 0 still needs a confirming sweep.
 */
template <class Problem>
Result solve_vi(const AugmentedMDP<Problem>& mdp, double tol, int max_iter) {
    if (!(tol > 0.0)) throw std::invalid_argument("solve_vi: tol must be > 0");
    if (max_iter < 1) throw std::invalid_argument("solve_vi: max_iter must be >= 1");
    const double gamma = mdp.discount();
    double threshold = tol;
    if (gamma > 0.0) threshold = std::min(tol, tol * (1.0 - gamma) / (2.0 * gamma));

    Result result{ValueTable(mdp.grid().size(), mdp.horizon_cap()), 0.0, 0, false, {}};
    while (result.iterations < max_iter) {
        ValueTable next = bellman_backup(mdp, result.values);
        const double diff = next.max_abs_difference(result.values);
        result.values = std::move(next);
        ++result.iterations;
        result.sup_differences.push_back(diff);
        if (diff <= threshold) {
            result.converged = true;
            break;
        }
    }
    result.reset_value = mdp.best_action_value(result.values, mdp.problem().reset_state, 0);
    return result;
}

}  // namespace bids::vi
