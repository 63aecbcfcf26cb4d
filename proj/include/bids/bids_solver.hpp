#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "bids/reset_problem.hpp"

namespace bids {

/// Search interval for the reset-state value; the fixed point stays inside.
struct Bracket {
    double lower = 0.0;
    double upper = 0.0;

    double width() const { return upper - lower; }
    double midpoint() const { return 0.5 * (upper + lower); }
};

struct BracketStep {
    double v;
    double upsilon;
};

/// Result of one backward evaluation of the recursion at trial value v.
struct BackwardPass {
    ValueTable table;
    double upsilon;
    std::size_t upsilon_control;  // argmin over the control grid at (zeta, 0)
};

struct SolveReport {
    double v_star = 0.0;
    double upsilon_star = 0.0;  // Upsilon(v_star)
    double epsilon = 0.0;
    double initial_upper = 0.0;
    int iterations = 0;
    Bracket final_bracket;
    std::vector<BracketStep> bracket_history;
    ValueTable value_table{2, 1};
    PolicyTable policy{2, 1};
    std::chrono::duration<double> wall_time{0.0};
};

class BracketError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Perturbation bound on min: |min(a',b') - min(a,b)| <= eps
/// whenever both arguments move by at most eps.
inline bool min_perturbation_holds(double a, double b, double a2, double b2, double eps) {
    return std::abs(std::min(a2, b2) - std::min(a, b)) <= eps;
}

/// Outer-iteration budget ceil(log2(width/eps)) + 1 for a bracket of the given width.
inline int iteration_bound(double width, double epsilon) {
    if (width <= epsilon) return 1;
    return static_cast<int>(std::ceil(std::log2(width / epsilon))) + 1;
}

/**
 * Initial upper end of the bracket:
 *   (1/(1-gamma)) min_u E_{w0,w1}[ g(zeta,0,u,w0) + gamma s(h(zeta,0,u,w0),1,w1) ]
 * with the double expectation taken over independent atom pairs.
 */
template <class Problem>
double upper_bound(const Problem& problem, const StateGrid& /*grid*/, const DiscreteNoise& noise) {
    const double zeta = problem.reset_state;
    const double gamma = problem.discount;
    double best = std::numeric_limits<double>::infinity();
    for (double u : problem.controls) {
        double acc = 0.0;
        for (const auto& a0 : noise.atoms()) {
            const double g = problem.stage_cost(zeta, 0, u, a0.value);
            const double next = problem.dynamics(zeta, 0, u, a0.value);
            for (const auto& a1 : noise.atoms())
                acc += a0.probability * a1.probability *
                       (g + gamma * problem.reset_cost(next, 1, a1.value));
        }
        best = std::min(best, acc);
    }
    return best / (1.0 - gamma);
}

/**
 * Backward evaluation at trial value v:
 *   V(x,k,v) = v + E s(x,k,w)
 *   V(x,t,v) = min{ v + E s(x,t,w), min_u E[g + gamma V(h, t+1, v)] },  t = k-1..0
 *   Upsilon(v) = min_u E[g(zeta,0,u,w) + gamma V(h(zeta,0,u,w), 1, v)]
 */
template <class Problem>
BackwardPass backward_pass(const Problem& problem, const StateGrid& grid,
                           const DiscreteNoise& noise, double v) {
    if (!(v >= 0.0) || !std::isfinite(v))
        throw std::invalid_argument("backward_pass: trial value must be finite and >= 0");
    const int k = problem.horizon_cap;
    const std::size_t n = grid.size();
    ValueTable table(n, k, v);

    for (std::size_t i = 0; i < n; ++i) table(i, k) = v + expected_reset_cost(problem, grid[i], k, noise);

    for (int t = k - 1; t >= 0; --t) {
        const auto next = std::as_const(table).stage(t + 1);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = grid[i];
            const double reset_branch = v + expected_reset_cost(problem, x, t, noise);
            const ControlChoice keep = best_continuation(problem, grid, noise, next, x, t);
            table(i, t) = std::min(reset_branch, keep.value);
        }
    }

    const ControlChoice root = best_continuation(problem, grid, noise, std::as_const(table).stage(1),
                                                 problem.reset_state, 0);
    return {std::move(table), root.value, root.index};
}

/// Minimizing arguments of the recursion at the table's reference value.
/// Ties prefer no reset, then the smallest control.
template <class Problem>
PolicyTable extract_policy(const Problem& problem, const StateGrid& grid,
                           const DiscreteNoise& noise, const ValueTable& table) {
    const int k = problem.horizon_cap;
    const std::size_t n = grid.size();
    const double v = table.reference();
    auto tie_tol = [](double value) { return 1e-9 * (1.0 + std::abs(value)); };

    // Smallest control whose continuation is within tolerance of the minimum.
    auto select = [&](double xi, int tau, std::span<const double> next) {
        std::vector<double> q(problem.controls.size());
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < q.size(); ++c) {
            q[c] = expected_continuation(problem, grid, noise, next, xi, tau, problem.controls[c]);
            best = std::min(best, q[c]);
        }
        std::size_t idx = 0;
        while (q[idx] > best + tie_tol(best)) ++idx;
        return ControlChoice{best, idx};
    };

    const ControlChoice after_reset = select(problem.reset_state, 0, table.stage(1));
    const PolicyEntry reset_entry{true, after_reset.index, problem.controls[after_reset.index]};

    PolicyTable policy(n, k);
    for (std::size_t i = 0; i < n; ++i) policy.at(i, k) = reset_entry;

    for (int t = k - 1; t >= 0; --t) {
        const auto next = table.stage(t + 1);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = grid[i];
            if (t == 0 && x == problem.reset_state) {
                policy.at(i, t) = {false, after_reset.index, problem.controls[after_reset.index]};
                continue;
            }
            const ControlChoice keep = select(x, t, next);
            const double reset_branch = v + expected_reset_cost(problem, x, t, noise);
            if (reset_branch < keep.value - tie_tol(keep.value))
                policy.at(i, t) = reset_entry;
            else
                policy.at(i, t) = {false, keep.index, problem.controls[keep.index]};
        }
    }
    return policy;
}

/**
 * Binary search for the fixed point v = Upsilon(v) on [0, upper_bound].
 *
 * Upsilon has slope at most gamma < 1, so Upsilon(v) > v places the fixed
 * point above v (raise the lower end) and Upsilon(v) < v places it below.
 * The reported table and policy are evaluated at the final midpoint.
 */
template <class Problem>
SolveReport solve(const Problem& problem, const StateGrid& grid, const DiscreteNoise& noise,
                  double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("solve: epsilon must be > 0");
    if (const auto report = validate_problem(problem, grid, noise); !report.ok())
        throw std::invalid_argument("solve: inadmissible problem: " + report.to_string());

    const auto start = std::chrono::steady_clock::now();
    SolveReport out;
    out.epsilon = epsilon;
    out.initial_upper = upper_bound(problem, grid, noise);
    if (!std::isfinite(out.initial_upper))
        throw std::domain_error("solve: non-finite initial upper bound");

    Bracket bracket{0.0, out.initial_upper};
    if (bracket.width() > epsilon) {
        const double top = backward_pass(problem, grid, noise, bracket.upper).upsilon;
        if (top > bracket.upper * (1.0 + 1e-12) + 1e-12) {
            std::ostringstream os;
            os << "solve: fixed point not bracketed: Upsilon(" << bracket.upper << ")=" << top;
            throw BracketError(os.str());
        }
        out.bracket_history.push_back({bracket.upper, top});
    }

    // Monotonicity of the recorded (v, Upsilon(v)) pairs; a violation means a
    // broken evaluator, since the recursion itself is monotone in v.
    auto check_monotone = [&](const BracketStep& step) {
        for (const auto& prev : out.bracket_history) {
            const double slack = 1e-9 * (1.0 + std::abs(prev.upsilon) + std::abs(step.upsilon));
            const bool bad = (prev.v < step.v && prev.upsilon > step.upsilon + slack) ||
                             (prev.v > step.v && prev.upsilon + slack < step.upsilon);
            if (bad) {
                std::ostringstream os;
                os << "solve: Upsilon not monotone: Upsilon(" << prev.v << ")=" << prev.upsilon
                   << " vs Upsilon(" << step.v << ")=" << step.upsilon;
                throw BracketError(os.str());
            }
        }
    };

    while (bracket.width() > epsilon) {
        const double v = bracket.midpoint();
        const double ups = backward_pass(problem, grid, noise, v).upsilon;
        ++out.iterations;
        const BracketStep step{v, ups};
        check_monotone(step);
        out.bracket_history.push_back(step);
        if (ups > v) {
            bracket.lower = v;
        } else if (ups < v) {
            bracket.upper = v;
        } else {
            bracket = {v, v};
            break;
        }
    }

    out.final_bracket = bracket;
    out.v_star = bracket.midpoint();
    BackwardPass final_pass = backward_pass(problem, grid, noise, out.v_star);
    out.upsilon_star = final_pass.upsilon;
    out.policy = extract_policy(problem, grid, noise, final_pass.table);
    out.value_table = std::move(final_pass.table);
    out.wall_time = std::chrono::steady_clock::now() - start;
    return out;
}

}  // namespace bids
