#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bids {

/**
 * Uniform one-dimensional state grid x_0 < ... < x_{n-1}.
 *
 * The last point is pinned to `upper` exactly so that clamping and node
 * lookups agree at the boundary.
 */
class StateGrid {
public:
    StateGrid(double lower, double upper, std::size_t points)
        : lower_(lower), upper_(upper), points_(points) {
        if (!(std::isfinite(lower) && std::isfinite(upper)) || !(upper > lower))
            throw std::invalid_argument("StateGrid: need finite bounds with upper > lower");
        if (points < 2)
            throw std::invalid_argument("StateGrid: need at least 2 points");
        step_ = (upper - lower) / static_cast<double>(points - 1);
    }

    double lower() const { return lower_; }
    double upper() const { return upper_; }
    double step() const { return step_; }
    std::size_t size() const { return points_; }

    double operator[](std::size_t i) const {
        return i + 1 == points_ ? upper_ : lower_ + static_cast<double>(i) * step_;
    }

    std::vector<double> points() const {
        std::vector<double> out(points_);
        for (std::size_t i = 0; i < points_; ++i) out[i] = (*this)[i];
        return out;
    }

    double clamp(double x) const { return std::clamp(x, lower_, upper_); }

    /// Cell containing x after clamping: left node index and weight on the right node.
    std::pair<std::size_t, double> locate(double x) const {
        const double pos = (clamp(x) - lower_) / step_;
        auto left = static_cast<std::size_t>(pos);
        if (left + 1 >= points_) return {points_ - 2, 1.0};
        return {left, pos - static_cast<double>(left)};
    }

    std::size_t nearest_index(double x) const {
        const double pos = (clamp(x) - lower_) / step_;
        auto idx = static_cast<std::size_t>(std::lround(pos));
        return std::min(idx, points_ - 1);
    }

private:
    double lower_;
    double upper_;
    std::size_t points_;
    double step_;
};

struct NoiseAtom {
    double value;
    double probability;
};

/// Finite-support disturbance shared by every expectation in a solve.
class DiscreteNoise {
public:
    static constexpr double kMassTolerance = 1e-12;

    explicit DiscreteNoise(std::vector<NoiseAtom> atoms) : atoms_(std::move(atoms)) {
        if (atoms_.empty()) throw std::invalid_argument("DiscreteNoise: no atoms");
        double total = 0.0;
        for (const auto& a : atoms_) {
            if (!std::isfinite(a.value))
                throw std::invalid_argument("DiscreteNoise: non-finite atom value");
            if (!(a.probability >= 0.0))
                throw std::invalid_argument("DiscreteNoise: negative probability");
            total += a.probability;
        }
        if (std::abs(total - 1.0) > kMassTolerance)
            throw std::invalid_argument("DiscreteNoise: probabilities sum to " +
                                        std::to_string(total));
    }

    /// Equal weight 1/n on every value (duplicates are kept as separate atoms).
    static DiscreteNoise equal_weight(std::span<const double> values) {
        if (values.empty()) throw std::invalid_argument("DiscreteNoise: no atoms");
        const double p = 1.0 / static_cast<double>(values.size());
        std::vector<NoiseAtom> atoms;
        atoms.reserve(values.size());
        for (double v : values) atoms.push_back({v, p});
        // Renormalize the rounding residue onto the last atom.
        double head = 0.0;
        for (std::size_t i = 0; i + 1 < atoms.size(); ++i) head += atoms[i].probability;
        atoms.back().probability = 1.0 - head;
        return DiscreteNoise(std::move(atoms));
    }

    std::span<const NoiseAtom> atoms() const { return atoms_; }
    std::size_t size() const { return atoms_.size(); }

    double mean() const {
        double m = 0.0;
        for (const auto& a : atoms_) m += a.probability * a.value;
        return m;
    }

    /// Distinct support values in ascending order.
    std::vector<double> support() const {
        std::vector<double> s;
        s.reserve(atoms_.size());
        for (const auto& a : atoms_) s.push_back(a.value);
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
        return s;
    }

private:
    std::vector<NoiseAtom> atoms_;
};

/**
 * One instance of the discounted reset-control problem.
 *
 * Evaluators are plain callables so that solver loops inline them:
 *   dynamics(xi, tau, u, w)   -> next state
 *   stage_cost(xi, tau, u, w) -> cost >= 0
 *   reset_cost(x, t, w)       -> cost >= 0, zero at reset_state
 * They must be pure; solvers call them in arbitrary order.
 */
template <class Dynamics, class StageCost, class ResetCost>
struct ResetProblem {
    double reset_state = 0.0;
    int horizon_cap = 1;
    double discount = 0.0;
    std::vector<double> controls;
    Dynamics dynamics;
    StageCost stage_cost;
    ResetCost reset_cost;
};

using DynamicsFn = std::function<double(double, int, double, double)>;
using StageCostFn = std::function<double(double, int, double, double)>;
using ResetCostFn = std::function<double(double, int, double)>;

/// Type-erased problem, for instances assembled at run time.
using AnyResetProblem = ResetProblem<DynamicsFn, StageCostFn, ResetCostFn>;

template <class Dynamics, class StageCost, class ResetCost>
ResetProblem<Dynamics, StageCost, ResetCost>
make_reset_problem(double reset_state, int horizon_cap, double discount,
                   std::vector<double> controls, Dynamics dynamics, StageCost stage_cost,
                   ResetCost reset_cost) {
    return {reset_state, horizon_cap, discount, std::move(controls),
            std::move(dynamics), std::move(stage_cost), std::move(reset_cost)};
}

/// Post-decision pseudo-state: (x, t) when kept, (zeta, 0) after a reset.
struct ResetTransition {
    double state;
    int age;

    static ResetTransition apply(double x, int t, bool reset, double reset_state) {
        return reset ? ResetTransition{reset_state, 0} : ResetTransition{x, t};
    }
};

/// V(x_i, t) for t = 0..k, tagged with the reference value v it was built from.
class ValueTable {
public:
    ValueTable(std::size_t grid_points, int horizon_cap, double reference = 0.0)
        : n_(grid_points), k_(horizon_cap), reference_(reference),
          values_(grid_points * static_cast<std::size_t>(horizon_cap + 1), 0.0) {}

    std::size_t grid_points() const { return n_; }
    int horizon_cap() const { return k_; }
    double reference() const { return reference_; }
    void set_reference(double v) { reference_ = v; }

    double& operator()(std::size_t i, int t) { return values_[index(i, t)]; }
    double operator()(std::size_t i, int t) const { return values_[index(i, t)]; }

    /// Stage-t slice across the grid (stage-major layout keeps it contiguous).
    std::span<const double> stage(int t) const {
        return {values_.data() + static_cast<std::size_t>(t) * n_, n_};
    }
    std::span<double> stage(int t) {
        return {values_.data() + static_cast<std::size_t>(t) * n_, n_};
    }

    std::span<const double> raw() const { return values_; }

    double max_abs_difference(const ValueTable& other) const {
        if (other.n_ != n_ || other.k_ != k_)
            throw std::invalid_argument("ValueTable: shape mismatch");
        double d = 0.0;
        for (std::size_t j = 0; j < values_.size(); ++j)
            d = std::max(d, std::abs(values_[j] - other.values_[j]));
        return d;
    }

private:
    std::size_t index(std::size_t i, int t) const {
        return static_cast<std::size_t>(t) * n_ + i;
    }

    std::size_t n_;
    int k_;
    double reference_;
    std::vector<double> values_;
};

struct PolicyEntry {
    bool reset = false;
    std::size_t control_index = 0;
    double control = 0.0;

    friend bool operator==(const PolicyEntry&, const PolicyEntry&) = default;
};

class PolicyTable {
public:
    PolicyTable(std::size_t grid_points, int horizon_cap)
        : n_(grid_points), k_(horizon_cap),
          entries_(grid_points * static_cast<std::size_t>(horizon_cap + 1)) {}

    std::size_t grid_points() const { return n_; }
    int horizon_cap() const { return k_; }

    PolicyEntry& at(std::size_t i, int t) { return entries_[index(i, t)]; }
    const PolicyEntry& at(std::size_t i, int t) const { return entries_[index(i, t)]; }

    friend bool operator==(const PolicyTable&, const PolicyTable&) = default;

private:
    std::size_t index(std::size_t i, int t) const {
        if (i >= n_ || t < 0 || t > k_) throw std::out_of_range("PolicyTable: index out of range");
        return static_cast<std::size_t>(t) * n_ + i;
    }

    std::size_t n_;
    int k_;
    std::vector<PolicyEntry> entries_;
};

struct ValidationReport {
    std::vector<std::string> issues;

    bool ok() const { return issues.empty(); }

    std::string to_string() const {
        std::string out;
        for (const auto& s : issues) {
            if (!out.empty()) out += "; ";
            out += s;
        }
        return out;
    }
};

/**
 * Structural admissibility check. Evaluates g and s on every grid point,
 * age, control and atom; an empty report means the instance is admissible.
 * Only the first offending evaluation of each kind is reported.
 */
template <class Problem>
ValidationReport validate_problem(const Problem& problem, const StateGrid& grid,
                                  const DiscreteNoise& noise) {
    ValidationReport report;
    auto issue = [&](auto&&... parts) {
        std::ostringstream os;
        (os << ... << parts);
        report.issues.push_back(os.str());
    };

    if (!(problem.discount >= 0.0 && problem.discount < 1.0))
        issue("discount out of range: gamma=", problem.discount, " not in [0,1)");
    if (problem.horizon_cap < 1)
        issue("horizon cap out of range: k=", problem.horizon_cap, " < 1");
    if (problem.controls.empty())
        issue("control grid empty");
    else if (!std::is_sorted(problem.controls.begin(), problem.controls.end()))
        issue("control grid not sorted ascending");
    if (problem.reset_state < grid.lower() || problem.reset_state > grid.upper())
        issue("reset state ", problem.reset_state, " outside grid [", grid.lower(), ", ",
              grid.upper(), "]");
    if (!report.ok() && (problem.horizon_cap < 1 || problem.controls.empty())) return report;

    const int k = problem.horizon_cap;
    bool zeta_reported = false;
    bool s_reported = false;
    bool g_reported = false;
    for (int t = 0; t <= k; ++t) {
        for (const auto& a : noise.atoms()) {
            const double sz = problem.reset_cost(problem.reset_state, t, a.value);
            if (sz != 0.0 && !zeta_reported) {
                issue("s(zeta)!=0: s(", problem.reset_state, ", ", t, ", ", a.value, ")=", sz);
                zeta_reported = true;
            }
        }
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double x = grid[i];
            for (const auto& a : noise.atoms()) {
                const double s = problem.reset_cost(x, t, a.value);
                if (!(s >= 0.0) && !s_reported) {
                    issue("reset cost negative or non-finite: s(", x, ", ", t, ", ", a.value,
                          ")=", s);
                    s_reported = true;
                }
                for (double u : problem.controls) {
                    const double g = problem.stage_cost(x, t, u, a.value);
                    if (!(g >= 0.0) && !g_reported) {
                        issue("stage cost negative or non-finite: g(", x, ", ", t, ", ", u,
                              ", ", a.value, ")=", g);
                        g_reported = true;
                    }
                }
            }
        }
    }
    return report;
}

template <class Problem>
double expected_stage_cost(const Problem& problem, double xi, int tau, double u,
                           const DiscreteNoise& noise) {
    double acc = 0.0;
    for (const auto& a : noise.atoms()) acc += a.probability * problem.stage_cost(xi, tau, u, a.value);
    return acc;
}

template <class Problem>
double expected_reset_cost(const Problem& problem, double x, int t, const DiscreteNoise& noise) {
    double acc = 0.0;
    for (const auto& a : noise.atoms()) acc += a.probability * problem.reset_cost(x, t, a.value);
    return acc;
}

/// Piecewise-linear interpolation of one stage slice, clamping x to the grid.
inline double interpolate(std::span<const double> stage_values, const StateGrid& grid, double x) {
    const auto [left, w] = grid.locate(x);
    return (1.0 - w) * stage_values[left] + w * stage_values[left + 1];
}

inline double interpolate_value(const ValueTable& table, const StateGrid& grid, double x, int t) {
    if (t < 0 || t > table.horizon_cap())
        throw std::out_of_range("interpolate_value: stage " + std::to_string(t) +
                                " outside 0.." + std::to_string(table.horizon_cap()));
    return interpolate(table.stage(t), grid, x);
}

/**
 * Q(xi, tau, u) = E[g(xi,tau,u,w) + gamma * V(h(xi,tau,u,w), tau+1)] with V
 * given as the next-stage slice. Shared by both solvers and by policy
 * extraction so every minimization sees identical numbers.
 */
template <class Problem>
double expected_continuation(const Problem& problem, const StateGrid& grid,
                             const DiscreteNoise& noise, std::span<const double> next_stage,
                             double xi, int tau, double u) {
    double acc = 0.0;
    const double gamma = problem.discount;
    std::size_t j = 0;
    for (const auto& a : noise.atoms()) {
        const double g = problem.stage_cost(xi, tau, u, a.value);
        const double next = problem.dynamics(xi, tau, u, a.value);
        const double term = g + gamma * interpolate(next_stage, grid, next);
        if (!std::isfinite(term)) {
            std::ostringstream os;
            os << "non-finite cost at x=" << xi << " t=" << tau << " u=" << u << " atom #" << j
               << " (w=" << a.value << "): g=" << g << " h=" << next;
            throw std::domain_error(os.str());
        }
        acc += a.probability * term;
        ++j;
    }
    return acc;
}

/// Minimum over the control grid; ties resolve to the smallest control.
struct ControlChoice {
    double value = std::numeric_limits<double>::infinity();
    std::size_t index = 0;
};

template <class Problem>
ControlChoice best_continuation(const Problem& problem, const StateGrid& grid,
                                const DiscreteNoise& noise, std::span<const double> next_stage,
                                double xi, int tau) {
    ControlChoice best;
    for (std::size_t c = 0; c < problem.controls.size(); ++c) {
        const double q =
            expected_continuation(problem, grid, noise, next_stage, xi, tau, problem.controls[c]);
        if (q < best.value) best = {q, c};
    }
    return best;
}

}  // namespace bids
