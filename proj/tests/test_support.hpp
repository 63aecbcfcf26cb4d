#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "bids/reset_problem.hpp"

namespace bids::testing {

/// Randomized small reset problem on [0, 1] with reset state 0.
///
/// The reset cost is piecewise linear on the grid (zero at 0), so linear
/// interpolation reproduces it exactly at off-grid next states.
struct RandomInstance {
    AnyResetProblem problem;
    StateGrid grid;
    DiscreteNoise noise;
};

struct RandomSpec {
    std::size_t max_points = 16;
    int max_cap = 4;
    std::size_t max_controls = 5;
    std::size_t max_atoms = 6;
    double min_discount = 0.5;
    double max_discount = 0.95;
};

inline RandomInstance random_instance(std::uint64_t seed, const RandomSpec& spec = {}) {
    std::mt19937_64 rng(seed);
    auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    auto pick = [&](std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    };

    const std::size_t n = pick(4, spec.max_points);
    const int k = static_cast<int>(pick(1, static_cast<std::size_t>(spec.max_cap)));
    const std::size_t nc = pick(1, spec.max_controls);
    const std::size_t na = pick(1, spec.max_atoms);
    const double gamma = uni(spec.min_discount, spec.max_discount);
    StateGrid grid(0.0, 1.0, n);

    std::vector<double> controls(nc);
    for (auto& u : controls) u = uni(0.0, 0.6);
    std::sort(controls.begin(), controls.end());

    std::vector<double> weights(na);
    double total = 0.0;
    for (auto& p : weights) total += (p = uni(0.1, 1.0));
    std::vector<NoiseAtom> atoms;
    double head = 0.0;
    for (std::size_t a = 0; a < na; ++a) {
        double p = weights[a] / total;
        if (a + 1 == na) p = 1.0 - head;
        head += p;
        atoms.push_back({uni(0.0, 0.5), p});
    }

    // Reset-cost node values per age, zero at the reset state.
    auto nodes = std::make_shared<std::vector<double>>(n * static_cast<std::size_t>(k + 1));
    for (int t = 0; t <= k; ++t)
        for (std::size_t i = 1; i < n; ++i)
            (*nodes)[static_cast<std::size_t>(t) * n + i] = uni(0.0, 2.0);

    const double c_buy = uni(0.1, 1.0);
    const double c_hold = uni(0.1, 1.0);
    const double c_short = uni(0.5, 3.0);
    const double c_base = uni(0.0, 0.3);
    const double drift = uni(0.7, 1.0);

    AnyResetProblem problem;
    problem.reset_state = 0.0;
    problem.horizon_cap = k;
    problem.discount = gamma;
    problem.controls = controls;
    problem.dynamics = [drift](double x, int, double u, double w) {
        return std::clamp(drift * x + u - w, 0.0, 1.0);
    };
    problem.stage_cost = [=](double x, int t, double u, double w) {
        const double level = x + u - w;
        return c_base + c_buy * u + c_hold * (1.0 + t) * std::max(level, 0.0) +
               c_short * std::max(-level, 0.0);
    };
    problem.reset_cost = [nodes, grid, n](double x, int t, double w) {
        const auto [left, frac] = grid.locate(x);
        const double* row = nodes->data() + static_cast<std::size_t>(t) * n;
        return (1.0 + w) * ((1.0 - frac) * row[left] + frac * row[left + 1]);
    };
    return {std::move(problem), grid, DiscreteNoise(std::move(atoms))};
}

}  // namespace bids::testing
