#include <gtest/gtest.h>

#include <cmath>

#include "bids/value_iteration.hpp"
#include "test_support.hpp"

namespace {

using namespace bids;

TEST(BellmanBackup, ZeroProblemStaysZero) {
    AnyResetProblem p;
    p.horizon_cap = 3;
    p.discount = 0.9;
    p.controls = {0.0, 1.0};
    p.dynamics = [](double x, int, double u, double) { return x + u; };
    p.stage_cost = [](double, int, double, double) { return 0.0; };
    p.reset_cost = [](double, int, double) { return 0.0; };
    const StateGrid grid(0.0, 2.0, 5);
    const DiscreteNoise noise({{0.0, 1.0}});
    vi::AugmentedMDP mdp(p, grid, noise);
    const auto out = vi::bellman_backup(mdp, ValueTable(5, 3));
    for (double v : out.raw()) EXPECT_EQ(v, 0.0);
}

TEST(BellmanBackup, FromZeroGivesMyopicCost) {
    const auto inst = bids::testing::random_instance(4);
    const auto& pr = inst.problem;
    vi::AugmentedMDP mdp(pr, inst.grid, inst.noise);
    const auto out = vi::bellman_backup(mdp, ValueTable(inst.grid.size(), pr.horizon_cap));

    auto myopic = [&](double x, int t) {
        double best = std::numeric_limits<double>::infinity();
        for (double u : pr.controls) best = std::min(best, expected_stage_cost(pr, x, t, u, inst.noise));
        return best;
    };
    const double after_reset = myopic(0.0, 0);
    for (int t = 0; t <= pr.horizon_cap; ++t)
        for (std::size_t i = 0; i < inst.grid.size(); ++i) {
            const double x = inst.grid[i];
            const double reset = expected_reset_cost(pr, x, t, inst.noise) + after_reset;
            const double expected = t == pr.horizon_cap ? reset : std::min(reset, myopic(x, t));
            EXPECT_NEAR(out(i, t), expected, 1e-12);
        }
}

TEST(BellmanBackup, TwoSweepsMatchHandComputedHorizonTwoCosts) {
    // grid {0, 1, 2}, k = 2, one control u = 1, one atom d = 1:
    // h = x, g = 1 + tau * x, s = 3 x, gamma = 0.5
    const auto problem = make_reset_problem(
        0.0, 2, 0.5, {1.0}, [](double x, int, double u, double d) { return std::max(x + u - d, 0.0); },
        [](double x, int tau, double u, double d) { return 1.0 + tau * std::max(x + u - d, 0.0); },
        [](double x, int, double) { return 3.0 * x; });
    const StateGrid grid(0.0, 2.0, 3);
    const DiscreteNoise noise({{1.0, 1.0}});
    vi::AugmentedMDP mdp(problem, grid, noise);
    const auto j1 = vi::bellman_backup(mdp, ValueTable(3, 2));
    const auto j2 = vi::bellman_backup(mdp, j1);

    // sweep 1: reset = 3x + 1; keep = 1 + t x
    const double J1[3][3] = {{1, 1, 1}, {1, 2, 4}, {1, 3, 7}};  // [i][t]
    for (int i = 0; i < 3; ++i)
        for (int t = 0; t < 3; ++t) EXPECT_DOUBLE_EQ(j1(i, t), J1[i][t]) << i << "," << t;

    // sweep 2: after-reset value R = g(0,0) + 0.5 J1(0,1) = 1.5
    //   t=2: 3x + 1.5
    //   t<2: min(3x + 1.5, 1 + t x + 0.5 J1(x, t+1))
    const double R = 1.5;
    for (int i = 0; i < 3; ++i) {
        const double x = i;
        EXPECT_DOUBLE_EQ(j2(i, 2), 3 * x + R);
        for (int t = 0; t < 2; ++t)
            EXPECT_DOUBLE_EQ(j2(i, t), std::min(3 * x + R, 1 + t * x + 0.5 * J1[i][t + 1]));
    }
}

TEST(SolveVI, ZeroDiscountConvergesInTwoSweeps) {
    auto inst = bids::testing::random_instance(13);
    inst.problem.discount = 0.0;
    vi::AugmentedMDP mdp(inst.problem, inst.grid, inst.noise);
    const auto r = vi::solve_vi(mdp, 1e-6, 100);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.iterations, 2);
}

TEST(SolveVI, ContractionOfSuccessiveDifferences) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto inst = bids::testing::random_instance(seed);
        vi::AugmentedMDP mdp(inst.problem, inst.grid, inst.noise);
        const auto r = vi::solve_vi(mdp, 1e-8, 100000);
        ASSERT_TRUE(r.converged);
        for (std::size_t n = 1; n < r.sup_differences.size(); ++n)
            EXPECT_LE(r.sup_differences[n], inst.problem.discount * r.sup_differences[n - 1] + 1e-12);
    }
}

TEST(SolveVI, FixedPointStructure) {
    const double tol = 1e-7;
    for (std::uint64_t seed = 30; seed < 36; ++seed) {
        const auto inst = bids::testing::random_instance(seed);
        const auto& pr = inst.problem;
        vi::AugmentedMDP mdp(pr, inst.grid, inst.noise);
        const auto r = vi::solve_vi(mdp, tol, 100000);
        ASSERT_TRUE(r.converged);
        const int k = pr.horizon_cap;
        for (std::size_t i = 0; i < inst.grid.size(); ++i) {
            const double es_k = expected_reset_cost(pr, inst.grid[i], k, inst.noise);
            EXPECT_NEAR(r.values(i, k) - r.values(0, 0), es_k, 2 * tol);
            for (int t = 0; t < k; ++t)
                EXPECT_LE(r.values(i, t),
                          r.values(0, 0) + expected_reset_cost(pr, inst.grid[i], t, inst.noise) + 2 * tol);
        }
    }
}

TEST(SolveVI, ReportsNonConvergence) {
    auto inst = bids::testing::random_instance(2);
    inst.problem.discount = 0.99;
    vi::AugmentedMDP mdp(inst.problem, inst.grid, inst.noise);
    const auto r = vi::solve_vi(mdp, 1e-9, 5);
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.iterations, 5);
}

TEST(SolveVI, IterationsGrowWithDiscount) {
    auto inst = bids::testing::random_instance(17);
    int previous = 0;
    for (double gamma : {0.8, 0.95, 0.99}) {
        inst.problem.discount = gamma;
        vi::AugmentedMDP mdp(inst.problem, inst.grid, inst.noise);
        const auto r = vi::solve_vi(mdp, 1e-6, 1000000);
        ASSERT_TRUE(r.converged);
        EXPECT_GT(r.iterations, previous);
        previous = r.iterations;
    }
}

TEST(SolveVI, RejectsBadArguments) {
    const auto inst = bids::testing::random_instance(1);
    vi::AugmentedMDP mdp(inst.problem, inst.grid, inst.noise);
    EXPECT_THROW(vi::solve_vi(mdp, 0.0, 10), std::invalid_argument);
    EXPECT_THROW(vi::solve_vi(mdp, 1e-6, 0), std::invalid_argument);
}

}  // namespace
