#include <gtest/gtest.h>

#include <random>

#include "bids/reset_problem.hpp"
#include "bids/water_model.hpp"
#include "test_support.hpp"

namespace {

using namespace bids;

water::Instance small_water() {
    water::WaterParams p;
    p.grid = {0.0, 60.0, 31};
    p.controls = {0.0, 60.0, 31};
    p.noise.atoms = 20;
    return water::build_problem(p);
}

bool mentions(const ValidationReport& r, const std::string& needle) {
    for (const auto& s : r.issues)
        if (s.find(needle) != std::string::npos) return true;
    return false;
}

TEST(ValidateProblem, WaterInstanceIsAdmissible) {
    const auto inst = small_water();
    EXPECT_TRUE(validate_problem(inst.problem, inst.grid, inst.noise).ok());
}

TEST(ValidateProblem, NonzeroResetCostAtResetState) {
    const auto inst = small_water();
    auto broken = make_reset_problem(inst.problem.reset_state, inst.problem.horizon_cap,
                                     inst.problem.discount, inst.problem.controls,
                                     inst.problem.dynamics, inst.problem.stage_cost,
                                     [](double x, int, double) { return 0.5 * x + 1.0; });
    const auto report = validate_problem(broken, inst.grid, inst.noise);
    EXPECT_FALSE(report.ok());
    EXPECT_TRUE(mentions(report, "s(zeta)!=0"));
}

TEST(ValidateProblem, DiscountOutOfRange) {
    auto inst = small_water();
    inst.problem.discount = 1.0;
    const auto report = validate_problem(inst.problem, inst.grid, inst.noise);
    EXPECT_TRUE(mentions(report, "discount out of range"));
}

TEST(ValidateProblem, NegativeStageCostAndUnsortedControls) {
    auto inst = bids::testing::random_instance(3);
    inst.problem.stage_cost = [](double, int, double u, double) { return u - 0.25; };
    inst.problem.controls = {0.5, 0.0};
    const auto report = validate_problem(inst.problem, inst.grid, inst.noise);
    EXPECT_TRUE(mentions(report, "stage cost negative"));
    EXPECT_TRUE(mentions(report, "not sorted"));
}

TEST(ExpectedStageCost, ConstantCost) {
    auto inst = bids::testing::random_instance(5);
    inst.problem.stage_cost = [](double, int, double, double) { return 1.0; };
    EXPECT_DOUBLE_EQ(expected_stage_cost(inst.problem, 0.3, 1, 0.0, inst.noise), 1.0);
}

TEST(ExpectedStageCost, WaterSingleAtom) {
    // 0.25*0 - 0.5*min(0-1, 0) + 0*max(-1, 0)
    const auto inst = small_water();
    const DiscreteNoise one({{1.0, 1.0}});
    EXPECT_DOUBLE_EQ(expected_stage_cost(inst.problem, 0.0, 0, 0.0, one), 0.5);
}

TEST(ExpectedStageCost, MeanOfAtoms) {
    auto inst = bids::testing::random_instance(5);
    inst.problem.stage_cost = [](double, int, double, double w) { return w; };
    const DiscreteNoise two({{0.0, 0.5}, {2.0, 0.5}});
    EXPECT_DOUBLE_EQ(expected_stage_cost(inst.problem, 0.0, 0, 0.0, two), 1.0);
}

TEST(InterpolateValue, NodesMidpointsAndClamping) {
    const StateGrid grid(0.0, 3.0, 4);
    ValueTable table(4, 2, 0.0);
    for (std::size_t i = 0; i < 4; ++i) table(i, 1) = 10.0 * static_cast<double>(i * i);
    EXPECT_DOUBLE_EQ(interpolate_value(table, grid, 2.0, 1), 40.0);
    EXPECT_DOUBLE_EQ(interpolate_value(table, grid, 1.5, 1), 25.0);
    EXPECT_DOUBLE_EQ(interpolate_value(table, grid, 3.0 + 10.0, 1), 90.0);
    EXPECT_DOUBLE_EQ(interpolate_value(table, grid, -1.0, 1), 0.0);
    EXPECT_THROW(interpolate_value(table, grid, 1.0, 3), std::out_of_range);
}

TEST(InterpolateValue, MonotoneInTableEntries) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uni(0.0, 5.0);
    const StateGrid grid(0.0, 1.0, 9);
    for (int trial = 0; trial < 200; ++trial) {
        ValueTable base(9, 1);
        for (std::size_t i = 0; i < 9; ++i) base(i, 0) = uni(rng);
        ValueTable raised = base;
        raised(static_cast<std::size_t>(trial % 9), 0) += uni(rng);
        for (int s = 0; s < 20; ++s) {
            const double x = uni(rng) / 4.0 - 0.1;
            EXPECT_LE(interpolate_value(base, grid, x, 0), interpolate_value(raised, grid, x, 0));
        }
    }
}

TEST(ExpectedStageCost, NonnegativeOnRandomInstances) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto inst = bids::testing::random_instance(seed);
        for (std::size_t i = 0; i < inst.grid.size(); ++i)
            for (double u : inst.problem.controls)
                EXPECT_GE(expected_stage_cost(inst.problem, inst.grid[i], 0, u, inst.noise), 0.0);
    }
}

TEST(ResetTransition, ResetJumpsToResetState) {
    for (double x : {0.0, 3.5, 100.0})
        for (int t : {0, 2, 6}) {
            const auto r = ResetTransition::apply(x, t, true, 0.25);
            EXPECT_EQ(r.state, 0.25);
            EXPECT_EQ(r.age, 0);
            const auto keep = ResetTransition::apply(x, t, false, 0.25);
            EXPECT_EQ(keep.state, x);
            EXPECT_EQ(keep.age, t);
        }
}

TEST(DiscreteNoise, RejectsBadMass) {
    EXPECT_THROW(DiscreteNoise({{0.0, 0.5}, {1.0, 0.4}}), std::invalid_argument);
    EXPECT_THROW(DiscreteNoise({{0.0, 1.2}, {1.0, -0.2}}), std::invalid_argument);
    EXPECT_NO_THROW(DiscreteNoise({{0.0, 0.25}, {1.0, 0.75}}));
}

TEST(DiscreteNoise, EqualWeightSumsToOne) {
    std::vector<double> v(777, 1.0);
    const auto noise = DiscreteNoise::equal_weight(v);
    double total = 0.0;
    for (const auto& a : noise.atoms()) total += a.probability;
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_EQ(noise.support().size(), 1u);
}

TEST(StateGrid, UniformAndPinnedEnds) {
    const StateGrid grid(0.0, 120.0, 241);
    EXPECT_EQ(grid[0], 0.0);
    EXPECT_EQ(grid[240], 120.0);
    EXPECT_DOUBLE_EQ(grid[1] - grid[0], 0.5);
    for (std::size_t i = 1; i < grid.size(); ++i) EXPECT_GT(grid[i], grid[i - 1]);
    EXPECT_EQ(grid.nearest_index(10.2), 20u);
    EXPECT_EQ(grid.nearest_index(500.0), 240u);
    EXPECT_THROW(StateGrid(1.0, 1.0, 3), std::invalid_argument);
}

}  // namespace
