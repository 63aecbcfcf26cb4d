#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bids/prp_demand.hpp"
#include "bids/reset_problem.hpp"

namespace bids::water {

struct GridSpec {
    double lower = 0.0;
    double upper = 120.0;
    std::size_t points = 241;
};

struct NoiseSpec {
    std::size_t atoms = 500;
    std::uint64_t seed = 20180101;
};

/// Cost and demand parameters of the storage problem, in liters and rupees.
/// Defaults reproduce the reference experiment.
struct WaterParams {
    double purchase_cost = 0.25;    // c, per L bought
    double shortage_penalty = 0.5;  // p, per L short
    double flush_penalty = 0.5;     // c_f, per L flushed
    double holding_slope = 15.0;    // q(t) = slope * t, per L held
    prp::PRPParams demand{40.0, 2.0};
    int horizon_cap = 6;            // k, max days between flushes
    double discount = 0.8;
    GridSpec grid{};
    GridSpec controls{};
    NoiseSpec noise{};

    std::vector<std::string> validate() const {
        std::vector<std::string> errors;
        auto nonneg = [&](double v, const char* name) {
            if (!(v >= 0.0) || !std::isfinite(v))
                errors.push_back(std::string(name) + ": must be a finite number >= 0");
        };
        nonneg(purchase_cost, "purchase_cost");
        nonneg(shortage_penalty, "shortage_penalty");
        nonneg(flush_penalty, "flush_penalty");
        if (!(holding_slope > 0.0) || !std::isfinite(holding_slope))
            errors.push_back("holding_slope: must be > 0 (holding cost strictly increasing in age)");
        for (const auto& e : demand.validate()) errors.push_back("demand." + e);
        if (horizon_cap < 1) errors.push_back("horizon_cap: must be >= 1");
        if (!(discount >= 0.0 && discount < 1.0)) errors.push_back("discount: must lie in [0, 1)");
        if (!(grid.lower == 0.0)) errors.push_back("grid.lower: must be 0 (the empty tank is the reset state)");
        if (!(grid.upper > grid.lower)) errors.push_back("grid.upper: must exceed grid.lower");
        if (grid.points < 2) errors.push_back("grid.points: must be >= 2");
        if (!(controls.lower >= 0.0)) errors.push_back("controls.lower: must be >= 0");
        if (!(controls.upper > controls.lower)) errors.push_back("controls.upper: must exceed controls.lower");
        if (controls.points < 2) errors.push_back("controls.points: must be >= 2");
        if (noise.atoms < 2) errors.push_back("noise.atoms: must be >= 2");
        return errors;
    }

    double holding_cost(int age) const { return holding_slope * static_cast<double>(age); }
};

/// x_{n+1} = (xi + u - d)^+
struct Dynamics {
    double operator()(double xi, int /*tau*/, double u, double d) const {
        const double level = xi + u - d;
        return level > 0.0 ? level : 0.0;
    }
};

/// c u + p (shortfall) + q(tau) (surplus), with q evaluated at the pseudo-age.
struct StageCost {
    double purchase;
    double shortage;
    double holding_slope;

    double operator()(double xi, int tau, double u, double d) const {
        const double surplus = xi + u - d;
        const double shortfall_part = surplus < 0.0 ? -surplus : 0.0;
        const double holding_part = surplus > 0.0 ? surplus : 0.0;
        return purchase * u + shortage * shortfall_part +
               holding_slope * static_cast<double>(tau) * holding_part;
    }
};

/// c_f x: water discarded on a flush.
struct ResetCost {
    double flush;

    double operator()(double x, int /*t*/, double /*d*/) const { return flush * x; }
};

using Problem = ResetProblem<Dynamics, StageCost, ResetCost>;

struct Instance {
    WaterParams params;
    Problem problem;
    StateGrid grid;
    DiscreteNoise noise;
};

inline std::vector<double> control_grid(const GridSpec& spec) {
    return StateGrid(spec.lower, spec.upper, spec.points).points();
}

inline Instance build_problem(const WaterParams& params) {
    if (auto errors = params.validate(); !errors.empty()) {
        std::string msg = "invalid water parameters:";
        for (const auto& e : errors) msg += "\n  " + e;
        throw std::invalid_argument(msg);
    }
    Problem problem{
        0.0,
        params.horizon_cap,
        params.discount,
        control_grid(params.controls),
        Dynamics{},
        StageCost{params.purchase_cost, params.shortage_penalty, params.holding_slope},
        ResetCost{params.flush_penalty},
    };
    return {params, std::move(problem),
            StateGrid(params.grid.lower, params.grid.upper, params.grid.points),
            prp::discretize(params.demand, params.noise.atoms, params.noise.seed)};
}

enum class Zone {
    FlushReorderSmall,
    OrderUpTo,
    DoNothing,
    FlushReorderLarge,
};

inline std::string_view zone_name(Zone z) {
    switch (z) {
        case Zone::FlushReorderSmall: return "flush-and-reorder-small";
        case Zone::OrderUpTo: return "order-up-to";
        case Zone::DoNothing: return "do-nothing";
        case Zone::FlushReorderLarge: return "flush-and-reorder-large";
    }
    return "unknown";
}

struct ZoneInterval {
    Zone zone;
    std::size_t first;  // grid indices, inclusive
    std::size_t last;
    double x_low;
    double x_high;
};

struct AgeZones {
    int age = 0;
    std::vector<ZoneInterval> zones;

    /// Tank levels where a new zone starts.
    std::vector<double> thresholds() const {
        std::vector<double> out;
        for (std::size_t z = 1; z < zones.size(); ++z) out.push_back(zones[z].x_low);
        return out;
    }
};

struct ZoneClassification {
    std::vector<AgeZones> ages;  // index = age 0..k
    std::vector<std::string> warnings;
};

/**
 * Splits each age's policy into contiguous zones. Flush points before the
 * first non-flush point are "small", the rest "large"; non-flush points
 * order up to a level or do nothing. Warns when an age has more than four
 * zones or the zones do not follow that order.
 */
inline ZoneClassification classify_zones(const PolicyTable& policy, const StateGrid& grid) {
    if (policy.grid_points() != grid.size())
        throw std::invalid_argument("classify_zones: policy and grid sizes differ");
    ZoneClassification out;
    for (int t = 0; t <= policy.horizon_cap(); ++t) {
        AgeZones age{t, {}};
        bool seen_keep = false;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const auto& e = policy.at(i, t);
            Zone z;
            if (e.reset) {
                z = seen_keep ? Zone::FlushReorderLarge : Zone::FlushReorderSmall;
            } else {
                seen_keep = true;
                z = e.control > 0.0 ? Zone::OrderUpTo : Zone::DoNothing;
            }
            if (!age.zones.empty() && age.zones.back().zone == z) {
                age.zones.back().last = i;
                age.zones.back().x_high = grid[i];
            } else {
                age.zones.push_back({z, i, i, grid[i], grid[i]});
            }
        }
        bool ordered = true;
        for (std::size_t z = 1; z < age.zones.size(); ++z)
            ordered = ordered && static_cast<int>(age.zones[z - 1].zone) < static_cast<int>(age.zones[z].zone);
        if (age.zones.size() > 4 || !ordered) {
            std::ostringstream os;
            os << "age " << t << ": " << age.zones.size() << " zones";
            if (!ordered) os << " out of the expected order";
            out.warnings.push_back(os.str());
        }
        out.ages.push_back(std::move(age));
    }
    return out;
}

}  // namespace bids::water
