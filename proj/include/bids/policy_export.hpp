#pragma once

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bids/format.hpp"
#include "bids/reset_problem.hpp"

namespace bids::water {

/// One line of the lookup table: at age t with tank level in [x_low, x_high].
struct PolicyRow {
    int t;
    double x_low;
    double x_high;
    bool flush;
    double order;

    friend bool operator==(const PolicyRow&, const PolicyRow&) = default;
};

class PolicyFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kPolicyCsvHeader = "t,x_low_L,x_high_L,flush,order_L";

inline std::string action_text(const PolicyRow& row) {
    if (row.flush) return "empty tank, then order " + fmt::number(row.order) + " L";
    if (row.order > 0.0) return "order " + fmt::number(row.order) + " L";
    return "do nothing";
}

/// Merges runs of grid points with identical actions, per age.
inline std::vector<PolicyRow> policy_rows(const PolicyTable& policy, const StateGrid& grid) {
    std::vector<PolicyRow> rows;
    for (int t = 0; t <= policy.horizon_cap(); ++t) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const auto& e = policy.at(i, t);
            if (!rows.empty() && rows.back().t == t && rows.back().flush == e.reset &&
                rows.back().order == e.control) {
                rows.back().x_high = grid[i];
            } else {
                rows.push_back({t, grid[i], grid[i], e.reset, e.control});
            }
        }
    }
    return rows;
}

inline void write_policy_csv(std::ostream& os, const std::vector<PolicyRow>& rows) {
    os << kPolicyCsvHeader << '\n';
    for (const auto& r : rows)
        os << r.t << ',' << fmt::number(r.x_low) << ',' << fmt::number(r.x_high) << ','
           << (r.flush ? 1 : 0) << ',' << fmt::number(r.order) << '\n';
}

inline nlohmann::ordered_json policy_json(const std::vector<PolicyRow>& rows, const StateGrid& grid,
                                          int horizon_cap, const nlohmann::ordered_json& params) {
    nlohmann::ordered_json j;
    j["params"] = params;
    j["grid"] = {{"lower", grid.lower()}, {"upper", grid.upper()}, {"points", grid.size()}};
    j["horizon_cap"] = horizon_cap;
    auto& arr = j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : rows)
        arr.push_back({{"t", r.t},
                       {"x_low_L", r.x_low},
                       {"x_high_L", r.x_high},
                       {"flush", r.flush ? 1 : 0},
                       {"order_L", r.order},
                       {"action", action_text(r)}});
    return j;
}

inline std::vector<PolicyRow> parse_policy_csv_rows(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw PolicyFormatError("policy csv: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kPolicyCsvHeader)
        throw PolicyFormatError("policy csv: header must be '" + std::string(kPolicyCsvHeader) +
                                "', got '" + line + "'");
    std::vector<PolicyRow> rows;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fail = [&](const std::string& what) {
            throw PolicyFormatError("policy csv line " + std::to_string(lineno) + ": " + what);
        };
        const auto f = fmt::split(line);
        if (f.size() != 5) fail("expected 5 fields, got " + std::to_string(f.size()));
        const auto t = fmt::parse_long(f[0]);
        const auto lo = fmt::parse_double(f[1]);
        const auto hi = fmt::parse_double(f[2]);
        const auto flush = fmt::parse_long(f[3]);
        const auto order = fmt::parse_double(f[4]);
        if (!t) fail("bad t '" + std::string(f[0]) + "'");
        if (!lo || !hi) fail("bad tank interval");
        if (!flush || (*flush != 0 && *flush != 1)) fail("flush must be 0 or 1");
        if (!order) fail("bad order amount '" + std::string(f[4]) + "'");
        rows.push_back({static_cast<int>(*t), *lo, *hi, *flush == 1, *order});
    }
    return rows;
}

inline std::vector<PolicyRow> parse_policy_json_rows(const nlohmann::json& j) {
    if (!j.contains("rows") || !j["rows"].is_array())
        throw PolicyFormatError("policy json: missing 'rows' array");
    std::vector<PolicyRow> rows;
    std::size_t n = 0;
    for (const auto& r : j["rows"]) {
        try {
            const int flush = r.at("flush").get<int>();
            if (flush != 0 && flush != 1) throw PolicyFormatError("flush must be 0 or 1");
            rows.push_back({r.at("t").get<int>(), r.at("x_low_L").get<double>(),
                            r.at("x_high_L").get<double>(), flush == 1, r.at("order_L").get<double>()});
        } catch (const std::exception& e) {
            throw PolicyFormatError("policy json row " + std::to_string(n) + ": " + e.what());
        }
        ++n;
    }
    return rows;
}

/**
 * Rebuilds a full table from rows. Every (grid point, age) must be covered
 * by exactly one row, order amounts must lie on the control grid, and
 * age-k rows must flush.
 */
inline PolicyTable policy_from_rows(const std::vector<PolicyRow>& rows, const StateGrid& grid,
                                    const std::vector<double>& controls, int horizon_cap) {
    PolicyTable policy(grid.size(), horizon_cap);
    std::vector<char> covered(grid.size() * static_cast<std::size_t>(horizon_cap + 1), 0);
    const double tol = 1e-9 * (1.0 + std::abs(grid.upper()));

    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        auto fail = [&](const std::string& what) {
            throw PolicyFormatError("policy row " + std::to_string(r) + " (t=" +
                                    std::to_string(row.t) + "): " + what);
        };
        if (row.t < 0 || row.t > horizon_cap)
            fail("age outside 0.." + std::to_string(horizon_cap));
        if (!(row.x_low <= row.x_high)) fail("x_low_L exceeds x_high_L");
        if (row.t == horizon_cap && !row.flush) fail("rows at the age cap must flush");

        std::size_t c = 0;
        while (c < controls.size() && std::abs(controls[c] - row.order) > 1e-9 * (1.0 + std::abs(row.order))) ++c;
        if (c == controls.size()) fail("order amount " + fmt::number(row.order) + " not on the control grid");

        bool any = false;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double x = grid[i];
            if (x < row.x_low - tol || x > row.x_high + tol) continue;
            auto& mark = covered[static_cast<std::size_t>(row.t) * grid.size() + i];
            if (mark) fail("overlaps another row at x=" + fmt::number(x));
            mark = 1;
            any = true;
            policy.at(i, row.t) = {row.flush, c, controls[c]};
        }
        if (!any) fail("covers no grid point");
    }

    for (int t = 0; t <= horizon_cap; ++t)
        for (std::size_t i = 0; i < grid.size(); ++i)
            if (!covered[static_cast<std::size_t>(t) * grid.size() + i])
                throw PolicyFormatError("policy: missing row for t=" + std::to_string(t) +
                                        " at x=" + fmt::number(grid[i]) + " L");
    return policy;
}

}  // namespace bids::water
