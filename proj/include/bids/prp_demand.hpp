#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "bids/reset_problem.hpp"

namespace bids::prp {

/// Daily-total Poisson Rectangular Pulse demand: Poisson(event_rate) events,
/// each consuming an Exponential(duration_rate) volume in liters.
struct PRPParams {
    double event_rate = 40.0;    // lambda, events/day
    double duration_rate = 2.0;  // mu, 1/L

    std::vector<std::string> validate() const {
        std::vector<std::string> errors;
        if (!(event_rate > 0.0) || !std::isfinite(event_rate))
            errors.push_back("event_rate must be a positive finite number");
        if (!(duration_rate > 0.0) || !std::isfinite(duration_rate))
            errors.push_back("duration_rate must be a positive finite number");
        return errors;
    }
};

struct Moments {
    double mean;
    double variance;
};

/// Draws one daily demand. d == 0 exactly when no usage event occurs.
template <class URBG>
double sample(const PRPParams& params, URBG& rng) {
    if (params.event_rate <= 0.0) return 0.0;
    std::poisson_distribution<long> events(params.event_rate);
    std::exponential_distribution<double> volume(params.duration_rate);
    double d = 0.0;
    const long e = events(rng);
    for (long nu = 0; nu < e; ++nu) d += volume(rng);
    return d;
}

/// Probability of zero demand, e^{-lambda}.
inline double atom_mass(const PRPParams& params) { return std::exp(-params.event_rate); }

inline Moments moments(const PRPParams& params) {
    const double mu = params.duration_rate;
    return {params.event_rate / mu, 2.0 * params.event_rate / (mu * mu)};
}

/**
 * e^{-z} I_1(z) for z >= 0 from the ascending series
 * I_1(z) = sum_m (z/2)^{2m+1} / (m! (m+1)!).
 *
 * For z > 30 the series is summed outward from its largest term, whose
 * scaled magnitude is taken in log space; neighbours follow from the exact
 * term ratio, so no intermediate overflows.
 */
inline double bessel_i1_scaled(double z) {
    if (z < 0.0) throw std::domain_error("bessel_i1_scaled: negative argument");
    if (z == 0.0) return 0.0;
    constexpr double kRelTol = 1e-16;
    const double half = 0.5 * z;
    const double q = half * half;

    if (z <= 30.0) {
        double term = half;
        double sum = term;
        for (double m = 0.0;; m += 1.0) {
            term *= q / ((m + 1.0) * (m + 2.0));
            sum += term;
            if (term < kRelTol * sum) break;
        }
        return sum * std::exp(-z);
    }

    const double peak = std::floor(half);
    const double log_peak = (2.0 * peak + 1.0) * std::log(half) - std::lgamma(peak + 1.0) -
                            std::lgamma(peak + 2.0) - z;
    const double t0 = std::exp(log_peak);
    double sum = t0;
    double term = t0;
    for (double m = peak;; m += 1.0) {
        term *= q / ((m + 1.0) * (m + 2.0));
        sum += term;
        if (term < kRelTol * sum) break;
    }
    term = t0;
    for (double m = peak; m > 0.0; m -= 1.0) {
        term *= m * (m + 1.0) / q;
        sum += term;
        if (term < kRelTol * sum) break;
    }
    return sum;
}

/// Density of the continuous part (d > 0), Bessel form.
inline double pdf_continuous(const PRPParams& params, double d) {
    if (!(d > 0.0)) throw std::domain_error("pdf_continuous: requires d > 0 (the atom at 0 is atom_mass)");
    const double lm = params.event_rate * params.duration_rate;
    const double z = 2.0 * std::sqrt(lm * d);
    // e^{-lambda - mu d} I_1(z) = e^{-(sqrt(mu d) - sqrt(lambda))^2} * e^{-z} I_1(z)
    const double gap = std::sqrt(params.duration_rate * d) - std::sqrt(params.event_rate);
    return std::exp(-gap * gap) * bessel_i1_scaled(z) * std::sqrt(lm / d);
}

/// Density of the continuous part (d > 0), Poisson-mixture-of-Gamma series
/// summed in log space.
inline double pdf_series(const PRPParams& params, double d) {
    if (!(d > 0.0)) throw std::domain_error("pdf_series: requires d > 0");
    const double log_lm = std::log(params.event_rate * params.duration_rate);
    const double log_d = std::log(d);
    const double base = -params.event_rate - params.duration_rate * d;

    auto log_term = [&](double k) {
        return k * log_lm + (k - 1.0) * log_d + base - std::lgamma(k + 1.0) - std::lgamma(k);
    };

    std::vector<double> logs;
    double max_log = -std::numeric_limits<double>::infinity();
    for (double k = 1.0;; k += 1.0) {
        const double l = log_term(k);
        logs.push_back(l);
        if (l > max_log) {
            max_log = l;
        } else if (l < max_log - 40.0) {
            break;
        }
    }
    double acc = 0.0;
    for (double l : logs) acc += std::exp(l - max_log);
    return std::exp(max_log + std::log(acc));
}

/// Equal-weight empirical discretization: n sorted draws, weight 1/n each.
inline DiscreteNoise discretize(const PRPParams& params, std::size_t n_atoms, std::uint64_t seed) {
    if (n_atoms < 2) throw std::invalid_argument("discretize: n_atoms must be >= 2");
    std::mt19937_64 rng(seed);
    std::vector<double> draws(n_atoms);
    for (auto& d : draws) d = sample(params, rng);
    std::sort(draws.begin(), draws.end());
    return DiscreteNoise::equal_weight(draws);
}

}  // namespace bids::prp
