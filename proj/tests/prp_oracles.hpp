#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include "bids/prp_demand.hpp"

// Independent numerical oracles for the demand model: adaptive quadrature of
// the density and a Kolmogorov-Smirnov statistic against the quadrature CDF.
namespace bids::testing {

template <class F>
double integrate(F f, double a, double b, double tol = 1e-13) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, tol);
}

/// Density of the continuous part from a library Bessel routine.
inline double pdf_reference(const prp::PRPParams& p, double d) {
    const double lm = p.event_rate * p.duration_rate;
    return std::exp(-p.event_rate - p.duration_rate * d) *
           boost::math::cyl_bessel_i(1, 2.0 * std::sqrt(lm * d)) * std::sqrt(lm / d);
}

inline double continuous_mass(const prp::PRPParams& p) {
    return integrate([&](double d) { return d > 0.0 ? prp::pdf_continuous(p, d) : p.event_rate * p.duration_rate * std::exp(-p.event_rate); },
                     0.0, std::numeric_limits<double>::infinity());
}

inline double raw_moment(const prp::PRPParams& p, int order) {
    return integrate([&](double d) { return d > 0.0 ? std::pow(d, order) * prp::pdf_continuous(p, d) : 0.0; },
                     0.0, std::numeric_limits<double>::infinity());
}

/**
 * Two-sided KS statistic of the strictly positive samples against the
 * conditional CDF F(d | d > 0), built by integrating the density between
 * consecutive order statistics.
 */
inline double ks_statistic_positive(const prp::PRPParams& p, std::vector<double> samples) {
    samples.erase(std::remove_if(samples.begin(), samples.end(), [](double d) { return !(d > 0.0); }),
                  samples.end());
    std::sort(samples.begin(), samples.end());
    const double mass = continuous_mass(p);
    const double n = static_cast<double>(samples.size());
    auto density = [&](double d) { return d > 0.0 ? prp::pdf_continuous(p, d) : p.event_rate * p.duration_rate * std::exp(-p.event_rate); };

    double cdf = 0.0;
    double prev = 0.0;
    double stat = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i] > prev) {
            cdf += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(density, prev, samples[i], 0, 0.0);
            prev = samples[i];
        }
        const double f = cdf / mass;
        stat = std::max(stat, std::max(std::abs(f - static_cast<double>(i) / n),
                                       std::abs(f - static_cast<double>(i + 1) / n)));
    }
    return stat;
}

/// Asymptotic critical value of sqrt(n) D at significance alpha.
inline double ks_critical(double alpha, std::size_t n) {
    return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

}  // namespace bids::testing
