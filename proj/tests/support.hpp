#pragma once

// Shared oracles and synthetic-data helpers for the unit tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "qdtwin/correlator.hpp"
#include "qdtwin/fitting.hpp"
#include "qdtwin/timetag.hpp"

namespace testsupport {

// All-pairs reference: counts of b[j] - a[i] in [tau_min, tau_max).
inline std::vector<std::uint64_t> brute_force_correlation(const std::vector<std::int64_t>& a,
                                                          const std::vector<std::int64_t>& b, std::int64_t bw,
                                                          std::int64_t tau_min, std::int64_t tau_max)
{
    std::vector<std::uint64_t> counts(static_cast<std::size_t>((tau_max - tau_min) / bw), 0);
    for (std::int64_t x : a) {
        for (std::int64_t y : b) {
            const std::int64_t d = y - x;
            if (d >= tau_min && d < tau_max) {
                ++counts[static_cast<std::size_t>((d - tau_min) / bw)];
            }
        }
    }
    return counts;
}

inline qdtwin::TimeTagStream random_stream(std::mt19937_64& rng, std::size_t n, std::int64_t span, int channel)
{
    std::uniform_int_distribution<std::int64_t> u(0, span);
    qdtwin::TimeTagStream s;
    s.channel = channel;
    s.tags.resize(n);
    for (auto& t : s.tags) {
        t = u(rng);
    }
    std::sort(s.tags.begin(), s.tags.end());
    s.duration_ps = span + 1;
    return s;
}

// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
template <class Cdf>
double ks_statistic(std::vector<double> x, Cdf cdf)
{
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

// Asymptotic critical value at alpha = 0.01.
inline double ks_critical_001(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

// Poisson-sampled histogram of `n_events` exponential arrivals plus a flat background.
inline qdtwin::DecayHistogram synthetic_decay(std::mt19937_64& rng, double n_events, double tau_fast,
                                              double tau_slow, double slow_fraction, double background,
                                              std::int64_t bw, std::size_t bins)
{
    qdtwin::DecayHistogram h;
    h.t0_ps = 0;
    h.bin_width_ps = bw;
    h.counts.resize(bins);
    for (std::size_t i = 0; i < bins; ++i) {
        const double lo = static_cast<double>(i) * static_cast<double>(bw);
        const double hi = lo + static_cast<double>(bw);
        auto mass = [&](double tau) { return std::exp(-lo / tau) - std::exp(-hi / tau); };
        const double mu =
            n_events * ((1.0 - slow_fraction) * mass(tau_fast) + slow_fraction * mass(tau_slow)) + background;
        h.counts[i] = static_cast<double>(std::poisson_distribution<long long>(mu)(rng));
    }
    return h;
}

inline qdtwin::Spectrum synthetic_fano(std::mt19937_64& rng, const qdtwin::FanoParams& p, double lo, double hi,
                                       std::size_t n, double rel_noise)
{
    qdtwin::Spectrum s;
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double l = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
        const double r = qdtwin::fano_model(l, p);
        s.wavelength_nm.push_back(l);
        s.intensity.push_back(r * (1.0 + rel_noise * g(rng)));
    }
    return s;
}

}  // namespace testsupport
