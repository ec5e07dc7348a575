#pragma once

#include <cstdint>
#include <vector>

#include "qdtwin/rng.hpp"

namespace qdtwin {

/// Pulsed two-level emitter. Times in ps, angular frequencies in rad/ps,
/// the spectral-diffusion correlation time in ns.
struct EmitterParams {
    double t1_fast_ps = 77.0;
    double t1_slow_ps = 77.0;
    double slow_fraction = 0.0;
    /// Pure dephasing rate at zero excitation power.
    double dephasing_rate = 0.0;
    /// Power-induced dephasing: gamma*(P) = dephasing_rate + coeff * P/Psat.
    double dephasing_power_coeff = 0.0;
    double sd_sigma = 0.0;
    double sd_tau_c_ns = 1.0;
    double p_multi = 0.0;
    double p_sat_exponent = 1.0;

    void validate() const;

    double mean_decay_time_ps() const
    {
        return (1.0 - slow_fraction) * t1_fast_ps + slow_fraction * t1_slow_ps;
    }

    /// Copy with the power-dependent dephasing folded into dephasing_rate.
    EmitterParams at_power(double power_ratio) const;
};

/// Laser clock and run length. `doublet` replaces each clock pulse by a pair
/// of pulses `doublet_spacing_ps` apart.
struct ExcitationConfig {
    double rep_rate_hz = 80e6;
    std::uint64_t n_pulses = 1;
    double power_ratio = 1.0;
    std::uint64_t seed = 0;
    bool doublet = false;
    std::int64_t doublet_spacing_ps = 2000;

    void validate() const;

    std::uint64_t excitation_pulse_count() const { return doublet ? 2 * n_pulses : n_pulses; }
};

/// Integer-picosecond laser clock. Pulse k fires at round(k * 1e12 / f),
/// evaluated exactly for every k so rounding never accumulates.
class PulseClock {
public:
    explicit PulseClock(double rep_rate_hz);

    std::int64_t time_of(std::uint64_t k) const;
    /// Largest k with time_of(k) <= t; t must be >= 0.
    std::uint64_t latest_pulse_at_or_before(std::int64_t t) const;
    double period_ps() const { return 1e12 / static_cast<double>(rep_rate_hz_); }
    std::uint64_t rep_rate_hz() const { return rep_rate_hz_; }

private:
    std::uint64_t rep_rate_hz_;
};

/// Excitation pulse timing including doublet mode.
class ExcitationSchedule {
public:
    explicit ExcitationSchedule(const ExcitationConfig& cfg);

    std::uint64_t pulse_count() const { return n_exc_; }
    std::int64_t pulse_time(std::uint64_t pulse_index) const;
    /// End of the last clock period.
    std::int64_t duration_ps() const { return duration_; }
    const PulseClock& clock() const { return clock_; }

private:
    PulseClock clock_;
    bool doublet_;
    std::int64_t spacing_;
    std::uint64_t n_exc_;
    std::int64_t duration_;
};

struct EmissionEvent {
    std::uint64_t pulse_index = 0;
    std::int64_t time_ps = 0;
    double detuning = 0.0;
    bool is_multi_partner = false;

    friend bool operator==(const EmissionEvent&, const EmissionEvent&) = default;
};

using EmissionStream = std::vector<EmissionEvent>;

double occupation_probability(double power_ratio, double p_sat_exponent = 1.0);

double sample_decay_time(const EmitterParams& params, Rng& rng);

/// Exact Ornstein-Uhlenbeck update over `dt_ns`; stationary law N(0, sd_sigma^2).
double step_spectral_diffusion(double detuning_prev, double dt_ns, const EmitterParams& params,
                               Rng& rng);

/// Simulated emission for every excitation pulse, sorted by time.
EmissionStream generate_stream(const EmitterParams& params, const ExcitationConfig& cfg);

/// Two-photon wavefunction overlap of a pair, using params.dephasing_rate as gamma*.
double pair_overlap(const EmissionEvent& e1, const EmissionEvent& e2, const EmitterParams& params);

}  // namespace qdtwin
