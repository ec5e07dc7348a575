#include "qdtwin/emitter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qdtwin/error.hpp"

namespace qdtwin {

namespace {

void require(bool ok, const char* field, const char* what)
{
    if (!ok) {
        throw ConfigError(std::string(field) + ": " + what);
    }
}

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

}  // namespace

void EmitterParams::validate() const
{
    require(std::isfinite(t1_fast_ps) && t1_fast_ps > 0.0, "emitter.t1_fast_ps", "must be > 0");
    require(std::isfinite(t1_slow_ps) && t1_slow_ps >= t1_fast_ps, "emitter.t1_slow_ps",
            "must be >= t1_fast_ps");
    require(slow_fraction >= 0.0 && slow_fraction < 1.0, "emitter.slow_fraction",
            "must lie in [0, 1)");
    require(finite_nonneg(dephasing_rate), "emitter.dephasing_rate", "must be finite and >= 0");
    require(finite_nonneg(dephasing_power_coeff), "emitter.dephasing_power_coeff",
            "must be finite and >= 0");
    require(finite_nonneg(sd_sigma), "emitter.sd_sigma", "must be finite and >= 0");
    require(std::isfinite(sd_tau_c_ns) && sd_tau_c_ns > 0.0, "emitter.sd_tau_c_ns", "must be > 0");
    require(p_multi >= 0.0 && p_multi <= 0.5, "emitter.p_multi", "must lie in [0, 0.5]");
    require(finite_nonneg(p_sat_exponent), "emitter.p_sat_exponent", "must be finite and >= 0");
}

EmitterParams EmitterParams::at_power(double power_ratio) const
{
    EmitterParams p = *this;
    p.dephasing_rate = dephasing_rate + dephasing_power_coeff * power_ratio;
    p.dephasing_power_coeff = 0.0;
    return p;
}

void ExcitationConfig::validate() const
{
    require(std::isfinite(rep_rate_hz) && rep_rate_hz > 0.0, "excitation.rep_rate_hz", "must be > 0");
    require(rep_rate_hz == std::floor(rep_rate_hz) && rep_rate_hz <= 1e12, "excitation.rep_rate_hz",
            "must be a whole number of Hz not above 1 THz");
    require(n_pulses >= 1, "excitation.n_pulses", "must be >= 1");
    require(finite_nonneg(power_ratio), "excitation.power_ratio", "must be finite and >= 0");
    if (doublet) {
        require(doublet_spacing_ps > 0 && static_cast<double>(doublet_spacing_ps) < 1e12 / rep_rate_hz,
                "excitation.doublet_spacing_ps", "must be > 0 and below the clock period");
    }
}

namespace {
__extension__ using u128 = unsigned __int128;
}  // namespace

PulseClock::PulseClock(double rep_rate_hz)
{
    if (!(rep_rate_hz > 0.0) || rep_rate_hz != std::floor(rep_rate_hz) || rep_rate_hz > 1e12) {
        throw ConfigError("excitation.rep_rate_hz: must be a whole number of Hz in (0, 1e12]");
    }
    rep_rate_hz_ = static_cast<std::uint64_t>(rep_rate_hz);
}

std::int64_t PulseClock::time_of(std::uint64_t k) const
{
    const u128 f = rep_rate_hz_;
    const u128 t = (u128(2) * k * 1'000'000'000'000ULL + f) / (u128(2) * f);
    if (t > static_cast<u128>(std::numeric_limits<std::int64_t>::max())) {
        throw RangeError("pulse time overflows the int64 picosecond clock");
    }
    return static_cast<std::int64_t>(t);
}

std::uint64_t PulseClock::latest_pulse_at_or_before(std::int64_t t) const
{
    auto k = static_cast<std::uint64_t>(static_cast<u128>(t) * rep_rate_hz_ / 1'000'000'000'000ULL);
    while (time_of(k + 1) <= t) {
        ++k;
    }
    while (k > 0 && time_of(k) > t) {
        --k;
    }
    return k;
}

ExcitationSchedule::ExcitationSchedule(const ExcitationConfig& cfg)
    : clock_(cfg.rep_rate_hz),
      doublet_(cfg.doublet),
      spacing_(cfg.doublet_spacing_ps),
      n_exc_(cfg.excitation_pulse_count())
{
    if (n_exc_ > std::numeric_limits<std::uint32_t>::max()) {
        throw RangeError("excitation pulse count exceeds the 32-bit pulse_index of the record format");
    }
    // Leave half the int64 range as headroom for decay tails and jitter.
    const long double end = static_cast<long double>(cfg.n_pulses) * 1e12L / cfg.rep_rate_hz;
    if (end > static_cast<long double>(std::numeric_limits<std::int64_t>::max() / 2)) {
        throw RangeError("n_pulses * period overflows the picosecond clock");
    }
    duration_ = clock_.time_of(cfg.n_pulses);
}

std::int64_t ExcitationSchedule::pulse_time(std::uint64_t pulse_index) const
{
    if (!doublet_) {
        return clock_.time_of(pulse_index);
    }
    return clock_.time_of(pulse_index / 2) + static_cast<std::int64_t>(pulse_index % 2) * spacing_;
}

double occupation_probability(double power_ratio, double p_sat_exponent)
{
    if (std::isnan(power_ratio) || power_ratio < 0.0) {
        throw DomainError("occupation_probability: power_ratio must be >= 0");
    }
    if (std::isinf(power_ratio)) {
        return p_sat_exponent > 0.0 ? 1.0 : 0.0;
    }
    return -std::expm1(-power_ratio * p_sat_exponent);
}

double sample_decay_time(const EmitterParams& params, Rng& rng)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double tau = (params.slow_fraction > 0.0 && unit(rng) < params.slow_fraction)
                           ? params.t1_slow_ps
                           : params.t1_fast_ps;
    std::exponential_distribution<double> decay(1.0 / tau);
    return decay(rng);
}

double step_spectral_diffusion(double detuning_prev, double dt_ns, const EmitterParams& params,
                               Rng& rng)
{
    if (dt_ns < 0.0) {
        throw DomainError("step_spectral_diffusion: dt must be >= 0");
    }
    if (params.sd_sigma == 0.0) {
        return 0.0;
    }
    if (dt_ns == 0.0) {
        return detuning_prev;
    }
    const double decay = std::exp(-dt_ns / params.sd_tau_c_ns);
    const double spread = params.sd_sigma * std::sqrt(-std::expm1(-2.0 * dt_ns / params.sd_tau_c_ns));
    std::normal_distribution<double> gauss(0.0, 1.0);
    return detuning_prev * decay + spread * gauss(rng);
}

EmissionStream generate_stream(const EmitterParams& params, const ExcitationConfig& cfg)
{
    params.validate();
    cfg.validate();
    const ExcitationSchedule schedule(cfg);
    const double p_occ = occupation_probability(cfg.power_ratio, params.p_sat_exponent);

    Rng rng = make_rng(cfg.seed, "emitter");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    EmissionStream events;
    events.reserve(static_cast<std::size_t>(
        static_cast<double>(schedule.pulse_count()) * p_occ * (1.0 + params.p_multi) * 1.01 + 16));

    double detuning = params.sd_sigma > 0.0 ? params.sd_sigma * gauss(rng) : 0.0;
    std::int64_t t_prev = schedule.pulse_time(0);
    bool sorted = true;
    std::int64_t last_time = std::numeric_limits<std::int64_t>::min();

    auto push = [&](std::uint64_t k, std::int64_t t, bool partner) {
        const std::int64_t when = t + std::llround(sample_decay_time(params, rng));
        sorted = sorted && when >= last_time;
        last_time = std::max(last_time, when);
        events.push_back({k, when, detuning, partner});
    };

    for (std::uint64_t k = 0; k < schedule.pulse_count(); ++k) {
        const std::int64_t t = schedule.pulse_time(k);
        if (k > 0) {
            detuning = step_spectral_diffusion(detuning, 1e-3 * static_cast<double>(t - t_prev), params,
                                               rng);
        }
        t_prev = t;
        if (unit(rng) >= p_occ) {
            continue;
        }
        push(k, t, false);
        if (params.p_multi > 0.0 && unit(rng) < params.p_multi) {
            push(k, t, true);
        }
    }

    if (!sorted) {
        std::stable_sort(events.begin(), events.end(),
                         [](const EmissionEvent& a, const EmissionEvent& b) { return a.time_ps < b.time_ps; });
    }
    return events;
}

double pair_overlap(const EmissionEvent& e1, const EmissionEvent& e2, const EmitterParams& params)
{
    const double gamma = 1.0 / params.t1_fast_ps;
    const double gamma_total = gamma + 2.0 * params.dephasing_rate;
    const double dw = e1.detuning - e2.detuning;
    const double dephasing_factor = gamma / gamma_total;
    const double gt2 = gamma_total * gamma_total;
    return dephasing_factor * gt2 / (gt2 + dw * dw);
}

}  // namespace qdtwin
