#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "qdtwin/correlator.hpp"
#include "qdtwin/emitter.hpp"
#include "qdtwin/error.hpp"
#include "qdtwin/fitting.hpp"
#include "support.hpp"

using namespace qdtwin;

namespace {

EmitterParams mono77()
{
    EmitterParams p;
    p.t1_fast_ps = 77.0;
    p.t1_slow_ps = 77.0;
    return p;
}

double mean_of(const std::vector<double>& x)
{
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

std::vector<double> draw_decays(const EmitterParams& p, std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<double> x(n);
    for (auto& v : x) {
        v = sample_decay_time(p, rng);
    }
    return x;
}

}  // namespace

TEST_CASE("occupation probability follows the saturation law")
{
    CHECK(occupation_probability(0.0) == 0.0);
    CHECK(occupation_probability(std::numeric_limits<double>::infinity()) == 1.0);
    CHECK(occupation_probability(1e3) == doctest::Approx(1.0));
    // Oracle: 1 - e^-1 from the series of e^-1.
    double e_inv = 0.0, term = 1.0;
    for (int n = 0; n < 30; ++n) {
        e_inv += term;
        term *= -1.0 / (n + 1);
    }
    CHECK(occupation_probability(1.0, 1.0) == doctest::Approx(1.0 - e_inv).epsilon(1e-14));
    CHECK(occupation_probability(1.0, 1.0) == doctest::Approx(0.6321).epsilon(1e-4));
    double prev = 0.0;
    for (double p = 0.1; p < 10; p += 0.1) {
        const double v = occupation_probability(p, 0.7);
        CHECK(v > prev);
        prev = v;
    }
    CHECK_THROWS_AS(occupation_probability(-0.1), DomainError);
}

TEST_CASE("decay times: sample mean of the fast lifetime")
{
    for (double tau : {77.0, 1780.0}) {
        EmitterParams p = mono77();
        p.t1_fast_ps = tau;
        p.t1_slow_ps = tau;
        const std::size_t n = 200000;
        const double m = mean_of(draw_decays(p, n, 11));
        // Exp(tau): sigma of the mean = tau / sqrt(n).
        CHECK(std::abs(m - tau) < 3.0 * tau / std::sqrt(static_cast<double>(n)));
    }
}

TEST_CASE("decay times: bi-exponential mixture mean")
{
    EmitterParams p = mono77();
    p.t1_slow_ps = 650.0;
    p.slow_fraction = 0.1;
    const double expected = 0.9 * 77.0 + 0.1 * 650.0;
    CHECK(expected == doctest::Approx(134.3));
    const double second = 2.0 * (0.9 * 77.0 * 77.0 + 0.1 * 650.0 * 650.0);
    const double sd = std::sqrt(second - expected * expected);
    const std::size_t n = 400000;
    const double m = mean_of(draw_decays(p, n, 12));
    CHECK(std::abs(m - expected) < 3.0 * sd / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("decay times pass a KS test against the exponential law")
{
    const auto x = draw_decays(mono77(), 20000, 13);
    const double d = testsupport::ks_statistic(x, [](double t) { return t <= 0 ? 0.0 : 1.0 - std::exp(-t / 77.0); });
    CHECK(d < testsupport::ks_critical_001(x.size()));
}

TEST_CASE("spectral diffusion: trivial limits")
{
    EmitterParams p = mono77();
    p.sd_sigma = 0.01;
    p.sd_tau_c_ns = 5.0;
    Rng rng(1);
    CHECK(step_spectral_diffusion(0.0042, 0.0, p, rng) == 0.0042);
    p.sd_sigma = 0.0;
    for (int i = 0; i < 100; ++i) {
        CHECK(step_spectral_diffusion(0.0, 3.0, p, rng) == 0.0);
    }
    CHECK_THROWS_AS(step_spectral_diffusion(0.0, -1.0, p, rng), DomainError);
}

TEST_CASE("spectral diffusion: stationary variance after a long step")
{
    EmitterParams p = mono77();
    p.sd_sigma = 0.007;
    p.sd_tau_c_ns = 2.0;
    Rng rng(2);
    const int n = 100000;
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = step_spectral_diffusion(0.05, 1e4, p, rng);
        s2 += d * d;
    }
    s2 /= n;
    const double var = p.sd_sigma * p.sd_sigma;
    // Var of the sample variance of a normal: 2 sigma^4 / n.
    CHECK(std::abs(s2 - var) < 3.0 * std::sqrt(2.0 / n) * var);
}

TEST_CASE("spectral diffusion: conditional moments of one step")
{
    EmitterParams p = mono77();
    p.sd_sigma = 0.01;
    p.sd_tau_c_ns = 4.0;
    const double d0 = 0.02, dt = 3.0;
    const double rho = std::exp(-dt / p.sd_tau_c_ns);
    const double var = p.sd_sigma * p.sd_sigma * (1.0 - rho * rho);
    Rng rng(3);
    const int n = 100000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = step_spectral_diffusion(d0, dt, p, rng);
        s += d;
        s2 += d * d;
    }
    const double m = s / n;
    CHECK(std::abs(m - d0 * rho) < 4.0 * std::sqrt(var / n));
    CHECK(std::abs(s2 / n - m * m - var) < 4.0 * std::sqrt(2.0 / n) * var);
}

TEST_CASE("generate_stream: saturated drive without multi-photons gives one photon per pulse")
{
    EmitterParams p = mono77();
    ExcitationConfig c;
    c.n_pulses = 1'000'000;
    c.power_ratio = 1e3;
    c.seed = 5;
    const auto s = generate_stream(p, c);
    CHECK(s.size() == 1'000'000);
}

TEST_CASE("generate_stream: ordering, pulse bound and determinism")
{
    EmitterParams p = mono77();
    p.t1_slow_ps = 650;
    p.slow_fraction = 0.2;
    p.p_multi = 0.1;
    p.sd_sigma = 0.005;
    ExcitationConfig c;
    c.rep_rate_hz = 1.28e9;
    c.n_pulses = 50000;
    c.power_ratio = 0.8;
    c.seed = 99;
    const auto s1 = generate_stream(p, c);
    const auto s2 = generate_stream(p, c);
    CHECK(s1 == s2);
    const PulseClock clock(c.rep_rate_hz);
    for (std::size_t i = 0; i < s1.size(); ++i) {
        CHECK(s1[i].time_ps >= clock.time_of(s1[i].pulse_index));
        if (i > 0) {
            CHECK(s1[i - 1].time_ps <= s1[i].time_ps);
        }
    }
    c.seed = 100;
    CHECK(generate_stream(p, c) != s1);
}

TEST_CASE("generate_stream: event count is Binomial-like around N p (1 + p_multi)")
{
    EmitterParams p = mono77();
    p.p_multi = 0.05;
    ExcitationConfig c;
    c.n_pulses = 200000;
    c.power_ratio = 0.5;
    c.seed = 17;
    const double q = 1.0 - std::exp(-0.5);
    const double mean = q * (1.0 + p.p_multi);
    // X = B1 (1 + B2): E[X^2] = q (1 + 3 p_multi).
    const double var = q * (1.0 + 3.0 * p.p_multi) - mean * mean;
    const double n = static_cast<double>(c.n_pulses);
    const auto s = generate_stream(p, c);
    CHECK(std::abs(static_cast<double>(s.size()) - n * mean) < 4.0 * std::sqrt(n * var));
    const auto partners = std::count_if(s.begin(), s.end(), [](const EmissionEvent& e) { return e.is_multi_partner; });
    CHECK(partners > 0);
}

TEST_CASE("GHz clock: 781.25 ps period rounded per pulse without drift")
{
    const PulseClock clock(1.28e9);
    CHECK(clock.period_ps() == 781.25);
    std::set<std::int64_t> steps;
    for (std::uint64_t k = 0; k < 100000; ++k) {
        // Oracle: round-half-up of k * 3125 / 4 in integers.
        CHECK(clock.time_of(k) == static_cast<std::int64_t>((k * 3125 + 2) / 4));
        if (k > 0) {
            steps.insert(clock.time_of(k) - clock.time_of(k - 1));
        }
    }
    CHECK(steps == std::set<std::int64_t>{781, 782});
    CHECK(clock.time_of(4'000'000) == 3'125'000'000LL);
    CHECK(std::llround(clock.period_ps()) == 781);
    for (std::int64_t t : {0LL, 780LL, 781LL, 1562LL, 1563LL, 999'999LL}) {
        const auto k = clock.latest_pulse_at_or_before(t);
        CHECK(clock.time_of(k) <= t);
        CHECK(clock.time_of(k + 1) > t);
    }
}

TEST_CASE("doublet schedule places pulse pairs inside each clock period")
{
    ExcitationConfig c;
    c.n_pulses = 3;
    c.doublet = true;
    c.doublet_spacing_ps = 2000;
    const ExcitationSchedule s(c);
    CHECK(s.pulse_count() == 6);
    CHECK(s.pulse_time(0) == 0);
    CHECK(s.pulse_time(1) == 2000);
    CHECK(s.pulse_time(2) == 12500);
    CHECK(s.pulse_time(3) == 14500);
    CHECK(s.duration_ps() == 37500);
}

TEST_CASE("clock overflow is a range error")
{
    ExcitationConfig c;
    c.rep_rate_hz = 1.0;
    c.n_pulses = 4'000'000'000ULL;
    CHECK_THROWS_AS(ExcitationSchedule{c}, RangeError);
    c.rep_rate_hz = 80e6;
    c.n_pulses = 5'000'000'000ULL;
    CHECK_THROWS_AS(ExcitationSchedule{c}, RangeError);
}

TEST_CASE("folded emission times recover the lifetime within 2 percent")
{
    EmitterParams p = mono77();
    ExcitationConfig c;
    c.n_pulses = 400000;
    c.power_ratio = 2.0;
    c.seed = 21;
    const auto s = generate_stream(p, c);
    const PulseClock clock(c.rep_rate_hz);
    DecayHistogram h;
    h.bin_width_ps = 4;
    h.counts.assign(3125, 0.0);
    std::vector<double> delays;
    for (const auto& e : s) {
        const std::int64_t d = e.time_ps - clock.time_of(e.pulse_index);
        h.counts[static_cast<std::size_t>(d / 4)] += 1.0;
        delays.push_back(static_cast<double>(d));
    }
    const auto fit = fit_decay(h, {});
    CHECK(std::abs(fit.t1_fast - 77.0) / 77.0 < 0.02);

    // Dither the integer-ps rounding before comparing with the continuous law.
    Rng rng(4);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    std::vector<double> sample(delays.begin(), delays.begin() + 20000);
    for (auto& v : sample) {
        v += u(rng);
    }
    const double ks = testsupport::ks_statistic(sample, [](double t) { return t <= 0 ? 0.0 : 1.0 - std::exp(-t / 77.0); });
    CHECK(ks < testsupport::ks_critical_001(sample.size()));
}

TEST_CASE("pair overlap limits")
{
    EmitterParams p = mono77();
    EmissionEvent a, b;
    CHECK(pair_overlap(a, b, p) == 1.0);

    const double gamma = 1.0 / 77.0;
    b.detuning = gamma;
    CHECK(pair_overlap(a, b, p) == doctest::Approx(0.5).epsilon(1e-14));

    // gamma / (gamma + 2 gamma*) = 0.82  =>  gamma* = gamma (1/0.82 - 1) / 2.
    p.dephasing_rate = gamma * (1.0 / 0.82 - 1.0) / 2.0;
    b.detuning = 0.0;
    CHECK(pair_overlap(a, b, p) == doctest::Approx(0.82).epsilon(1e-12));
}

TEST_CASE("pair overlap is symmetric and non-increasing in detuning and dephasing")
{
    EmitterParams p = mono77();
    EmissionEvent a, b;
    a.detuning = 0.003;
    double prev = 2.0;
    for (double dw = 0.0; dw < 0.1; dw += 0.002) {
        b.detuning = a.detuning + dw;
        const double m = pair_overlap(a, b, p);
        CHECK(m == pair_overlap(b, a, p));
        CHECK(m <= prev);
        CHECK(m >= 0.0);
        prev = m;
    }
    b.detuning = a.detuning + 0.01;
    prev = 2.0;
    for (double g = 0.0; g < 0.05; g += 0.001) {
        p.dephasing_rate = g;
        const double m = pair_overlap(a, b, p);
        CHECK(m <= prev);
        prev = m;
    }
}

TEST_CASE("mean detuning difference grows with photon separation")
{
    EmitterParams p = mono77();
    p.sd_sigma = 0.007;
    p.sd_tau_c_ns = 80.0;
    ExcitationConfig c;
    c.n_pulses = 200000;
    c.power_ratio = 1e3;
    c.seed = 8;
    const auto s = generate_stream(p, c);
    double prev = 0.0;
    for (std::size_t lag : {1u, 2u, 4u, 8u, 16u, 32u}) {
        double sum = 0.0;
        for (std::size_t i = lag; i < s.size(); ++i) {
            sum += std::abs(s[i].detuning - s[i - lag].detuning);
        }
        const double m = sum / static_cast<double>(s.size() - lag);
        CHECK(m >= prev);
        prev = m;
    }
}

TEST_CASE("invalid emitter and excitation parameters name the field")
{
    auto message_of = [](auto&& fn) {
        try {
            fn();
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    EmitterParams p = mono77();
    p.t1_fast_ps = -1;
    CHECK(message_of([&] { p.validate(); }).find("emitter.t1_fast_ps") != std::string::npos);
    p = mono77();
    p.p_multi = 0.6;
    CHECK(message_of([&] { p.validate(); }).find("emitter.p_multi") != std::string::npos);
    p = mono77();
    p.slow_fraction = 1.0;
    CHECK(message_of([&] { p.validate(); }).find("emitter.slow_fraction") != std::string::npos);
    ExcitationConfig c;
    c.rep_rate_hz = 80.5e6 + 0.5;
    CHECK(message_of([&] { c.validate(); }).find("excitation.rep_rate_hz") != std::string::npos);
    c = {};
    c.n_pulses = 0;
    CHECK(message_of([&] { c.validate(); }).find("excitation.n_pulses") != std::string::npos);
}

TEST_CASE("power-dependent dephasing folds into the rate")
{
    EmitterParams p = mono77();
    p.dephasing_rate = 0.001;
    p.dephasing_power_coeff = 0.002;
    CHECK(p.at_power(0.5).dephasing_rate == doctest::Approx(0.002));
    CHECK(p.at_power(0.5).dephasing_power_coeff == 0.0);
}
