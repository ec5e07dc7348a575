#include "qdtwin/bench.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "qdtwin/error.hpp"

namespace qdtwin {

void DetectorParams::validate(const char* field) const
{
    const std::string f(field);
    if (!(efficiency >= 0.0 && efficiency <= 1.0)) {
        throw ConfigError(f + ".efficiency: must lie in [0, 1]");
    }
    if (!(std::isfinite(jitter_sigma_ps) && jitter_sigma_ps >= 0.0)) {
        throw ConfigError(f + ".jitter_sigma_ps: must be finite and >= 0");
    }
    if (!(std::isfinite(dead_time_ps) && dead_time_ps >= 0.0)) {
        throw ConfigError(f + ".dead_time_ps: must be finite and >= 0");
    }
    if (!(std::isfinite(dark_rate_hz) && dark_rate_hz >= 0.0)) {
        throw ConfigError(f + ".dark_rate_hz: must be finite and >= 0");
    }
}

void HomConfig::validate() const
{
    if (delay_ps <= 0) {
        throw ConfigError("bench.hom.delay_ps: must be > 0");
    }
}

std::int64_t HomConfig::gate_for(const EmitterParams& params) const
{
    return coincidence_gate_ps >= 0 ? coincidence_gate_ps : std::llround(5.0 * params.t1_fast_ps);
}

TimeTagStream detect(std::span<const std::int64_t> arrivals, const DetectorParams& det, int channel,
                     std::int64_t duration_ps, Rng& rng)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> jitter(0.0, 1.0);

    std::vector<std::int64_t> clicks;
    clicks.reserve(static_cast<std::size_t>(static_cast<double>(arrivals.size()) * det.efficiency) + 16);
    for (std::int64_t t : arrivals) {
        if (det.efficiency < 1.0 && unit(rng) >= det.efficiency) {
            continue;
        }
        if (det.jitter_sigma_ps > 0.0) {
            t += std::llround(det.jitter_sigma_ps * jitter(rng));
        }
        clicks.push_back(std::max<std::int64_t>(t, 0));
    }

    if (det.dark_rate_hz > 0.0 && duration_ps > 0) {
        std::poisson_distribution<std::int64_t> n_dark(det.dark_rate_hz * 1e-12 *
                                                       static_cast<double>(duration_ps));
        std::uniform_int_distribution<std::int64_t> when(0, duration_ps - 1);
        const std::int64_t n = n_dark(rng);
        for (std::int64_t i = 0; i < n; ++i) {
            clicks.push_back(when(rng));
        }
    }

    std::sort(clicks.begin(), clicks.end());

    if (det.dead_time_ps > 0.0 && !clicks.empty()) {
        const auto dead = static_cast<std::int64_t>(std::ceil(det.dead_time_ps));
        std::size_t kept = 1;
        for (std::size_t i = 1; i < clicks.size(); ++i) {
            if (clicks[i] - clicks[kept - 1] >= dead) {
                clicks[kept++] = clicks[i];
            }
        }
        clicks.resize(kept);
    }

    TimeTagStream out;
    out.channel = channel;
    out.duration_ps = clicks.empty() ? duration_ps : std::max(duration_ps, clicks.back() + 1);
    out.tags = std::move(clicks);
    return out;
}

PortArrivals route_hbt(const EmissionStream& stream, Rng& rng)
{
    PortArrivals out;
    out.port_a.reserve(stream.size() / 2 + 16);
    out.port_b.reserve(stream.size() / 2 + 16);
    for (const EmissionEvent& e : stream) {
        (rng() >> 63 ? out.port_b : out.port_a).push_back(e.time_ps);
    }
    out.diag.photons_in = stream.size();
    out.diag.photons_port_a = out.port_a.size();
    out.diag.photons_port_b = out.port_b.size();
    return out;
}

PortArrivals route_hom(const EmissionStream& stream, const HomConfig& cfg, const EmitterParams& params,
                       Rng& rng)
{
    cfg.validate();
    const std::int64_t gate = cfg.gate_for(params);
    const std::size_t n = stream.size();

    std::vector<std::int64_t> arrival(n);
    for (std::size_t i = 0; i < n; ++i) {
        arrival[i] = stream[i].time_ps + ((rng() >> 63) ? cfg.delay_ps : 0);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return arrival[x] < arrival[y]; });

    PortArrivals out;
    out.port_a.reserve(n / 2 + 16);
    out.port_b.reserve(n / 2 + 16);
    out.diag.photons_in = n;
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto emit = [&](std::size_t idx, bool to_b) { (to_b ? out.port_b : out.port_a).push_back(arrival[idx]); };

    // Greedy pairing in arrival order. The random draws do not depend on
    // polarisation, so a cross-polarised run and a co-polarised run with
    // zero overlap consume identical random sequences.
    std::size_t pos = 0;
    while (pos < n) {
        const std::size_t i = order[pos];
        const bool port_i = rng() >> 63;
        if (pos + 1 < n && arrival[order[pos + 1]] - arrival[i] <= gate) {
            const std::size_t j = order[pos + 1];
            const bool port_j = rng() >> 63;
            const double u = unit(rng);
            const bool bunch_port = rng() >> 63;
            const double overlap = pair_overlap(stream[i], stream[j], params);
            ++out.diag.interfering_pairs;
            out.diag.overlap_sum += overlap;
            if (pos + 2 < n && arrival[order[pos + 2]] - arrival[j] <= gate) {
                ++out.diag.triples;
            }
            if (cfg.copolarized && u < overlap) {
                ++out.diag.bunched_pairs;
                emit(i, bunch_port);
                emit(j, bunch_port);
            } else {
                emit(i, port_i);
                emit(j, port_j);
            }
            pos += 2;
        } else {
            emit(i, port_i);
            pos += 1;
        }
    }
    out.diag.photons_port_a = out.port_a.size();
    out.diag.photons_port_b = out.port_b.size();
    return out;
}

namespace {

BenchOutput detect_ports(PortArrivals ports, const DetectorParams& det_a, const DetectorParams& det_b,
                         std::int64_t duration_ps, std::uint64_t seed)
{
    det_a.validate("detectors.a");
    det_b.validate("detectors.b");
    Rng rng_a = make_rng(seed, "detector", 0);
    Rng rng_b = make_rng(seed, "detector", 1);
    BenchOutput out;
    out.a = detect(ports.port_a, det_a, 0, duration_ps, rng_a);
    out.b = detect(ports.port_b, det_b, 1, duration_ps, rng_b);
    out.diag = ports.diag;
    return out;
}

}  // namespace

BenchOutput hbt_split(const EmissionStream& stream, const DetectorParams& det_a,
                      const DetectorParams& det_b, std::int64_t duration_ps, std::uint64_t seed)
{
    Rng route = make_rng(seed, "route.hbt");
    return detect_ports(route_hbt(stream, route), det_a, det_b, duration_ps, seed);
}

BenchOutput hom_bench(const EmissionStream& stream, const HomConfig& cfg, const EmitterParams& params,
                      const DetectorParams& det_a, const DetectorParams& det_b, std::int64_t duration_ps,
                      std::uint64_t seed)
{
    Rng route = make_rng(seed, "route.hom");
    return detect_ports(route_hom(stream, cfg, params, route), det_a, det_b, duration_ps, seed);
}

}  // namespace qdtwin
