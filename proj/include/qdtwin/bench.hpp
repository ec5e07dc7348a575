#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qdtwin/emitter.hpp"
#include "qdtwin/rng.hpp"
#include "qdtwin/timetag.hpp"

namespace qdtwin {

struct DetectorParams {
    double efficiency = 1.0;
    double jitter_sigma_ps = 0.0;
    double dead_time_ps = 0.0;
    double dark_rate_hz = 0.0;

    void validate(const char* field = "detector") const;

    static DetectorParams ideal() { return {}; }
};

/// Unbalanced Mach-Zehnder HOM interferometer.
struct HomConfig {
    std::int64_t delay_ps = 12500;
    bool copolarized = true;
    /// Maximum arrival difference at the output splitter for two photons to
    /// interfere. Negative selects the default of 5 * t1_fast.
    std::int64_t coincidence_gate_ps = -1;

    void validate() const;
    std::int64_t gate_for(const EmitterParams& params) const;
};

struct BenchDiagnostics {
    std::uint64_t photons_in = 0;
    std::uint64_t photons_port_a = 0;
    std::uint64_t photons_port_b = 0;
    std::uint64_t interfering_pairs = 0;
    std::uint64_t bunched_pairs = 0;
    /// Third photon inside the gate of an already formed pair.
    std::uint64_t triples = 0;
    double overlap_sum = 0.0;

    double mean_overlap() const
    {
        return interfering_pairs > 0 ? overlap_sum / static_cast<double>(interfering_pairs) : 0.0;
    }
};

/// Photon arrival times at the two output ports, before detection.
struct PortArrivals {
    std::vector<std::int64_t> port_a;
    std::vector<std::int64_t> port_b;
    BenchDiagnostics diag;
};

struct BenchOutput {
    TimeTagStream a;
    TimeTagStream b;
    BenchDiagnostics diag;
};

/// Efficiency thinning, Gaussian jitter, Poisson dark counts over
/// [0, duration_ps) and a dead-time filter. `arrivals` need not be sorted.
TimeTagStream detect(std::span<const std::int64_t> arrivals, const DetectorParams& det, int channel,
                     std::int64_t duration_ps, Rng& rng);

PortArrivals route_hbt(const EmissionStream& stream, Rng& rng);
PortArrivals route_hom(const EmissionStream& stream, const HomConfig& cfg, const EmitterParams& params,
                       Rng& rng);

/// Fair beamsplitter followed by two detectors. Substreams of `seed` drive
/// routing and each detector independently.
BenchOutput hbt_split(const EmissionStream& stream, const DetectorParams& det_a,
                      const DetectorParams& det_b, std::int64_t duration_ps, std::uint64_t seed);

/// Pairwise-interference HOM bench. `params.dephasing_rate` is the gamma*
/// used for the pair overlap (see EmitterParams::at_power).
BenchOutput hom_bench(const EmissionStream& stream, const HomConfig& cfg, const EmitterParams& params,
                      const DetectorParams& det_a, const DetectorParams& det_b, std::int64_t duration_ps,
                      std::uint64_t seed);

}  // namespace qdtwin
