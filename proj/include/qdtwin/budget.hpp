#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qdtwin/measured.hpp"

namespace qdtwin {

struct EfficiencyStage {
    std::string name;
    double efficiency = 1.0;
    double abs_uncertainty = 0.0;
};

/// Ordered transmission stages between the source and the detector clicks.
class EfficiencyChain {
public:
    EfficiencyChain() = default;
    explicit EfficiencyChain(std::vector<EfficiencyStage> stages);

    /// Splice 0.95(1), cryostat feedthrough 0.60(5), detection path 0.049(1).
    static EfficiencyChain paper_setup();

    const std::vector<EfficiencyStage>& stages() const { return stages_; }
    bool empty() const { return stages_.empty(); }

    double product() const;
    /// Relative uncertainty of the product, stage errors in quadrature.
    double relative_uncertainty() const;

private:
    std::vector<EfficiencyStage> stages_;
};

struct CountrateObservation {
    std::string label;
    double rate_cps = 0.0;
    double rate_uncertainty = 0.0;
    double rep_rate_hz = 80e6;
};

/// eta = R / f. Throws DataError when R > f.
Measured overall_efficiency(const CountrateObservation& obs);

struct SourceEfficiency {
    Measured eta;
    /// eta_src > 1: the chain under-counts the losses.
    bool inconsistent = false;
};

/// eta_src = eta_overall / prod(stages), relative errors in quadrature.
SourceEfficiency infer_source_efficiency(Measured eta_overall, const EfficiencyChain& chain);

/// Same quantity by sampling every input from a normal with its stated error.
Measured infer_source_efficiency_mc(Measured eta_overall, const EfficiencyChain& chain, std::size_t samples,
                                    std::uint64_t seed);

/// R = eta_src * prod(stages) * f.
double forward_countrate(double eta_src, const EfficiencyChain& chain, double rep_rate_hz);

/// Fundamental Gaussian mode: 1/e^2 field radius in um.
struct GaussianMode {
    double waist_um = 1.0;
    double wavelength_nm = 940.0;
};

/// Marcuse estimate of the step-index fibre mode radius,
/// w/a = 0.65 + 1.619 V^-1.5 + 2.879 V^-6 with V = 2 pi a NA / lambda.
GaussianMode marcuse_fiber_mode(double core_radius_um, double numerical_aperture, double wavelength_nm);

/// UHNA3: core radius 0.9 um, NA 0.35.
GaussianMode uhna3_mode(double wavelength_nm = 940.0);

/// Power overlap of two aligned-axis Gaussian modes offset laterally by d,
/// including the waist-mismatch prefactor.
double mode_overlap(const GaussianMode& a, const GaussianMode& b, double offset_um);

/// Overlap relative to perfect centring: exp(-2 d^2 / (w1^2 + w2^2)).
double lateral_coupling(const GaussianMode& a, const GaussianMode& b, double offset_um);
double lateral_coupling(const GaussianMode& a, const GaussianMode& b, double dx_um, double dy_um);

}  // namespace qdtwin
