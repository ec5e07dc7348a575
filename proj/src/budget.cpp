#include "qdtwin/budget.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "qdtwin/error.hpp"
#include "qdtwin/rng.hpp"

namespace qdtwin {

EfficiencyChain::EfficiencyChain(std::vector<EfficiencyStage> stages) : stages_(std::move(stages))
{
    for (const auto& s : stages_) {
        if (!(s.efficiency > 0.0 && s.efficiency <= 1.0)) {
            throw ConfigError("budget.stages." + s.name + ".efficiency: must lie in (0, 1]");
        }
        if (!(std::isfinite(s.abs_uncertainty) && s.abs_uncertainty >= 0.0)) {
            throw ConfigError("budget.stages." + s.name + ".uncertainty: must be finite and >= 0");
        }
    }
}

EfficiencyChain EfficiencyChain::paper_setup()
{
    return EfficiencyChain({{"splice", 0.95, 0.01}, {"cryo", 0.60, 0.05}, {"detection", 0.049, 0.001}});
}

double EfficiencyChain::product() const
{
    double p = 1.0;
    for (const auto& s : stages_) {
        p *= s.efficiency;
    }
    return p;
}

double EfficiencyChain::relative_uncertainty() const
{
    double sum = 0.0;
    for (const auto& s : stages_) {
        const double r = s.abs_uncertainty / s.efficiency;
        sum += r * r;
    }
    return std::sqrt(sum);
}

Measured overall_efficiency(const CountrateObservation& obs)
{
    if (!(obs.rep_rate_hz > 0.0)) {
        throw ConfigError("observation " + obs.label + ": rep_rate_hz must be > 0");
    }
    if (!(obs.rate_cps >= 0.0) || !(obs.rate_uncertainty >= 0.0)) {
        throw DataError("observation " + obs.label + ": rate and uncertainty must be >= 0");
    }
    if (obs.rate_cps > obs.rep_rate_hz) {
        throw DataError("observation " + obs.label + ": countrate exceeds the repetition rate");
    }
    return {obs.rate_cps / obs.rep_rate_hz, obs.rate_uncertainty / obs.rep_rate_hz};
}

SourceEfficiency infer_source_efficiency(Measured eta_overall, const EfficiencyChain& chain)
{
    const double prod = chain.product();
    if (!(prod > 0.0)) {
        throw DomainError("infer_source_efficiency: chain product must be > 0");
    }
    SourceEfficiency out;
    out.eta.value = eta_overall.value / prod;
    const double rel_in = eta_overall.value > 0.0 ? eta_overall.err / eta_overall.value : 0.0;
    const double rel_chain = chain.relative_uncertainty();
    out.eta.err = eta_overall.value > 0.0 ? out.eta.value * std::hypot(rel_in, rel_chain) : eta_overall.err / prod;
    out.inconsistent = out.eta.value > 1.0;
    return out;
}

Measured infer_source_efficiency_mc(Measured eta_overall, const EfficiencyChain& chain, std::size_t samples,
                                    std::uint64_t seed)
{
    if (samples < 2) {
        throw DomainError("infer_source_efficiency_mc: need at least 2 samples");
    }
    Rng rng = make_rng(seed, "budget.mc");
    std::normal_distribution<double> gauss(0.0, 1.0);
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        double prod = 1.0;
        for (const auto& s : chain.stages()) {
            prod *= s.efficiency + s.abs_uncertainty * gauss(rng);
        }
        const double x = (eta_overall.value + eta_overall.err * gauss(rng)) / prod;
        const double delta = x - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (x - mean);
    }
    return {mean, std::sqrt(m2 / static_cast<double>(samples - 1))};
}

double forward_countrate(double eta_src, const EfficiencyChain& chain, double rep_rate_hz)
{
    if (!(eta_src >= 0.0 && eta_src <= 1.0)) {
        throw DomainError("forward_countrate: eta_src must lie in [0, 1]");
    }
    if (!(rep_rate_hz > 0.0)) {
        throw DomainError("forward_countrate: rep_rate_hz must be > 0");
    }
    return eta_src * chain.product() * rep_rate_hz;
}

GaussianMode marcuse_fiber_mode(double core_radius_um, double numerical_aperture, double wavelength_nm)
{
    if (!(core_radius_um > 0.0 && numerical_aperture > 0.0 && wavelength_nm > 0.0)) {
        throw DomainError("marcuse_fiber_mode: core radius, NA and wavelength must be > 0");
    }
    const double v = 2.0 * std::numbers::pi * core_radius_um * numerical_aperture / (wavelength_nm * 1e-3);
    const double ratio = 0.65 + 1.619 * std::pow(v, -1.5) + 2.879 * std::pow(v, -6.0);
    return {core_radius_um * ratio, wavelength_nm};
}

GaussianMode uhna3_mode(double wavelength_nm) { return marcuse_fiber_mode(0.9, 0.35, wavelength_nm); }

namespace {

void check_modes(const GaussianMode& a, const GaussianMode& b, double offset_um)
{
    if (!(a.waist_um > 0.0 && b.waist_um > 0.0)) {
        throw DomainError("lateral_coupling: waists must be > 0");
    }
    if (!(offset_um >= 0.0)) {
        throw DomainError("lateral_coupling: offset must be >= 0");
    }
}

}  // namespace

double mode_overlap(const GaussianMode& a, const GaussianMode& b, double offset_um)
{
    check_modes(a, b, offset_um);
    const double s = a.waist_um * a.waist_um + b.waist_um * b.waist_um;
    const double mismatch = 2.0 * a.waist_um * b.waist_um / s;
    return mismatch * mismatch * std::exp(-2.0 * offset_um * offset_um / s);
}

double lateral_coupling(const GaussianMode& a, const GaussianMode& b, double offset_um)
{
    check_modes(a, b, offset_um);
    const double s = a.waist_um * a.waist_um + b.waist_um * b.waist_um;
    return std::exp(-2.0 * offset_um * offset_um / s);
}

double lateral_coupling(const GaussianMode& a, const GaussianMode& b, double dx_um, double dy_um)
{
    return lateral_coupling(a, b, std::hypot(dx_um, dy_um));
}

}  // namespace qdtwin
