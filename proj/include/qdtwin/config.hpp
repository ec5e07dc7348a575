#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdtwin/bench.hpp"
#include "qdtwin/budget.hpp"
#include "qdtwin/emitter.hpp"
#include "qdtwin/fitting.hpp"
#include "qdtwin/io.hpp"

namespace qdtwin {

enum class BenchType { hbt, hom };

struct BenchConfig {
    BenchType type = BenchType::hbt;
    /// Delay and gate of the interferometer; a HOM run always records both
    /// the co- and the cross-polarized configuration.
    HomConfig hom;
};

struct AnalysisConfig {
    std::int64_t bin_width_ps = 4;
    /// Integration window per peak; 0 selects the whole clock period.
    std::int64_t window_ps = 0;
    int n_side_peaks = 10;
    /// Innermost side peak used for normalization; 0 selects 1 (HBT) or 2 (HOM).
    int min_side_peak = 0;
    /// g2(0) entering the multi-photon correction of the HOM visibility.
    double g2_for_correction = 0.0;
    bool fit_decay = true;
    DecayModel decay_model = DecayModel::mono;
    /// Fit start after the folded peak, in units of the detector jitter.
    double decay_start_jitters = 3.0;

    std::int64_t window_for(double period_ps) const;
    int min_side_for(BenchType type) const;
    /// Symmetric correlation range covering the outermost side peak.
    std::int64_t tau_half_span(double period_ps) const;
};

struct OutputConfig {
    std::string dir = "run";
    io::Format tag_format = io::Format::binary;
};

struct ExperimentConfig {
    std::string name = "custom";
    EmitterParams emitter;
    ExcitationConfig excitation;
    /// Excitation laser wavelength; recorded but without dynamical role.
    double excitation_wavelength_nm = 793.0;
    BenchConfig bench;
    DetectorParams detector_a;
    DetectorParams detector_b;
    AnalysisConfig analysis;
    EfficiencyChain chain = EfficiencyChain::paper_setup();
    OutputConfig output;

    /// Field-level and cross-field checks; throws ConfigError naming the field.
    void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Strict reader: unknown keys and wrong types are reported with their path.
ExperimentConfig config_from_json(const nlohmann::json& j);

ExperimentConfig load_config(const std::filesystem::path& path);

std::vector<std::string> preset_names();
bool is_preset(const std::string& name);
ExperimentConfig preset(const std::string& name);

/// A preset name or a JSON file path.
ExperimentConfig resolve_config(const std::string& name_or_path);

std::string to_string(BenchType t);
std::string to_string(DecayModel m);

}  // namespace qdtwin
