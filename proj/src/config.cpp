#include "qdtwin/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "qdtwin/error.hpp"

namespace qdtwin {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering consumed keys so leftovers can be
// reported as unknown fields.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) {
            throw ConfigError(path_ + ": expected an object");
        }
    }

    template <class T>
    void read(const char* key, T& out)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) {
            return;
        }
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!it->is_boolean()) {
                    throw ConfigError("");
                }
            } else if constexpr (std::is_integral_v<T>) {
                if (!it->is_number_integer()) {
                    if (!it->is_number() || it->template get<double>() != std::floor(it->template get<double>())) {
                        throw ConfigError("");
                    }
                }
                if constexpr (std::is_unsigned_v<T>) {
                    if (it->is_number_integer() && !it->is_number_unsigned()) {
                        throw ConfigError("");
                    }
                }
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!it->is_number()) {
                    throw ConfigError("");
                }
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!it->is_string()) {
                    throw ConfigError("");
                }
            }
            out = it->template get<T>();
        } catch (const std::exception&) {
            throw ConfigError(field(key) + ": wrong type (" + std::string(it->type_name()) + ")");
        }
    }

    const json* child(const char* key)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) {
                throw ConfigError(field(it.key()) + ": unknown field");
            }
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

DetectorParams read_detector(const json& j, const std::string& path)
{
    DetectorParams d;
    Section s(j, path);
    s.read("efficiency", d.efficiency);
    s.read("jitter_sigma_ps", d.jitter_sigma_ps);
    s.read("dead_time_ps", d.dead_time_ps);
    s.read("dark_rate_hz", d.dark_rate_hz);
    s.finish();
    return d;
}

json detector_json(const DetectorParams& d)
{
    return {{"efficiency", d.efficiency},
            {"jitter_sigma_ps", d.jitter_sigma_ps},
            {"dead_time_ps", d.dead_time_ps},
            {"dark_rate_hz", d.dark_rate_hz}};
}

DecayModel parse_decay_model(const std::string& s, const std::string& field)
{
    if (s == "mono") {
        return DecayModel::mono;
    }
    if (s == "bi") {
        return DecayModel::bi;
    }
    throw ConfigError(field + ": expected mono or bi, got '" + s + "'");
}

// One emitter describes the device in every preset; only the drive and the
// bench differ between scenarios.
EmitterParams device_emitter()
{
    EmitterParams e;
    e.t1_fast_ps = 77.0;
    e.t1_slow_ps = 650.0;
    e.slow_fraction = 0.023;
    e.dephasing_rate = 0.0;
    e.dephasing_power_coeff = 0.003247;
    e.sd_sigma = 0.00733;
    e.sd_tau_c_ns = 80.0;
    e.p_multi = 0.0014;
    e.p_sat_exponent = 1.0;
    return e;
}

DetectorParams snspd()
{
    DetectorParams d;
    d.efficiency = 0.85;
    d.jitter_sigma_ps = 20.0;
    d.dead_time_ps = 0.0;
    d.dark_rate_hz = 50.0;
    return d;
}

ExperimentConfig base_preset(const std::string& name)
{
    ExperimentConfig c;
    c.name = name;
    c.emitter = device_emitter();
    c.excitation.rep_rate_hz = 80e6;
    c.excitation.power_ratio = 0.5;
    c.excitation.seed = 20240101;
    c.detector_a = snspd();
    c.detector_b = snspd();
    c.output.dir = "runs/" + name;
    return c;
}

}  // namespace

std::string to_string(BenchType t) { return t == BenchType::hbt ? "hbt" : "hom"; }
std::string to_string(DecayModel m) { return m == DecayModel::mono ? "mono" : "bi"; }

std::int64_t AnalysisConfig::window_for(double period_ps) const
{
    return window_ps > 0 ? window_ps : static_cast<std::int64_t>(std::floor(period_ps));
}

int AnalysisConfig::min_side_for(BenchType type) const
{
    if (min_side_peak > 0) {
        return min_side_peak;
    }
    return type == BenchType::hbt ? 1 : 2;
}

std::int64_t AnalysisConfig::tau_half_span(double period_ps) const
{
    const double reach = (n_side_peaks + 0.5) * period_ps + static_cast<double>(window_for(period_ps));
    const auto bins = static_cast<std::int64_t>(std::ceil(reach / static_cast<double>(bin_width_ps)));
    return bins * bin_width_ps;
}

void ExperimentConfig::validate() const
{
    emitter.validate();
    excitation.validate();
    detector_a.validate("detectors.a");
    detector_b.validate("detectors.b");
    if (!(excitation_wavelength_nm > 0.0)) {
        throw ConfigError("excitation.wavelength_nm: must be positive");
    }
    const double period = 1e12 / excitation.rep_rate_hz;
    if (excitation.doublet && static_cast<double>(excitation.doublet_spacing_ps) >= period) {
        throw ConfigError("excitation.doublet_spacing_ps: must be shorter than the clock period");
    }
    if (bench.type == BenchType::hom) {
        bench.hom.validate();
    }
    if (analysis.bin_width_ps <= 0) {
        throw ConfigError("analysis.bin_width_ps: must be positive");
    }
    if (analysis.window_ps < 0) {
        throw ConfigError("analysis.window_ps: must be non-negative");
    }
    if (static_cast<double>(analysis.window_for(period)) > period) {
        throw ConfigError("analysis.window_ps: exceeds the clock period");
    }
    if (analysis.n_side_peaks < 1) {
        throw ConfigError("analysis.n_side_peaks: must be at least 1");
    }
    if (analysis.min_side_peak < 0 || analysis.min_side_for(bench.type) > analysis.n_side_peaks) {
        throw ConfigError("analysis.min_side_peak: must lie in [1, n_side_peaks]");
    }
    if (!(analysis.g2_for_correction >= 0.0) || !std::isfinite(analysis.g2_for_correction)) {
        throw ConfigError("analysis.g2_for_correction: must be finite and non-negative");
    }
    if (!(analysis.decay_start_jitters >= 0.0)) {
        throw ConfigError("analysis.decay_start_jitters: must be non-negative");
    }
    if (output.dir.empty()) {
        throw ConfigError("output.dir: must not be empty");
    }
}

json to_json(const ExperimentConfig& c)
{
    json j;
    j["name"] = c.name;
    const auto& e = c.emitter;
    j["emitter"] = {{"t1_fast_ps", e.t1_fast_ps},
                    {"t1_slow_ps", e.t1_slow_ps},
                    {"slow_fraction", e.slow_fraction},
                    {"dephasing_rate", e.dephasing_rate},
                    {"dephasing_power_coeff", e.dephasing_power_coeff},
                    {"sd_sigma", e.sd_sigma},
                    {"sd_tau_c_ns", e.sd_tau_c_ns},
                    {"p_multi", e.p_multi},
                    {"p_sat_exponent", e.p_sat_exponent}};
    const auto& x = c.excitation;
    j["excitation"] = {{"rep_rate_hz", x.rep_rate_hz},
                       {"n_pulses", x.n_pulses},
                       {"power_ratio", x.power_ratio},
                       {"seed", x.seed},
                       {"doublet", x.doublet},
                       {"doublet_spacing_ps", x.doublet_spacing_ps},
                       {"wavelength_nm", c.excitation_wavelength_nm}};
    j["bench"] = {{"type", to_string(c.bench.type)}};
    if (c.bench.type == BenchType::hom) {
        j["bench"]["delay_ps"] = c.bench.hom.delay_ps;
        j["bench"]["coincidence_gate_ps"] = c.bench.hom.coincidence_gate_ps;
    }
    j["detectors"] = {{"a", detector_json(c.detector_a)}, {"b", detector_json(c.detector_b)}};
    const auto& a = c.analysis;
    j["analysis"] = {{"bin_width_ps", a.bin_width_ps},
                     {"window_ps", a.window_ps},
                     {"n_side_peaks", a.n_side_peaks},
                     {"min_side_peak", a.min_side_peak},
                     {"g2_for_correction", a.g2_for_correction},
                     {"fit_decay", a.fit_decay},
                     {"decay_model", to_string(a.decay_model)},
                     {"decay_start_jitters", a.decay_start_jitters}};
    json stages = json::array();
    for (const auto& s : c.chain.stages()) {
        stages.push_back({{"name", s.name}, {"efficiency", s.efficiency}, {"abs_uncertainty", s.abs_uncertainty}});
    }
    j["budget"] = {{"chain", stages}};
    j["output"] = {{"dir", c.output.dir}, {"tag_format", c.output.tag_format == io::Format::binary ? "binary" : "csv"}};
    return j;
}

ExperimentConfig config_from_json(const json& j)
{
    ExperimentConfig c;
    Section root(j, "");
    root.read("name", c.name);

    if (const json* e = root.child("emitter")) {
        Section s(*e, "emitter");
        s.read("t1_fast_ps", c.emitter.t1_fast_ps);
        c.emitter.t1_slow_ps = c.emitter.t1_fast_ps;
        s.read("t1_slow_ps", c.emitter.t1_slow_ps);
        s.read("slow_fraction", c.emitter.slow_fraction);
        s.read("dephasing_rate", c.emitter.dephasing_rate);
        s.read("dephasing_power_coeff", c.emitter.dephasing_power_coeff);
        s.read("sd_sigma", c.emitter.sd_sigma);
        s.read("sd_tau_c_ns", c.emitter.sd_tau_c_ns);
        s.read("p_multi", c.emitter.p_multi);
        s.read("p_sat_exponent", c.emitter.p_sat_exponent);
        s.finish();
    }
    if (const json* x = root.child("excitation")) {
        Section s(*x, "excitation");
        s.read("rep_rate_hz", c.excitation.rep_rate_hz);
        s.read("n_pulses", c.excitation.n_pulses);
        s.read("power_ratio", c.excitation.power_ratio);
        s.read("seed", c.excitation.seed);
        s.read("doublet", c.excitation.doublet);
        s.read("doublet_spacing_ps", c.excitation.doublet_spacing_ps);
        s.read("wavelength_nm", c.excitation_wavelength_nm);
        s.finish();
    }
    if (const json* b = root.child("bench")) {
        Section s(*b, "bench");
        std::string type = "hbt";
        s.read("type", type);
        if (type == "hbt") {
            c.bench.type = BenchType::hbt;
        } else if (type == "hom") {
            c.bench.type = BenchType::hom;
            s.read("delay_ps", c.bench.hom.delay_ps);
            s.read("coincidence_gate_ps", c.bench.hom.coincidence_gate_ps);
        } else {
            throw ConfigError("bench.type: expected hbt or hom, got '" + type + "'");
        }
        s.finish();
    }
    if (const json* d = root.child("detectors")) {
        Section s(*d, "detectors");
        if (const json* a = s.child("a")) {
            c.detector_a = read_detector(*a, "detectors.a");
        }
        if (const json* b = s.child("b")) {
            c.detector_b = read_detector(*b, "detectors.b");
        }
        s.finish();
    }
    if (const json* a = root.child("analysis")) {
        Section s(*a, "analysis");
        s.read("bin_width_ps", c.analysis.bin_width_ps);
        s.read("window_ps", c.analysis.window_ps);
        s.read("n_side_peaks", c.analysis.n_side_peaks);
        s.read("min_side_peak", c.analysis.min_side_peak);
        s.read("g2_for_correction", c.analysis.g2_for_correction);
        s.read("fit_decay", c.analysis.fit_decay);
        std::string model = to_string(c.analysis.decay_model);
        s.read("decay_model", model);
        c.analysis.decay_model = parse_decay_model(model, "analysis.decay_model");
        s.read("decay_start_jitters", c.analysis.decay_start_jitters);
        s.finish();
    }
    if (const json* b = root.child("budget")) {
        Section s(*b, "budget");
        if (const json* chain = s.child("chain")) {
            if (!chain->is_array()) {
                throw ConfigError("budget.chain: expected an array");
            }
            std::vector<EfficiencyStage> stages;
            for (std::size_t i = 0; i < chain->size(); ++i) {
                const std::string path = "budget.chain[" + std::to_string(i) + "]";
                Section st((*chain)[i], path);
                EfficiencyStage stage;
                st.read("name", stage.name);
                st.read("efficiency", stage.efficiency);
                st.read("abs_uncertainty", stage.abs_uncertainty);
                st.finish();
                if (!(stage.efficiency > 0.0 && stage.efficiency <= 1.0)) {
                    throw ConfigError(path + ".efficiency: must lie in (0, 1]");
                }
                if (!(stage.abs_uncertainty >= 0.0)) {
                    throw ConfigError(path + ".abs_uncertainty: must be non-negative");
                }
                stages.push_back(stage);
            }
            c.chain = EfficiencyChain(std::move(stages));
        }
        s.finish();
    }
    if (const json* o = root.child("output")) {
        Section s(*o, "output");
        s.read("dir", c.output.dir);
        std::string fmt = "binary";
        s.read("tag_format", fmt);
        try {
            c.output.tag_format = io::parse_format(fmt);
        } catch (const ConfigError&) {
            throw ConfigError("output.tag_format: expected binary or csv, got '" + fmt + "'");
        }
        s.finish();
    }
    root.finish();
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config " + path.string());
    }
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

std::vector<std::string> preset_names()
{
    return {"paper-80mhz", "paper-ghz", "paper-hom-2ns", "paper-hom-12ns"};
}

bool is_preset(const std::string& name)
{
    const auto names = preset_names();
    return std::find(names.begin(), names.end(), name) != names.end();
}

ExperimentConfig preset(const std::string& name)
{
    ExperimentConfig c = base_preset(name);
    if (name == "paper-80mhz") {
        c.excitation.n_pulses = 10'000'000;
        c.analysis.window_ps = 12500;
        c.analysis.decay_model = DecayModel::bi;
    } else if (name == "paper-ghz") {
        c.excitation.rep_rate_hz = 1.28e9;
        c.excitation.n_pulses = 40'000'000;
        c.analysis.window_ps = 781;
        c.analysis.fit_decay = false;
    } else if (name == "paper-hom-2ns") {
        c.excitation.n_pulses = 2'000'000;
        c.excitation.doublet = true;
        c.excitation.doublet_spacing_ps = 2000;
        c.bench.type = BenchType::hom;
        c.bench.hom.delay_ps = 2000;
        c.analysis.window_ps = 1200;
        c.analysis.g2_for_correction = 0.028;
        c.analysis.fit_decay = false;
    } else if (name == "paper-hom-12ns") {
        c.excitation.n_pulses = 2'000'000;
        c.bench.type = BenchType::hom;
        c.bench.hom.delay_ps = 12500;
        c.analysis.window_ps = 1200;
        c.analysis.g2_for_correction = 0.028;
        c.analysis.fit_decay = false;
    } else {
        throw ConfigError("config: unknown preset '" + name + "'");
    }
    c.validate();
    return c;
}

ExperimentConfig resolve_config(const std::string& name_or_path)
{
    if (is_preset(name_or_path)) {
        return preset(name_or_path);
    }
    if (!std::filesystem::exists(name_or_path)) {
        throw ConfigError("config: '" + name_or_path + "' is neither a preset nor a file");
    }
    return load_config(name_or_path);
}

}  // namespace qdtwin
