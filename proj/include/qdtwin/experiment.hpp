#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdtwin/bench.hpp"
#include "qdtwin/budget.hpp"
#include "qdtwin/config.hpp"
#include "qdtwin/correlator.hpp"
#include "qdtwin/fitting.hpp"
#include "qdtwin/timetag.hpp"

namespace qdtwin {

/// One acquisition: a single HBT run, or the co / cross half of a HOM pair.
struct BenchRun {
    std::string label;
    TimeTagStream a;
    TimeTagStream b;
    BenchDiagnostics diag;
    std::uint64_t emitted = 0;
};

struct Simulation {
    ExperimentConfig config;
    std::uint64_t manifest_hash = 0;
    std::vector<BenchRun> runs;

    nlohmann::json manifest() const;
};

/// Hash of the sections that determine the simulated data: emitter,
/// excitation, bench and detectors. Analysis and output settings are excluded.
std::uint64_t manifest_hash(const ExperimentConfig& cfg);

/// Runs labels of a bench type: {"hbt"} or {"co", "cross"}.
std::vector<std::string> run_labels(BenchType type);

/// Independent runs execute concurrently on `threads`; results do not depend on it.
Simulation simulate(const ExperimentConfig& cfg, int threads = 1);

/// Writes <label>_a/_b tag files and manifest.json; returns the written paths.
std::vector<std::filesystem::path> write_simulation(const Simulation& sim, const std::filesystem::path& dir);

/// Reads a run directory. Tag files whose embedded hash differs from the
/// manifest raise DataError unless `allow_mismatch`.
Simulation read_simulation(const std::filesystem::path& dir, bool allow_mismatch = false);

/// Tag files given explicitly, checked against the hash of `cfg`.
Simulation simulation_from_tags(const ExperimentConfig& cfg, const std::vector<std::filesystem::path>& files,
                                bool allow_mismatch = false);

struct Analysis {
    nlohmann::json report;
    /// (file name, histogram) pairs for export.
    std::vector<std::pair<std::string, CorrelationHistogram>> correlations;
    std::optional<FoldedHistogram> decay_trace;
    /// Time of the first trace bin relative to the laser pulse.
    std::int64_t decay_t0_ps = 0;
};

Analysis analyze(const Simulation& sim, const AnalysisConfig& analysis, int threads = 1);

/// report.json (or report.csv) plus histogram CSVs into `dir`.
std::vector<std::filesystem::path> write_analysis(const Analysis& a, std::uint64_t manifest_hash,
                                                  const std::filesystem::path& dir, bool csv_report);

/// JSON object flattened to "key,value" lines, keys as JSON pointers.
std::string report_csv(const nlohmann::json& report);

struct SweepRow {
    std::string parameter;
    std::string value;
    int seed_index = 0;
    std::uint64_t seed = 0;
    std::string metric;
    double metric_value = 0.0;
};

/// Simulates and analyses `base` with `parameter` (dotted config path) set to
/// each value, for `n_seeds` derived seeds per value.
std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const std::string& parameter,
                                const std::vector<std::string>& values, int n_seeds, int threads = 1);

std::string sweep_csv(const std::vector<SweepRow>& rows);

enum class BudgetMethod { quadrature, monte_carlo };

/// Per-observation overall and in-fibre source efficiencies.
nlohmann::json budget_report(const std::vector<CountrateObservation>& observations, const EfficiencyChain& chain,
                             BudgetMethod method = BudgetMethod::quadrature, std::size_t mc_samples = 100000,
                             std::uint64_t seed = 1);

nlohmann::json decay_report(const DecayFitResult& r, double t_start_ps);
nlohmann::json fano_report(const FanoFitResult& r);

}  // namespace qdtwin
