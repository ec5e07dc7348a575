#include "qdtwin/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <omp.h>

#include "qdtwin/error.hpp"
#include "qdtwin/io.hpp"
#include "qdtwin/rng.hpp"

#ifndef QDTWIN_VERSION
#define QDTWIN_VERSION "dev"
#endif

namespace qdtwin {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// The config as recorded in the manifest: the output location is not part of the run.
json data_config(const ExperimentConfig& cfg)
{
    json j = to_json(cfg);
    j["output"].erase("dir");
    return j;
}

// Only these sections determine the simulated tags.
json hashed_config(const ExperimentConfig& cfg)
{
    const json j = to_json(cfg);
    json h;
    for (const char* key : {"emitter", "excitation", "bench", "detectors"}) {
        h[key] = j.at(key);
    }
    return h;
}

json diag_json(const BenchDiagnostics& d)
{
    return {{"photons_in", d.photons_in},
            {"photons_port_a", d.photons_port_a},
            {"photons_port_b", d.photons_port_b},
            {"interfering_pairs", d.interfering_pairs},
            {"bunched_pairs", d.bunched_pairs},
            {"triples", d.triples},
            {"mean_overlap", d.mean_overlap()}};
}

BenchDiagnostics diag_from_json(const json& j)
{
    BenchDiagnostics d;
    d.photons_in = j.value("photons_in", std::uint64_t{0});
    d.photons_port_a = j.value("photons_port_a", std::uint64_t{0});
    d.photons_port_b = j.value("photons_port_b", std::uint64_t{0});
    d.interfering_pairs = j.value("interfering_pairs", std::uint64_t{0});
    d.bunched_pairs = j.value("bunched_pairs", std::uint64_t{0});
    d.triples = j.value("triples", std::uint64_t{0});
    d.overlap_sum = j.value("mean_overlap", 0.0) * static_cast<double>(d.interfering_pairs);
    return d;
}

BenchRun simulate_run(const ExperimentConfig& cfg, const std::string& label)
{
    ExcitationConfig exc = cfg.excitation;
    exc.seed = derive_seed(cfg.excitation.seed, "run." + label);
    const ExcitationSchedule schedule(exc);
    const EmissionStream stream = generate_stream(cfg.emitter, exc);

    BenchOutput out;
    if (cfg.bench.type == BenchType::hbt) {
        out = hbt_split(stream, cfg.detector_a, cfg.detector_b, schedule.duration_ps(), exc.seed);
    } else {
        HomConfig hom = cfg.bench.hom;
        hom.copolarized = label == "co";
        out = hom_bench(stream, hom, cfg.emitter.at_power(exc.power_ratio), cfg.detector_a, cfg.detector_b,
                        schedule.duration_ps(), exc.seed);
    }
    BenchRun run;
    run.label = label;
    run.a = std::move(out.a);
    run.b = std::move(out.b);
    run.a.channel = 0;
    run.b.channel = 1;
    run.diag = out.diag;
    run.emitted = stream.size();
    return run;
}

std::string tag_file_name(const std::string& label, char side, io::Format fmt)
{
    return label + "_" + side + (fmt == io::Format::binary ? ".qtt" : ".csv");
}

json read_json_file(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void check_hash(const io::TagFile& f, std::uint64_t expected, const fs::path& path, bool allow_mismatch)
{
    if (f.manifest_hash != expected && !allow_mismatch) {
        throw DataError(path.string() + ": manifest hash " + io::hash_hex(f.manifest_hash) +
                        " does not match the run (" + io::hash_hex(expected) + ")");
    }
}

json g2_json(const G2Result& g)
{
    return {{"g2_zero", g.g2_zero},
            {"stat_error", g.stat_error},
            {"window_ps", g.window_ps},
            {"side_peaks_used", g.side_peaks_used},
            {"center_counts", g.center_counts},
            {"side_mean", g.side_mean}};
}

}  // namespace

json decay_report(const DecayFitResult& r, double t_start)
{
    json j = {{"model", to_string(r.model)},
              {"t_start_ps", t_start},
              {"t1_fast_ps", r.t1_fast},
              {"t1_fast_err_ps", r.error_of("t1_fast")},
              {"amplitude", r.amplitude},
              {"baseline", r.baseline},
              {"reduced_deviance", r.reduced_deviance},
              {"iterations", r.iterations},
              {"bins_used", r.bins_used}};
    if (r.model == DecayModel::bi) {
        j["t1_slow_ps"] = *r.t1_slow;
        j["t1_slow_err_ps"] = r.error_of("t1_slow");
        j["slow_fraction"] = r.slow_fraction;
        j["slow_fraction_err"] = r.error_of("slow_fraction");
        j["effectively_mono"] = r.effectively_mono;
    }
    return j;
}

namespace {

template <class F>
void parallel_for(std::size_t n, int threads, F&& body)
{
    std::vector<std::exception_ptr> errors(n);
    const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for num_threads(nt) schedule(dynamic, 1)
    for (std::size_t i = 0; i < n; ++i) {
        try {
            body(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

}  // namespace

std::uint64_t manifest_hash(const ExperimentConfig& cfg)
{
    return fnv1a64(hashed_config(cfg).dump() + "|" + QDTWIN_VERSION);
}

std::vector<std::string> run_labels(BenchType type)
{
    if (type == BenchType::hbt) {
        return {"hbt"};
    }
    return {"co", "cross"};
}

json Simulation::manifest() const
{
    const PulseClock clock(config.excitation.rep_rate_hz);
    const ExcitationSchedule schedule(config.excitation);
    json runs_json = json::array();
    for (const auto& r : runs) {
        runs_json.push_back({{"label", r.label},
                             {"files",
                              {{"a", tag_file_name(r.label, 'a', config.output.tag_format)},
                               {"b", tag_file_name(r.label, 'b', config.output.tag_format)}}},
                             {"emitted_photons", r.emitted},
                             {"tags_a", r.a.tags.size()},
                             {"tags_b", r.b.tags.size()},
                             {"diagnostics", diag_json(r.diag)}});
    }
    return {{"qdtwin_version", QDTWIN_VERSION},
            {"manifest_hash", io::hash_hex(manifest_hash)},
            {"seed", config.excitation.seed},
            {"bench", to_string(config.bench.type)},
            {"rep_rate_hz", config.excitation.rep_rate_hz},
            {"period_ps", static_cast<std::int64_t>(std::llround(clock.period_ps()))},
            {"period_ps_exact", clock.period_ps()},
            {"duration_ps", schedule.duration_ps()},
            {"config", data_config(config)},
            {"runs", runs_json}};
}

Simulation simulate(const ExperimentConfig& cfg, int threads)
{
    cfg.validate();
    Simulation sim;
    sim.config = cfg;
    sim.manifest_hash = manifest_hash(cfg);
    const auto labels = run_labels(cfg.bench.type);
    sim.runs.resize(labels.size());
    parallel_for(labels.size(), threads, [&](std::size_t i) { sim.runs[i] = simulate_run(cfg, labels[i]); });
    return sim;
}

std::vector<fs::path> write_simulation(const Simulation& sim, const fs::path& dir)
{
    fs::create_directories(dir);
    std::vector<fs::path> written;
    const auto fmt = sim.config.output.tag_format;
    for (const auto& r : sim.runs) {
        for (const auto* s : {&r.a, &r.b}) {
            const fs::path p = dir / tag_file_name(r.label, s == &r.a ? 'a' : 'b', fmt);
            io::write_tags(p, {s}, sim.manifest_hash, fmt);
            written.push_back(p);
        }
    }
    const fs::path m = dir / "manifest.json";
    std::ofstream out(m, std::ios::trunc);
    out << sim.manifest().dump(2) << '\n';
    if (!out) {
        throw DataError("cannot write " + m.string());
    }
    written.push_back(m);
    return written;
}

Simulation read_simulation(const fs::path& dir, bool allow_mismatch)
{
    const json manifest = read_json_file(dir / "manifest.json");
    if (!manifest.contains("config") || !manifest.contains("runs")) {
        throw DataError((dir / "manifest.json").string() + ": missing config or runs");
    }
    Simulation sim;
    sim.config = config_from_json(manifest["config"]);
    sim.manifest_hash = manifest_hash(sim.config);
    if (manifest.value("manifest_hash", std::string()) != io::hash_hex(sim.manifest_hash) && !allow_mismatch) {
        throw DataError((dir / "manifest.json").string() + ": recorded hash does not match its config");
    }
    std::optional<io::Format> seen_format;
    for (const auto& rj : manifest["runs"]) {
        BenchRun run;
        run.label = rj.at("label").get<std::string>();
        run.emitted = rj.value("emitted_photons", std::uint64_t{0});
        if (rj.contains("diagnostics")) {
            run.diag = diag_from_json(rj["diagnostics"]);
        }
        for (char side : {'a', 'b'}) {
            const fs::path p = dir / rj.at("files").at(std::string(1, side)).get<std::string>();
            io::TagFile f = io::read_tags(p);
            if (seen_format && *seen_format != f.format) {
                throw DataError(p.string() + ": mixed tag-file formats in one run");
            }
            seen_format = f.format;
            check_hash(f, sim.manifest_hash, p, allow_mismatch);
            TimeTagStream s = f.channel(side == 'a' ? 0 : 1);
            (side == 'a' ? run.a : run.b) = std::move(s);
        }
        sim.runs.push_back(std::move(run));
    }
    const auto labels = run_labels(sim.config.bench.type);
    if (sim.runs.size() != labels.size()) {
        throw DataError("manifest lists " + std::to_string(sim.runs.size()) + " runs, bench needs " +
                        std::to_string(labels.size()));
    }
    return sim;
}

Simulation simulation_from_tags(const ExperimentConfig& cfg, const std::vector<fs::path>& files, bool allow_mismatch)
{
    cfg.validate();
    Simulation sim;
    sim.config = cfg;
    sim.manifest_hash = manifest_hash(cfg);
    const auto labels = run_labels(cfg.bench.type);

    std::vector<io::TagFile> loaded;
    for (const auto& p : files) {
        loaded.push_back(io::read_tags(p));
        if (loaded.back().format != loaded.front().format) {
            throw DataError(p.string() + ": mixed tag-file formats");
        }
        check_hash(loaded.back(), sim.manifest_hash, p, allow_mismatch);
    }
    auto only_channel = [&](std::size_t i) {
        if (loaded[i].channels.size() != 1) {
            throw DataError(files[i].string() + ": expected exactly one channel");
        }
        TimeTagStream s = loaded[i].channels.front();
        s.duration_ps = loaded[i].duration_ps;
        return s;
    };
    for (std::size_t r = 0; r < labels.size(); ++r) {
        BenchRun run;
        run.label = labels[r];
        if (files.size() == labels.size()) {
            run.a = loaded[r].channel(0);
            run.b = loaded[r].channel(1);
        } else if (files.size() == 2 * labels.size()) {
            run.a = only_channel(2 * r);
            run.b = only_channel(2 * r + 1);
        } else {
            throw DataError("bench " + to_string(cfg.bench.type) + " needs " + std::to_string(2 * labels.size()) +
                            " single-channel tag files");
        }
        run.a.channel = 0;
        run.b.channel = 1;
        sim.runs.push_back(std::move(run));
    }
    return sim;
}

Analysis analyze(const Simulation& sim, const AnalysisConfig& analysis, int threads)
{
    const ExperimentConfig& cfg = sim.config;
    const PulseClock clock(cfg.excitation.rep_rate_hz);
    const double period = clock.period_ps();
    const std::int64_t window = analysis.window_for(period);
    if (static_cast<double>(window) > period) {
        throw DomainError("analysis.window_ps: exceeds the clock period");
    }
    const std::int64_t span = analysis.tau_half_span(period);
    const int min_side = analysis.min_side_for(cfg.bench.type);

    Analysis out;
    json& rep = out.report;
    rep["manifest_hash"] = io::hash_hex(sim.manifest_hash);
    rep["config_name"] = cfg.name;
    rep["bench"] = to_string(cfg.bench.type);
    rep["rep_rate_hz"] = cfg.excitation.rep_rate_hz;
    rep["period_ps"] = static_cast<std::int64_t>(std::llround(period));
    rep["period_ps_exact"] = period;
    rep["bin_width_ps"] = analysis.bin_width_ps;
    for (const auto& r : sim.runs) {
        rep["singles"][r.label] = {{"a", r.a.tags.size()}, {"b", r.b.tags.size()}};
        if (r.a.tags.empty() || r.b.tags.empty()) {
            throw DataError("run '" + r.label + "' has an empty tag stream");
        }
    }

    auto correlate = [&](const BenchRun& r) {
        return cross_correlate(r.a, r.b, analysis.bin_width_ps, -span, span, threads);
    };

    if (cfg.bench.type == BenchType::hbt) {
        const BenchRun& run = sim.runs.front();
        CorrelationHistogram hist = correlate(run);
        rep["g2"] = g2_json(g2_zero(hist, period, window, analysis.n_side_peaks, min_side));
        out.correlations.emplace_back("g2_histogram.csv", std::move(hist));

        if (analysis.fit_decay) {
            // Jitter moves some clicks before their pulse; fold with a pre-trigger
            // margin so they do not wrap into the end of the previous period.
            const double jitter = std::max(cfg.detector_a.jitter_sigma_ps, cfg.detector_b.jitter_sigma_ps);
            const std::int64_t bw = analysis.bin_width_ps;
            const std::int64_t pre = static_cast<std::int64_t>(std::ceil(5.0 * jitter / static_cast<double>(bw))) * bw;
            const std::int64_t fold_span = static_cast<std::int64_t>(std::floor(period)) / bw * bw;
            auto shifted = [pre](const TimeTagStream& s) {
                std::vector<std::int64_t> t(s.tags.size());
                std::transform(s.tags.begin(), s.tags.end(), t.begin(), [pre](std::int64_t x) { return x + pre; });
                return t;
            };
            FoldedHistogram trace = fold_parallel(shifted(run.a), clock, bw, fold_span, threads);
            const FoldedHistogram tb = fold_parallel(shifted(run.b), clock, bw, fold_span, threads);
            for (std::size_t i = 0; i < trace.counts.size(); ++i) {
                trace.counts[i] += tb.counts[i];
            }
            DecayHistogram h;
            h.t0_ps = -pre;
            h.bin_width_ps = bw;
            h.counts.assign(trace.counts.begin(), trace.counts.end());
            const auto peak = static_cast<std::size_t>(
                std::max_element(trace.counts.begin(), trace.counts.end()) - trace.counts.begin());
            DecayFitOptions opt;
            opt.model = analysis.decay_model;
            opt.t_start_ps = h.bin_center(peak) + analysis.decay_start_jitters * jitter;
            rep["decay"] = decay_report(fit_decay(h, opt), opt.t_start_ps);
            rep["decay"]["pre_trigger_ps"] = pre;
            out.decay_trace = std::move(trace);
            out.decay_t0_ps = -pre;
        }
    } else {
        const BenchRun* co = nullptr;
        const BenchRun* cross = nullptr;
        for (const auto& r : sim.runs) {
            (r.label == "co" ? co : cross) = &r;
        }
        CorrelationHistogram hco = correlate(*co);
        CorrelationHistogram hcross = correlate(*cross);
        const VisibilityResult v =
            hom_visibility(hco, hcross, period, window, analysis.n_side_peaks, min_side);
        const CorrectedVisibility vc = correct_visibility(std::clamp(v.v.value, -1.0, 1.0),
                                                          analysis.g2_for_correction);
        rep["visibility"] = {{"v", v.v.value},
                             {"v_err", v.v.err},
                             {"v_corr", vc.value},
                             {"v_corr_err", (1.0 + 2.0 * analysis.g2_for_correction) * v.v.err},
                             {"v_corr_clamped", vc.clamped},
                             {"g2_for_correction", analysis.g2_for_correction},
                             {"area_co", v.area_co},
                             {"area_cross", v.area_cross},
                             {"norm_co", v.norm_co},
                             {"norm_cross", v.norm_cross},
                             {"window_ps", window},
                             {"min_side_peak", min_side}};
        rep["cross_center_ratio"] =
            g2_json(g2_zero(hcross, period, window, analysis.n_side_peaks, min_side));
        rep["diagnostics"] = {{"co", diag_json(co->diag)}, {"cross", diag_json(cross->diag)}};
        out.correlations.emplace_back("hom_co_histogram.csv", std::move(hco));
        out.correlations.emplace_back("hom_cross_histogram.csv", std::move(hcross));
    }
    return out;
}

std::vector<fs::path> write_analysis(const Analysis& a, std::uint64_t hash, const fs::path& dir, bool csv_report)
{
    fs::create_directories(dir);
    std::vector<fs::path> written;
    const fs::path rp = dir / (csv_report ? "report.csv" : "report.json");
    std::ofstream out(rp, std::ios::trunc);
    out << (csv_report ? report_csv(a.report) : a.report.dump(2) + "\n");
    if (!out) {
        throw DataError("cannot write " + rp.string());
    }
    written.push_back(rp);
    for (const auto& [name, hist] : a.correlations) {
        io::write_histogram_csv(dir / name, hist, hash);
        written.push_back(dir / name);
    }
    if (a.decay_trace) {
        io::write_folded_csv(dir / "decay_histogram.csv", *a.decay_trace, hash, a.decay_t0_ps);
        written.push_back(dir / "decay_histogram.csv");
    }
    return written;
}

std::string report_csv(const json& report)
{
    std::ostringstream os;
    os << "key,value\n";
    const json flat = report.flatten();
    for (auto it = flat.begin(); it != flat.end(); ++it) {
        os << it.key() << ',' << (it->is_string() ? it->get<std::string>() : it->dump()) << '\n';
    }
    return os.str();
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const std::string& parameter,
                                const std::vector<std::string>& values, int n_seeds, int threads)
{
    if (n_seeds < 1) {
        throw ConfigError("sweep.seeds: must be at least 1");
    }
    if (values.empty()) {
        throw ConfigError("sweep.values: at least one value required");
    }
    std::string ptr_text = "/" + parameter;
    std::replace(ptr_text.begin(), ptr_text.end(), '.', '/');
    const json::json_pointer ptr(ptr_text);
    const json base_json = data_config(base);
    if (!base_json.contains(ptr) || base_json.at(ptr).is_structured()) {
        throw ConfigError("sweep.parameter: '" + parameter + "' is not a config field");
    }

    const std::size_t n = values.size() * static_cast<std::size_t>(n_seeds);
    std::vector<std::vector<SweepRow>> results(n);
    parallel_for(n, threads, [&](std::size_t idx) {
        const std::size_t vi = idx / static_cast<std::size_t>(n_seeds);
        const int si = static_cast<int>(idx % static_cast<std::size_t>(n_seeds));
        json j = base_json;
        json value;
        try {
            value = json::parse(values[vi]);
        } catch (const json::parse_error&) {
            value = values[vi];
        }
        j[ptr] = value;
        ExperimentConfig cfg = config_from_json(j);
        cfg.excitation.seed = derive_seed(base.excitation.seed, "sweep", static_cast<std::uint64_t>(si));

        const Simulation sim = simulate(cfg, 1);
        AnalysisConfig an = cfg.analysis;
        an.fit_decay = false;
        const json rep = analyze(sim, an, 1).report;

        auto add = [&](const std::string& metric, double v) {
            results[idx].push_back({parameter, values[vi], si, cfg.excitation.seed, metric, v});
        };
        if (cfg.bench.type == BenchType::hbt) {
            add("g2_zero", rep["g2"]["g2_zero"].get<double>());
            add("g2_stat_error", rep["g2"]["stat_error"].get<double>());
            add("singles_a", rep["singles"]["hbt"]["a"].get<double>());
            add("singles_b", rep["singles"]["hbt"]["b"].get<double>());
        } else {
            const auto& v = rep["visibility"];
            add("v", v["v"].get<double>());
            add("v_err", v["v_err"].get<double>());
            add("v_corr", v["v_corr"].get<double>());
            add("cross_center_ratio", rep["cross_center_ratio"]["g2_zero"].get<double>());
            add("mean_overlap", rep["diagnostics"]["co"]["mean_overlap"].get<double>());
            add("interfering_pairs", rep["diagnostics"]["co"]["interfering_pairs"].get<double>());
            add("triples", rep["diagnostics"]["co"]["triples"].get<double>());
        }
    });

    std::vector<SweepRow> rows;
    for (auto& r : results) {
        rows.insert(rows.end(), r.begin(), r.end());
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows)
{
    std::ostringstream os;
    os << std::setprecision(17);
    os << "parameter,value,seed_index,seed,metric,metric_value\n";
    for (const auto& r : rows) {
        os << r.parameter << ',' << r.value << ',' << r.seed_index << ',' << r.seed << ',' << r.metric << ','
           << r.metric_value << '\n';
    }
    return os.str();
}

json budget_report(const std::vector<CountrateObservation>& observations, const EfficiencyChain& chain,
                   BudgetMethod method, std::size_t mc_samples, std::uint64_t seed)
{
    json stages = json::array();
    for (const auto& s : chain.stages()) {
        stages.push_back({{"name", s.name}, {"efficiency", s.efficiency}, {"abs_uncertainty", s.abs_uncertainty}});
    }
    json rows = json::array();
    bool any_inconsistent = false;
    for (std::size_t i = 0; i < observations.size(); ++i) {
        const auto& obs = observations[i];
        const Measured eta = overall_efficiency(obs);
        const SourceEfficiency src = infer_source_efficiency(eta, chain);
        Measured eta_src = src.eta;
        if (method == BudgetMethod::monte_carlo) {
            eta_src = infer_source_efficiency_mc(eta, chain, mc_samples, derive_seed(seed, "budget.row", i));
        }
        any_inconsistent = any_inconsistent || src.inconsistent;
        rows.push_back({{"label", obs.label},
                        {"rate_cps", obs.rate_cps},
                        {"rate_uncertainty", obs.rate_uncertainty},
                        {"rep_rate_hz", obs.rep_rate_hz},
                        {"eta_overall", eta.value},
                        {"eta_overall_err", eta.err},
                        {"eta_source", eta_src.value},
                        {"eta_source_err", eta_src.err},
                        {"inconsistent", src.inconsistent}});
    }
    return {{"method", method == BudgetMethod::quadrature ? "quadrature" : "monte-carlo"},
            {"stages", stages},
            {"chain_product", chain.product()},
            {"chain_relative_uncertainty", chain.relative_uncertainty()},
            {"rows", rows},
            {"warning", any_inconsistent ? "source efficiency above 1: chain under-counts losses" : ""}};
}

json fano_report(const FanoFitResult& r)
{
    const Eigen::Matrix2d cov = r.covariance.topLeftCorner<2, 2>();
    const Measured q = q_factor(r.params.lambda_m, r.params.w_m, cov);
    return {{"lambda_m_nm", r.params.lambda_m},
            {"lambda_m_err_nm", r.lambda_m().err},
            {"w_m_nm", r.params.w_m},
            {"w_m_err_nm", r.w_m().err},
            {"q", r.params.q},
            {"q_err", r.q().err},
            {"amplitude", r.params.amplitude},
            {"background", r.params.background},
            {"quality_factor", q.value},
            {"quality_factor_err", q.err},
            {"chi2", r.chi2},
            {"reduced_chi2", r.reduced_chi2},
            {"iterations", r.iterations}};
}

}  // namespace qdtwin
