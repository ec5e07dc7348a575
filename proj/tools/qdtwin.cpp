// qdtwin: simulate and analyse a pulsed quantum-dot single-photon source.
//
// Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numerical failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include "qdtwin/budget.hpp"
#include "qdtwin/config.hpp"
#include "qdtwin/error.hpp"
#include "qdtwin/experiment.hpp"
#include "qdtwin/fitting.hpp"
#include "qdtwin/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qdtwin;

namespace {

enum Exit { ok = 0, config_error = 2, data_error = 3, numerical_error = 4, internal_error = 1 };

void emit(const std::string& text, const std::string& out)
{
    if (out.empty() || out == "-") {
        std::cout << text;
        return;
    }
    if (fs::path(out).has_parent_path()) {
        fs::create_directories(fs::path(out).parent_path());
    }
    std::ofstream f(out, std::ios::trunc);
    f << text;
    if (!f) {
        throw DataError("cannot write " + out);
    }
}

std::string render(const json& j, const std::string& format)
{
    return format == "csv" ? report_csv(j) : j.dump(2) + "\n";
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Digital twin of a fibre-pigtailed quantum-dot single-photon source"};
    app.require_subcommand(1);
    app.set_version_flag("--version", QDTWIN_VERSION);

    int threads = 1;
    std::string format = "json";
    app.add_option("--threads", threads, "Worker threads (results do not depend on it)")
        ->check(CLI::PositiveNumber);
    app.add_option("--format", format, "Report format")->check(CLI::IsMember({"json", "csv"}));

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Simulate a bench run and write tag files + manifest");
    std::string sim_config;
    std::optional<std::uint64_t> sim_seed;
    std::optional<std::uint64_t> sim_pulses;
    std::string sim_out;
    std::string sim_tag_format;
    sim_cmd->add_option("--config", sim_config, "Preset name or JSON config path")->required();
    sim_cmd->add_option("--seed", sim_seed, "Override excitation.seed");
    sim_cmd->add_option("--pulses", sim_pulses, "Override excitation.n_pulses");
    sim_cmd->add_option("--out", sim_out, "Run directory (default: output.dir)");
    sim_cmd->add_option("--tag-format", sim_tag_format, "Tag file format")
        ->check(CLI::IsMember({"binary", "csv"}));

    // analyze
    auto* an_cmd = app.add_subcommand("analyze", "Correlate tag files and extract g2(0) or the HOM visibility");
    std::string an_run;
    std::string an_config;
    std::vector<std::string> an_tags;
    std::string an_out;
    bool an_allow = false;
    an_cmd->add_option("run", an_run, "Run directory written by simulate");
    an_cmd->add_option("--config", an_config, "Config of explicitly given tag files (overrides analysis of a run)");
    an_cmd->add_option("--tags", an_tags, "Tag files: a b (HBT) or co_a co_b cross_a cross_b (HOM)");
    an_cmd->add_option("--out", an_out, "Report directory (default: the run directory)");
    an_cmd->add_flag("--allow-manifest-mismatch", an_allow, "Accept tag files from a different manifest");

    // fit-decay
    auto* fd_cmd = app.add_subcommand("fit-decay", "Fit a lifetime histogram (CSV time_ps,counts)");
    std::string fd_file;
    std::string fd_model = "mono";
    std::string fd_method = "poisson";
    double fd_start = 0.0;
    std::optional<double> fd_stop;
    std::string fd_out;
    fd_cmd->add_option("histogram", fd_file)->required()->check(CLI::ExistingFile);
    fd_cmd->add_option("--model", fd_model)->check(CLI::IsMember({"mono", "bi"}));
    fd_cmd->add_option("--method", fd_method)->check(CLI::IsMember({"poisson", "lsq"}));
    fd_cmd->add_option("--t-start", fd_start, "Fit bins with centre >= t_start (ps)");
    fd_cmd->add_option("--t-stop", fd_stop, "Fit bins with centre < t_stop (ps)");
    fd_cmd->add_option("--out", fd_out, "Report file (default stdout)");

    // fit-fano
    auto* ff_cmd = app.add_subcommand("fit-fano", "Fit a Fano cavity mode to a spectrum (CSV wavelength_nm,intensity)");
    std::string ff_file;
    std::optional<double> ff_lo;
    std::optional<double> ff_hi;
    std::string ff_out;
    ff_cmd->add_option("spectrum", ff_file)->required()->check(CLI::ExistingFile);
    ff_cmd->add_option("--lo", ff_lo, "Lower wavelength bound (nm)");
    ff_cmd->add_option("--hi", ff_hi, "Upper wavelength bound (nm)");
    ff_cmd->add_option("--out", ff_out, "Report file (default stdout)");

    // budget
    auto* bu_cmd = app.add_subcommand("budget", "Overall and source efficiencies from countrates");
    std::string bu_file;
    std::string bu_config;
    std::string bu_method = "quadrature";
    std::size_t bu_samples = 100000;
    std::uint64_t bu_seed = 1;
    std::string bu_out;
    bu_cmd->add_option("observations", bu_file, "CSV label,rate_cps,rate_uncertainty,rep_rate_hz")
        ->required()
        ->check(CLI::ExistingFile);
    bu_cmd->add_option("--config", bu_config, "Config whose budget.chain is used (default: setup chain)");
    bu_cmd->add_option("--method", bu_method)->check(CLI::IsMember({"quadrature", "mc"}));
    bu_cmd->add_option("--samples", bu_samples, "Monte Carlo samples");
    bu_cmd->add_option("--seed", bu_seed, "Monte Carlo seed");
    bu_cmd->add_option("--out", bu_out, "Report file (default stdout)");

    // purcell
    auto* pu_cmd = app.add_subcommand("purcell", "Purcell factor from reference and enhanced lifetimes");
    double pu_ref = 0, pu_ref_err = 0, pu_t1 = 0, pu_t1_err = 0;
    pu_cmd->add_option("--t1-ref", pu_ref, "Reference lifetime (ps)")->required();
    pu_cmd->add_option("--t1-ref-err", pu_ref_err);
    pu_cmd->add_option("--t1", pu_t1, "Enhanced lifetime (ps)")->required();
    pu_cmd->add_option("--t1-err", pu_t1_err);

    // sweep
    auto* sw_cmd = app.add_subcommand("sweep", "Parameter sweep emitting long-form CSV");
    std::string sw_config;
    std::string sw_param;
    std::vector<std::string> sw_values;
    int sw_seeds = 1;
    std::optional<std::uint64_t> sw_pulses;
    std::string sw_out;
    sw_cmd->add_option("--config", sw_config)->required();
    sw_cmd->add_option("--param", sw_param, "Dotted config field, e.g. bench.coincidence_gate_ps")->required();
    sw_cmd->add_option("--values", sw_values, "Comma-separated values")->required()->delimiter(',');
    sw_cmd->add_option("--seeds", sw_seeds, "Seeds per value")->check(CLI::PositiveNumber);
    sw_cmd->add_option("--pulses", sw_pulses, "Override excitation.n_pulses");
    sw_cmd->add_option("--out", sw_out, "CSV file (default stdout)");

    // show-config
    auto* sc_cmd = app.add_subcommand("show-config", "Print a resolved config as JSON");
    std::string sc_config;
    sc_cmd->add_option("--config", sc_config)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? Exit::ok : Exit::config_error;
    }
    omp_set_num_threads(threads);

    try {
        if (*sim_cmd) {
            ExperimentConfig cfg = resolve_config(sim_config);
            if (sim_seed) {
                cfg.excitation.seed = *sim_seed;
            }
            if (sim_pulses) {
                cfg.excitation.n_pulses = *sim_pulses;
            }
            if (!sim_tag_format.empty()) {
                cfg.output.tag_format = io::parse_format(sim_tag_format);
            }
            if (!sim_out.empty()) {
                cfg.output.dir = sim_out;
            }
            cfg.validate();
            const Simulation sim = simulate(cfg, threads);
            for (const auto& p : write_simulation(sim, cfg.output.dir)) {
                std::cout << p.string() << '\n';
            }
        } else if (*an_cmd) {
            Simulation sim;
            fs::path out_dir = an_out;
            if (!an_tags.empty()) {
                if (an_config.empty()) {
                    throw ConfigError("analyze: --tags requires --config");
                }
                std::vector<fs::path> files(an_tags.begin(), an_tags.end());
                sim = simulation_from_tags(resolve_config(an_config), files, an_allow);
                if (out_dir.empty()) {
                    out_dir = fs::path(an_tags.front()).parent_path();
                }
            } else {
                if (an_run.empty()) {
                    throw ConfigError("analyze: give a run directory or --tags");
                }
                sim = read_simulation(an_run, an_allow);
                if (!an_config.empty()) {
                    sim.config.analysis = resolve_config(an_config).analysis;
                }
                if (out_dir.empty()) {
                    out_dir = an_run;
                }
            }
            const Analysis a = analyze(sim, sim.config.analysis, threads);
            for (const auto& p : write_analysis(a, sim.manifest_hash, out_dir, format == "csv")) {
                std::cerr << p.string() << '\n';
            }
            std::cout << render(a.report, format);
        } else if (*fd_cmd) {
            DecayFitOptions opt;
            opt.model = fd_model == "bi" ? DecayModel::bi : DecayModel::mono;
            opt.method = fd_method == "lsq" ? FitMethod::least_squares : FitMethod::poisson_mle;
            opt.t_start_ps = fd_start;
            opt.t_stop_ps = fd_stop;
            const DecayHistogram h = io::read_decay_histogram_csv(fd_file);
            emit(render(decay_report(fit_decay(h, opt), fd_start), format), fd_out);
        } else if (*ff_cmd) {
            Spectrum s = io::read_spectrum_csv(ff_file);
            if (ff_lo || ff_hi) {
                s = s.window(ff_lo.value_or(-1e300), ff_hi.value_or(1e300));
            }
            emit(render(fano_report(fit_fano(s)), format), ff_out);
        } else if (*bu_cmd) {
            const EfficiencyChain chain =
                bu_config.empty() ? EfficiencyChain::paper_setup() : resolve_config(bu_config).chain;
            const auto obs = io::read_observations_csv(bu_file);
            const auto method = bu_method == "mc" ? BudgetMethod::monte_carlo : BudgetMethod::quadrature;
            emit(render(budget_report(obs, chain, method, bu_samples, bu_seed), format), bu_out);
        } else if (*pu_cmd) {
            const Measured f = purcell_factor({pu_ref, pu_ref_err}, {pu_t1, pu_t1_err});
            std::cout << render({{"purcell_factor", f.value}, {"purcell_factor_err", f.err}}, format);
        } else if (*sw_cmd) {
            ExperimentConfig cfg = resolve_config(sw_config);
            if (sw_pulses) {
                cfg.excitation.n_pulses = *sw_pulses;
            }
            emit(sweep_csv(run_sweep(cfg, sw_param, sw_values, sw_seeds, threads)), sw_out);
        } else if (*sc_cmd) {
            std::cout << to_json(resolve_config(sc_config)).dump(2) << '\n';
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return Exit::config_error;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return Exit::data_error;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return Exit::numerical_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return Exit::internal_error;
    }
    return Exit::ok;
}
