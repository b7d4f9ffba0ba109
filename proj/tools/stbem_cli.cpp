// SPDX-License-Identifier: Apache-2.0
// stbem: run the tracking experiments and write CSV + manifest.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>
#include <string>

#include "acceptance/criteria.hpp"
#include "stbem/errors.hpp"
#include "stbem/experiment.hpp"
#include "stbem/report.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Options {
    std::string config;
    std::string scenario;
    std::string snr;
    std::optional<int> trials;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::string baselines;
    int trace_trial = 0;
    std::string criterion;
};

void add_run_flags(CLI::App* cmd, Options& o, bool needs_scenario) {
    cmd->add_option("--config", o.config, "JSON config mirroring SystemConfig / ExperimentSpec fields");
    auto* sc = cmd->add_option("--scenario", o.scenario, "doa_track | as_track | ul_mse | dl_mse | ber");
    if (needs_scenario) sc->required();
    cmd->add_option("--snr", o.snr, "SNR in dB: 10, -10:2:20 or 0,5,10");
    cmd->add_option("--trials", o.trials, "Monte Carlo trials");
    cmd->add_option("--seed", o.seed, "base seed");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--baselines", o.baselines, "comma list, e.g. dft_search,fixed_upsilon(6)");
}

// "a,fixed_upsilon(6),b" -> names plus explicit fixed window sizes.
void apply_baselines(const std::string& text, stbem::ExperimentSpec& spec) {
    if (text.empty()) return;
    static const std::regex sized(R"(fixed_upsilon\((\d+)\))");
    std::vector<int> sizes;
    std::stringstream ss(text);
    std::string item;
    spec.baselines.clear();
    while (std::getline(ss, item, ',')) {
        std::smatch m;
        if (std::regex_match(item, m, sized)) {
            sizes.push_back(std::stoi(m[1]));
            item = "fixed_upsilon";
        }
        if (item.empty()) throw stbem::Error(stbem::ErrorKind::config, "empty baseline name");
        if (std::find(spec.baselines.begin(), spec.baselines.end(), item) == spec.baselines.end())
            spec.baselines.push_back(item);
    }
    if (!sizes.empty()) spec.fixed_upsilon = sizes;
}

void resolve(const Options& o, stbem::SystemConfig& cfg, stbem::ExperimentSpec& spec) {
    if (!o.config.empty()) stbem::load_config(o.config, cfg, spec);
    if (!o.scenario.empty()) spec.scenario = stbem::parse_scenario(o.scenario);
    if (!o.snr.empty()) spec.snr_grid = stbem::parse_snr_grid(o.snr);
    if (o.trials) spec.n_trials = *o.trials;
    if (o.seed) cfg.seed = *o.seed;
    apply_baselines(o.baselines, spec);
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
    fs::create_directories(dir);
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw stbem::Error(stbem::ErrorKind::config, "cannot write " + (dir / name).string());
    return os;
}

int run(const Options& o, bool sweep) {
    stbem::SystemConfig cfg;
    stbem::ExperimentSpec spec;
    if (sweep) spec.per_block_rows = false;
    resolve(o, cfg, spec);
    const auto result = stbem::run_experiment(spec, cfg);
    auto csv = open_out(o.out, "results.csv");
    stbem::write_csv(csv, result.rows);
    auto manifest = open_out(o.out, "manifest.json");
    manifest << stbem::manifest_json(result.manifest);
    std::cerr << "wrote " << result.rows.size() << " rows to " << (fs::path(o.out) / "results.csv").string() << '\n';
    return 0;
}

int trace(const Options& o) {
    stbem::SystemConfig cfg;
    stbem::ExperimentSpec spec;
    resolve(o, cfg, spec);
    const auto rows = stbem::run_trace(spec, cfg, o.trace_trial);
    auto csv = open_out(o.out, "trace.csv");
    stbem::write_trace_csv(csv, rows);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ST-BEM channel tracking simulator"};
    app.require_subcommand(1);
    Options o;
    auto* simulate = app.add_subcommand("simulate", "run one scenario with per-block rows");
    add_run_flags(simulate, o, true);
    auto* sweep = app.add_subcommand("sweep", "run an SNR grid, one aggregate row per (snr, method, trial)");
    add_run_flags(sweep, o, true);
    auto* tr = app.add_subcommand("trace", "per-block tracking diagnostics for one trial");
    add_run_flags(tr, o, false);
    tr->add_option("--trial", o.trace_trial, "trial index");
    auto* self = app.add_subcommand("selftest", "run the acceptance suite");
    self->add_option("--criterion", o.criterion, "substring filter on criterion names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*simulate) return run(o, false);
        if (*sweep) return run(o, true);
        if (*tr) return trace(o);
        if (*self) return stbem::acceptance::run_suite(o.criterion, std::cout) == 0 ? 0 : 1;
    } catch (const stbem::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.is_config() ? kExitConfig : kExitNumerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
    return 0;
}
