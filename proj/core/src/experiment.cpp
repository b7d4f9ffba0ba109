// SPDX-License-Identifier: Apache-2.0
#include "stbem/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <thread>

#include "scenarios.hpp"
#include "stbem/errors.hpp"

namespace stbem {

std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::doa_track: return "doa_track";
        case Scenario::as_track: return "as_track";
        case Scenario::ul_mse: return "ul_mse";
        case Scenario::dl_mse: return "dl_mse";
        case Scenario::ber: return "ber";
    }
    return "unknown";
}

Scenario parse_scenario(const std::string& name) {
    for (auto s : {Scenario::doa_track, Scenario::as_track, Scenario::ul_mse, Scenario::dl_mse, Scenario::ber})
        if (to_string(s) == name) return s;
    throw Error(ErrorKind::config, "unknown scenario '" + name + "'");
}

std::vector<std::string> known_baselines(Scenario s) {
    switch (s) {
        case Scenario::doa_track: return {"dft_search", "no_em"};
        case Scenario::as_track: return {"dft_search"};
        case Scenario::ul_mse: return {"fixed_upsilon", "aging", "sbem_static"};
        case Scenario::dl_mse: return {"conventional_ls", "sbem_static"};
        case Scenario::ber: return {"perfect_csi", "conventional_ls", "sbem_static"};
    }
    return {};
}

bool ExperimentSpec::wants(const std::string& baseline) const {
    return baselines.empty() || std::find(baselines.begin(), baselines.end(), baseline) != baselines.end();
}

void validate(const ExperimentSpec& spec) {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::config, msg); };
    if (spec.n_trials < 1) fail("n_trials must be >= 1");
    if (spec.snr_grid.empty()) fail("snr_grid must not be empty");
    if (spec.n_blocks < 2) fail("n_blocks must be >= 2");
    if (spec.speed_kmh < 0.0) fail("speed_kmh must be non-negative");
    if (!(spec.cell_radius_m > 0.0)) fail("cell_radius_m must be positive");
    if (spec.max_as_deg < 0.0 || spec.max_as_deg >= 30.0) fail("max_as_deg must lie in [0, 30)");
    if (spec.mu < 0) fail("mu must be non-negative");
    if (spec.window < 1) fail("window must be >= 1");
    if (spec.guard < 0) fail("guard must be non-negative");
    if (!(spec.eta > 0.0 && spec.eta <= 1.0)) fail("eta must lie in (0, 1]");
    if (!(spec.wavelength_ratio > 0.0)) fail("wavelength_ratio must be positive");
    if (spec.em_max_iters < 1) fail("em_max_iters must be >= 1");
    if (!(spec.em_tol > 0.0)) fail("em_tol must be positive");
    if (spec.dl_pilot_divisors.empty()) fail("dl_pilot_divisors must not be empty");
    for (int d : spec.dl_pilot_divisors)
        if (d < 1) fail("dl_pilot_divisors entries must be >= 1");
    for (int u : spec.fixed_upsilon)
        if (u < 1) fail("fixed_upsilon entries must be >= 1");
    const auto known = known_baselines(spec.scenario);
    for (const auto& b : spec.baselines)
        if (std::find(known.begin(), known.end(), b) == known.end())
            fail("baseline '" + b + "' does not apply to scenario " + to_string(spec.scenario));
}

double score_mse(const std::vector<CMat>& truth, const std::vector<CMat>& estimate, int* skipped) {
    if (truth.size() != estimate.size()) throw Error(ErrorKind::dimension_mismatch, "user count differs");
    double sum = 0.0;
    long long used = 0;
    int skip = 0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        if (truth[k].rows() != estimate[k].rows() || truth[k].cols() != estimate[k].cols())
            throw Error(ErrorKind::dimension_mismatch, "channel shapes differ");
        for (Eigen::Index n = 0; n < truth[k].cols(); ++n) {
            const double norm = truth[k].col(n).squaredNorm();
            if (!(norm > 0.0)) {
                ++skip;
                continue;
            }
            sum += (truth[k].col(n) - estimate[k].col(n)).squaredNorm() / norm;
            ++used;
        }
    }
    if (skipped) *skipped = skip;
    return used > 0 ? sum / static_cast<double>(used) : 0.0;
}

int worker_count() {
    if (const char* env = std::getenv("STBEM_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

RunResult run_experiment(const ExperimentSpec& spec, const SystemConfig& cfg) {
    validate(cfg);
    validate(spec);
    const detail::RunPlan plan = detail::make_plan(spec, cfg);

    std::vector<detail::TrialOutput> outputs(spec.n_trials);
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (int t = next++; t < spec.n_trials && !failed; t = next++) {
            try {
                outputs[t] = detail::run_trial(plan, t);
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
            }
        }
    };
    const int n_workers = std::min(worker_count(), spec.n_trials);
    std::vector<std::thread> pool;
    for (int i = 1; i < n_workers; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);

    RunResult result;
    result.manifest = plan.manifest;
    for (auto& out : outputs) {
        result.rows.insert(result.rows.end(), out.rows.begin(), out.rows.end());
        result.manifest.trials.push_back(std::move(out.record));
    }
    return result;
}

std::vector<TraceRow> run_trace(const ExperimentSpec& spec, const SystemConfig& cfg, int trial) {
    validate(cfg);
    validate(spec);
    return detail::trace_trial(detail::make_plan(spec, cfg), trial);
}

}  // namespace stbem
