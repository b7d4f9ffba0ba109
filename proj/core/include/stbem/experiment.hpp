// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stbem/config.hpp"
#include "stbem/dynamics.hpp"
#include "stbem/grouping.hpp"
#include "stbem/pilots.hpp"

namespace stbem {

enum class Scenario { doa_track, as_track, ul_mse, dl_mse, ber };

std::string to_string(Scenario s);
Scenario parse_scenario(const std::string& name);  // throws Error(config)

struct ExperimentSpec {
    Scenario scenario = Scenario::doa_track;
    std::vector<double> snr_grid{10.0};
    int n_blocks = 100;
    int n_trials = 1;
    std::vector<std::string> baselines;  // empty selects every baseline of the scenario
    double speed_kmh = 80.0;
    std::vector<int> fixed_upsilon{4, 8};

    double max_as_deg = 2.0;
    double cell_radius_m = 500.0;
    int mu = 0;                   // 0 selects cfg.default_mu()
    int window = 16;              // observation half-width, bins
    int guard = 4;                // grouping guard, bins
    double eta = 0.98;            // SSI power-capture target
    double wavelength_ratio = 1.1;  // uplink / downlink wavelength
    double tracking_snr_db = 10.0;  // uplink SNR of the tracking chain in the downlink scenarios
    std::vector<int> dl_pilot_divisors{4};  // T = kappa / divisor
    int em_max_iters = 300;
    double em_tol = 1e-4;
    bool round_measurement = false;
    bool estimate_noise = false;  // eigenvalue noise-floor estimate instead of the known value
    long long min_bits = 1'000'000;  // per SNR point, ber scenario
    bool per_block_rows = true;

    bool wants(const std::string& baseline) const;
};

// Throws Error(config).
void validate(const ExperimentSpec& spec);

// Baselines a scenario understands; anything else in spec.baselines is a config error.
std::vector<std::string> known_baselines(Scenario s);

struct MetricRow {
    std::string scenario;
    double snr_db = 0.0;
    int block = -1;  // -1 marks a per-trial aggregate
    std::string method;
    int trial = 0;
    double value = 0.0;
};

struct TrialRecord {
    int trial = 0;
    std::vector<double> initial_doa;           // rad
    std::vector<std::vector<NoiseParams>> learned;  // [snr index][user]
    GroupPlan plan;
    std::optional<PilotBook> ul_pilots;  // depends on the trial's group count
    std::vector<std::string> diagnostics;
};

struct Manifest {
    SystemConfig cfg;
    ExperimentSpec spec;
    int mu = 0;
    double truth_q_omega = 0.0;
    int mu_dl = 0;
    int blocks_per_trial = 0;     // n_blocks, extended in the ber scenario to reach min_bits
    long long bits_per_point = 0;  // ber scenario: data bits per SNR point over all trials
    std::vector<PilotBook> dl_pilots;  // power left at 1; scaled per SNR point
    std::vector<TrialRecord> trials;
};

struct RunResult {
    std::vector<MetricRow> rows;
    Manifest manifest;
};

// Slot-normalised error, averaged over users and slots. Users whose truth is all zero
// are skipped and counted in *skipped.
double score_mse(const std::vector<CMat>& truth, const std::vector<CMat>& estimate, int* skipped = nullptr);

// Worker count: STBEM_THREADS if set (>= 1), else hardware concurrency.
int worker_count();

RunResult run_experiment(const ExperimentSpec& spec, const SystemConfig& cfg);

// Per-block, per-user diagnostics of the tracking chain for one trial at one SNR.
struct TraceRow {
    int user = 0;
    int block = 0;
    double true_doa = 0.0;
    double obs_bin = 0.0;
    double pred_mean = 0.0, pred_var = 0.0;
    double filt_mean = 0.0, filt_var = 0.0;
    double innovation = 0.0;
    double smooth_mean = 0.0, smooth_var = 0.0;
    double dft_doa = 0.0;
    double sigma2_hat = 0.0, dtheta_hat = 0.0;
    int ssi_tracked = 0, ssi_dft = 0, ssi_reference = 0;
};

std::vector<TraceRow> run_trace(const ExperimentSpec& spec, const SystemConfig& cfg, int trial = 0);

}  // namespace stbem
