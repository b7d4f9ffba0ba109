// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "stbem/basis.hpp"
#include "stbem/rng.hpp"
#include "stbem/ukf.hpp"

namespace stbem {

struct NoiseParams {
    double q_omega = deg2rad(0.1) * deg2rad(0.1);  // rad^2
    double q_u = 1.0;                               // bin^2
};

struct ObservationVector {
    Vec q_obs;  // observed central bin per block, on the unwrapped integer line
};

// Scalar DOA state with measurement scale * sin(theta).
struct DoaModel {
    double scale = 64.0;  // M d / lambda
    bool round_measurement = false;
    double prior_mean = 0.0;
    double prior_var = 1e-4;
    UtConfig ut = UtConfig::standard(1);

    double measure(double theta) const;
    // Prior from an initial bin: one bin of uncertainty.
    static DoaModel from_initial_bin(double scale, double bin);
};

struct DoaTrack {
    std::vector<double> pred_mean, pred_var;
    std::vector<double> filt_mean, filt_var;
    std::vector<double> innovation;
    std::vector<double> smooth_mean, smooth_var;
    std::vector<double> crossvar;  // [z] = Cov(theta(z-1), theta(z)); [0] = 0
    double log_likelihood = 0.0;
};

// Argmax of the averaged beam power within +-window of the predicted center. The result is
// on the integer line through `predicted_center` (no mod-M jump). Throws no_signal when the
// input is all zero or the in-window peak-to-mean power ratio is below 3.
double observe_central_ssi(const CMat& x, double predicted_center, int window);
double observe_central_ssi(const Vec& power, double predicted_center, int window);

double markov_step(double theta_prev, double q_omega, Rng& rng);

// One scalar UKF cycle of the DOA model; same arithmetic as ukf_step with R = 1.
struct DoaStep {
    double pred_mean = 0.0, pred_var = 0.0;
    double mean = 0.0, var = 0.0;
    double innovation = 0.0;
    double log_likelihood = 0.0;
};
DoaStep doa_filter_step(double mean, double var, double obs, const NoiseParams& params, const DoaModel& model,
                        bool predict);

DoaTrack track_doa(const ObservationVector& obs, const NoiseParams& params, const DoaModel& model);

struct EmStep {
    NoiseParams params;
    double log_likelihood = 0.0;  // of the parameters passed in
    bool clamped = false;
};

inline constexpr double kVarianceFloor = 1e-10;

EmStep em_iterate(const ObservationVector& obs, const NoiseParams& current, const DoaModel& model);

struct EmOptions {
    int max_iters = 300;
    double tol = 1e-4;
};

struct EmResult {
    NoiseParams params;
    std::vector<double> log_likelihood;  // entry i is for the parameters after i updates
    int iterations = 0;
    bool converged = false;
    bool clamped = false;
};

EmResult em_learn(const ObservationVector& obs, const NoiseParams& init, const DoaModel& model,
                  const EmOptions& opts = {});

}  // namespace stbem
