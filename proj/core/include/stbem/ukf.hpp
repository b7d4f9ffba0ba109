// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "stbem/types.hpp"

namespace stbem {

struct UtConfig {
    double alpha = 1.0;
    double kappa = 2.0;
    double beta = 2.0;
    int R = 1;

    static UtConfig standard(int R) { return {1.0, 3.0 - R, 2.0, R}; }
    double epsilon() const { return alpha * alpha * (R + kappa) - R; }
};

struct UtWeights {
    Vec mean;
    Vec cov;
    static UtWeights from(const UtConfig& ut);
};

struct FilterState {
    Vec mean;
    Mat cov;
};

struct GainBundle {
    Mat kalman_gain;
    Mat pxy;
    Mat pyy;
    Vec y_pred;
};

using StateFn = std::function<Vec(const Vec&)>;

struct StepResult {
    FilterState predicted;
    FilterState updated;
    GainBundle gain;
    Vec innovation;
    double log_likelihood = 0.0;  // log N(innovation; 0, pyy)
};

// R x (2R+1), column 0 is the mean.
Mat sigma_points(const FilterState& state, const UtConfig& ut);

// One predict/update cycle. With predict = false the prior is taken as the predicted state
// (used for the first block, where the prior already describes theta(0)).
StepResult ukf_step(const FilterState& prev, const Vec& obs, const Mat& q_process, const Mat& q_meas,
                    const UtConfig& ut, const StateFn& meas_fn, const StateFn& sys_fn, bool predict = true);

struct FilterRun {
    std::vector<StepResult> steps;
    double log_likelihood = 0.0;

    std::vector<FilterState> filtered() const;
};

FilterRun ukf_filter(const std::vector<Vec>& obs, const FilterState& prior, const Mat& q_process,
                     const Mat& q_meas, const UtConfig& ut, const StateFn& meas_fn, const StateFn& sys_fn);

struct SmoothedTrajectory {
    std::vector<Vec> mean;
    std::vector<Mat> cov;
    // crossvar[z] = Cov(theta(z-1), theta(z) | all data); crossvar[0] is unused (zero).
    std::vector<Mat> crossvar;
};

SmoothedTrajectory urtss_pass(const std::vector<FilterState>& filtered, const Mat& q_process,
                              const UtConfig& ut, const StateFn& sys_fn);

Vec identity_map(const Vec& x);

// Per-block trace: block, predicted/updated mean and cov (first state component), innovation.
void write_filter_trace(std::ostream& os, const FilterRun& run);

}  // namespace stbem
