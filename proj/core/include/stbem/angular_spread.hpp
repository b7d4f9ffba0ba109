// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "stbem/config.hpp"
#include "stbem/types.hpp"

namespace stbem {

CVec steering_derivative(const SystemConfig& cfg, double theta);

// [a(t_1) .. a(t_K), a'(t_1) .. a'(t_K)].
struct TaylorDictionary {
    CMat A;
    static TaylorDictionary build(const SystemConfig& cfg, std::span<const double> thetas);
};

struct SampleCovariance {
    CMat Rx;
    int n_samples = 0;
};

// (1/N) sum x(n) x(n)^H over the columns of x.
SampleCovariance sample_covariance(const CMat& x);

struct SpreadEstimate {
    Vec sigma2;       // rad^2, clamped at 0
    Vec delta_theta;  // sqrt(3 sigma2)
};

SpreadEstimate estimate_sigma(const SampleCovariance& cov, std::span<const double> thetas,
                              const SystemConfig& cfg, double noise_var);

// Mean of the M - 2K smallest eigenvalues of Rx.
double estimate_noise_floor(const SampleCovariance& cov, int n_users);

// Centered moving median; the window shrinks at the ends.
std::vector<double> moving_median(std::span<const double> values, int width = 3);

}  // namespace stbem
