// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace stbem {

// Physical and system constants. Defaults follow the simulation section:
// 128-element half-wavelength ULA, 12 users, 100-slot blocks at 10 kHz.
struct SystemConfig {
    int M = 128;
    double d_over_lambda = 0.5;
    int K = 12;
    int G = 3;
    int N = 100;
    double Ts = 1e-4;        // seconds
    double fd = 200.0;       // Hz
    int P = 50;              // rays per user
    double noise_var = 0.1;  // linear, per antenna
    std::uint64_t seed = 1;

    // Electrical scale mapping sin(theta) to a bin index.
    double bin_scale() const { return M * d_over_lambda; }
    double block_duration() const { return N * Ts; }
    // Smallest even CE-BEM order with enough Doppler degrees of freedom.
    int default_mu() const;
};

// Throws Error(config) on any invariant violation.
void validate(const SystemConfig& cfg);

}  // namespace stbem
