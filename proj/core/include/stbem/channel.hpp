// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "stbem/config.hpp"
#include "stbem/rng.hpp"
#include "stbem/types.hpp"

namespace stbem {

struct RayParams {
    cplx gain;
    double motion_angle = 0.0;  // angle to the direction of motion
    double init_phase = 0.0;
    double doa = 0.0;           // central doa + as_offset
    double as_offset = 0.0;
};

struct SpatialState {
    double central_doa = 0.0;
    double max_as = 0.0;
    double as_var = 0.0;

    // Uniform offsets on [-max_as, max_as] have variance max_as^2 / 3.
    static SpatialState uniform(double central_doa, double max_as) {
        return {central_doa, max_as, max_as * max_as / 3.0};
    }
};

struct ChannelBlock {
    std::int64_t block_index = 0;
    std::vector<CMat> h;                        // per user, M x N, column n is h_k(n)
    std::vector<std::vector<RayParams>> rays;   // per user, P rays
};

CVec steering_vector(const SystemConfig& cfg, double theta);
CVec steering_vector(int M, double d_over_lambda, double theta);

// Draws one user's ray set for a block. Rejects max_as >= pi/2.
std::vector<RayParams> draw_rays(const SystemConfig& cfg, const SpatialState& spatial, Rng& rng);

// Evaluates the multi-ray sum for slots 0..N-1 of cfg. cfg is not validated here so the
// same rays can be rendered on a derived (e.g. downlink) geometry.
CMat render_channel(const SystemConfig& cfg, std::span<const RayParams> rays);

// F a(theta) in closed form (Dirichlet kernel), F the unitary DFT.
CVec beamspace_steering(int M, double d_over_lambda, double theta);

// F h for slots 0..N-1 without forming h.
CMat render_beamspace(const SystemConfig& cfg, std::span<const RayParams> rays);

ChannelBlock generate_block(const SystemConfig& cfg, std::span<const SpatialState> spatial,
                            std::int64_t zeta, Rng& rng);

// symbols: K x N. Returns M x N with additive CN(0, noise_var) per element.
CMat uplink_received(const ChannelBlock& block, const CMat& symbols, const SystemConfig& cfg, Rng& rng);

// E{h_i(n+m) h_l(n)^*}: J0(2 pi fd m Ts) times the spatial term.
cplx theoretical_correlation(const SystemConfig& cfg, const SpatialState& spatial, int lag,
                             int antenna_i, int antenna_l);

// Spatial correlation term for an antenna offset l - i.
cplx spatial_correlation(const SystemConfig& cfg, const SpatialState& spatial, int offset);

// Columnar dump: "STBM", u32 version, u32 M, u32 N, u32 K, i64 block, then K*N*M complex64
// little-endian (user-major, then slot, then antenna).
void write_block_dump(std::ostream& os, const ChannelBlock& block);

struct BlockDump {
    int M = 0, N = 0, K = 0;
    std::int64_t block_index = 0;
    std::vector<std::complex<float>> data;
};
BlockDump read_block_dump(std::istream& is);

}  // namespace stbem
