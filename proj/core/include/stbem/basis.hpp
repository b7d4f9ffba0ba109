// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "stbem/channel.hpp"
#include "stbem/config.hpp"
#include "stbem/types.hpp"

namespace stbem {

// Contiguous interval of beamspace bins on the M-circle. Stored unwrapped:
// 0 <= center < M, lo <= center <= hi, hi - lo + 1 <= M.
class SsiSet {
public:
    SsiSet() = default;
    // Shifts all three by a common multiple of M so the center lands in [0, M).
    SsiSet(int modulus, int lo, int hi, int center);
    static SsiSet centered(int modulus, int center, int size);

    int modulus() const { return modulus_; }
    int lo() const { return lo_; }
    int hi() const { return hi_; }
    int center() const { return center_; }
    int size() const { return hi_ - lo_ + 1; }
    bool wraps() const { return lo_ < 0 || hi_ >= modulus_; }

    bool contains(int bin) const;
    std::vector<int> bins() const;  // reduced mod M, ascending along the interval

    bool operator==(const SsiSet&) const = default;

private:
    int modulus_ = 1;
    int lo_ = 0;
    int hi_ = 0;
    int center_ = 0;
};

struct BemConfig {
    int mu = 0;
    int N = 1;

    // Odd orders are rounded up; the basis is indexed r - mu/2.
    static BemConfig make(int mu, int N);
    int order() const { return mu + 1; }
};

struct BemCoefficients {
    CMat gamma;  // M x (mu + 1), row q holds the temporal coefficients of bin q
};

// Unitary DFT matrix, [F]_pq = exp(-j 2 pi p q / M) / sqrt(M). Cached per thread.
const CMat& dft_matrix(int M);

CVec dft_beamspace(const CVec& h);
CMat dft_beamspace(const CMat& h);  // column-wise
CVec idft_beamspace(const CVec& h_tilde);
CMat idft_beamspace(const CMat& h_tilde);

SsiSet ssi_from_angles(const SystemConfig& cfg, const SpatialState& spatial);
int asymptotic_ssi_size(const SystemConfig& cfg, const SpatialState& spatial);

// Expected beamspace power of a uniform ray cluster, normalised to unit sum.
Vec cluster_power_profile(int M, double d_over_lambda, double central_doa, double max_as);

// Smallest contiguous interval containing `anchor` that holds `eta` of the power in
// [anchor - reach, anchor + reach] (reach < 0 means the whole circle).
SsiSet ssi_from_profile(const Vec& power, int anchor, double eta, int reach = -1);

// Tracker SSI: the eta-power interval of the leakage-aware cluster profile.
SsiSet ssi_with_leakage(const SystemConfig& cfg, const SpatialState& spatial, double eta);

// Smallest contiguous (circular) interval anywhere holding eta of the power.
int support_size(const Vec& power, double eta);

double captured_fraction(const Vec& power, const SsiSet& ssi);

// Mean of |F h(n)|^2 over the columns of h.
Vec beam_power(const CMat& h);

CMat basis_matrix(const BemConfig& bem, std::span<const int> slots);
CMat basis_matrix(const BemConfig& bem);  // all N slots

CVec cebem_fit(const CVec& series, const BemConfig& bem);
CVec cebem_fit(const CVec& samples, const BemConfig& bem, std::span<const int> slots);

CVec stbem_reconstruct(const BemCoefficients& gamma, const SsiSet& ssi, const BemConfig& bem, int n);
// Beamspace form of the block, F h(n) for all N slots (M x N, zero outside the SSI).
CMat stbem_beamspace_block(const BemCoefficients& gamma, const SsiSet& ssi, const BemConfig& bem);
// All N slots at once, M x N.
CMat stbem_reconstruct_block(const BemCoefficients& gamma, const SsiSet& ssi, const BemConfig& bem);

// Least-squares CE-BEM fit of every beamspace row of a noiseless channel (M x N).
BemCoefficients fit_channel(const CMat& h, const BemConfig& bem);

}  // namespace stbem
