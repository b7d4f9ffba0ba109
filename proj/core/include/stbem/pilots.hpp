// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "stbem/basis.hpp"

namespace stbem {

enum class PilotMode { uplink, downlink };

struct PilotBook {
    PilotMode mode = PilotMode::uplink;
    int N = 0;
    int mu = 0;
    int T = 0;
    std::vector<int> slots;  // equi-spaced pilot slots
    CMat sequences;          // one row per group (uplink) or per bin (downlink), T columns
    double power = 1.0;      // total pilot energy per user

    int streams() const { return static_cast<int>(sequences.rows()); }
};

// Uplink: streams = G. Downlink: streams = tau. T is the smallest divisor of N that is at
// least streams * (mu + 1); slots are i * N / T.
PilotBook design_pilots(int streams, int mu, int N, PilotMode mode);

// (mu+1) x T matrix C S_g: basis columns at the pilot slots scaled by stream g.
CMat pilot_basis(const PilotBook& book, const BemConfig& bem, int stream);

// Largest deviation from C S_g S_g'^H C^H = delta(g, g') I over all stream pairs.
double orthogonality_error(const PilotBook& book, const BemConfig& bem);

// Y: M x T received pilots. Returns M x G(mu+1), group g in columns g(mu+1) .. g(mu+1)+mu.
CMat ls_estimate_gamma(const CMat& Y, const PilotBook& book, const BemConfig& bem);

BemCoefficients extract_user_gamma(const CMat& gamma_hat, const SsiSet& ssi, int group_slot, int mu);

struct DownlinkMap {
    double ul_wavelength = 1.0;
    double dl_wavelength = 1.0;
    SsiSet ssi_dl;
    int tau = 1;
};

DownlinkMap reciprocity_map(const SsiSet& ssi_ul, double ul_wavelength, double dl_wavelength);

// Per-bin training signal at the user: y(n_t) = sum_i sqrt(power/tau) s_i(n_t) gamma_i^T c(n_t).
// `stacked` holds the tau coefficient vectors back to back.
CVec downlink_training_signal(const CVec& stacked, const PilotBook& book, const BemConfig& bem);

// LS recovery of the stacked tau(mu+1) coefficients from the user's T received samples.
CVec downlink_train_estimate(const CVec& y_dl, const PilotBook& book, const BemConfig& bem);

// BS side: place the fed-back coefficients on the bins of map.ssi_dl (M x (mu+1)).
BemCoefficients assemble_downlink(const CVec& stacked, const DownlinkMap& map, const BemConfig& bem);

}  // namespace stbem
