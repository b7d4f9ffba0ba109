// SPDX-License-Identifier: Apache-2.0
#include "stbem/basis.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "stbem/errors.hpp"

namespace stbem {

SsiSet::SsiSet(int modulus, int lo, int hi, int center) {
    if (modulus < 1) throw Error(ErrorKind::config, "SSI modulus must be positive");
    if (!(lo <= center && center <= hi)) throw Error(ErrorKind::config, "SSI center outside [lo, hi]");
    if (hi - lo + 1 > modulus) throw Error(ErrorKind::config, "SSI interval longer than the circle");
    const int shift = center - wrap_index(center, modulus);
    modulus_ = modulus;
    lo_ = lo - shift;
    hi_ = hi - shift;
    center_ = center - shift;
}

SsiSet SsiSet::centered(int modulus, int center, int size) {
    size = std::clamp(size, 1, modulus);
    const int lo = center - (size - 1) / 2;
    return SsiSet(modulus, lo, lo + size - 1, center);
}

bool SsiSet::contains(int bin) const {
    const int offset = wrap_index(static_cast<long long>(bin) - lo_, modulus_);
    return offset < size();
}

std::vector<int> SsiSet::bins() const {
    std::vector<int> out;
    out.reserve(size());
    for (int b = lo_; b <= hi_; ++b) out.push_back(wrap_index(b, modulus_));
    return out;
}

BemConfig BemConfig::make(int mu, int N) {
    if (mu < 0) throw Error(ErrorKind::config, "mu must be non-negative");
    if (N < 1) throw Error(ErrorKind::config, "N must be positive");
    return {mu + (mu % 2), N};
}

const CMat& dft_matrix(int M) {
    thread_local std::map<int, CMat> cache;
    auto it = cache.find(M);
    if (it != cache.end()) return it->second;
    CMat F(M, M);
    const double scale = 1.0 / std::sqrt(static_cast<double>(M));
    for (int p = 0; p < M; ++p)
        for (int q = 0; q < M; ++q) {
            // Reduce p*q first so the phase argument stays small.
            const int pq = static_cast<int>((static_cast<long long>(p) * q) % M);
            F(p, q) = std::polar(scale, -kTwoPi * pq / M);
        }
    return cache.emplace(M, std::move(F)).first->second;
}

CVec dft_beamspace(const CVec& h) { return dft_matrix(static_cast<int>(h.size())) * h; }
CMat dft_beamspace(const CMat& h) { return dft_matrix(static_cast<int>(h.rows())) * h; }
CVec idft_beamspace(const CVec& h) { return dft_matrix(static_cast<int>(h.size())).adjoint() * h; }
CMat idft_beamspace(const CMat& h) { return dft_matrix(static_cast<int>(h.rows())).adjoint() * h; }

SsiSet ssi_from_angles(const SystemConfig& cfg, const SpatialState& spatial) {
    const double c = cfg.bin_scale();
    const int lo = static_cast<int>(std::floor(c * std::sin(spatial.central_doa - spatial.max_as)));
    int hi = static_cast<int>(std::ceil(c * std::sin(spatial.central_doa + spatial.max_as)));
    const int center = static_cast<int>(std::lround(c * std::sin(spatial.central_doa)));
    hi = std::min(hi, lo + cfg.M - 1);
    return SsiSet(cfg.M, lo, hi, std::clamp(center, lo, hi));
}

int asymptotic_ssi_size(const SystemConfig& cfg, const SpatialState& spatial) {
    const double width = 2.0 * cfg.bin_scale() * std::cos(spatial.central_doa) * spatial.max_as;
    return std::clamp(static_cast<int>(std::ceil(width - 1e-12)), 1, cfg.M);
}

namespace {

// |sum_m exp(j m eta)|^2 / M.
double fejer(int M, double eta) {
    const double s = std::sin(0.5 * eta);
    if (std::abs(s) < 1e-12) return M;
    const double t = std::sin(0.5 * M * eta);
    return t * t / (M * s * s);
}

}  // namespace

Vec cluster_power_profile(int M, double d_over_lambda, double central_doa, double max_as) {
    Vec power = Vec::Zero(M);
    const double width_bins = 2.0 * M * d_over_lambda * std::abs(std::cos(central_doa)) * max_as;
    const int samples = max_as > 0.0 ? 1 + 2 * static_cast<int>(std::ceil(8.0 * width_bins + 8.0)) : 1;
    for (int s = 0; s < samples; ++s) {
        const double theta = samples == 1
                                 ? central_doa
                                 : central_doa - max_as + 2.0 * max_as * (s + 0.5) / samples;
        const double u = d_over_lambda * std::sin(theta);
        for (int q = 0; q < M; ++q) power[q] += fejer(M, kTwoPi * (u - static_cast<double>(q) / M));
    }
    return power / power.sum();
}

SsiSet ssi_from_profile(const Vec& power, int anchor, double eta, int reach) {
    const int M = static_cast<int>(power.size());
    int first, len;
    if (reach < 0 || 2 * reach + 1 >= M) {
        first = anchor - (M - 1) / 2;
        len = M;
    } else {
        first = anchor - reach;
        len = 2 * reach + 1;
    }
    std::vector<double> prefix(len + 1, 0.0);
    for (int i = 0; i < len; ++i) prefix[i + 1] = prefix[i] + power[wrap_index(first + i, M)];
    const double target = eta * prefix[len];
    const int a = anchor - first;
    int best_lo = a, best_hi = a;
    double best_sum = -1.0;
    int best_len = len + 1;
    for (int lo = 0; lo <= a; ++lo) {
        for (int hi = a; hi < len; ++hi) {
            const double s = prefix[hi + 1] - prefix[lo];
            const int l = hi - lo + 1;
            if (s >= target) {
                if (l < best_len || (l == best_len && s > best_sum)) {
                    best_len = l;
                    best_sum = s;
                    best_lo = lo;
                    best_hi = hi;
                }
                break;
            }
        }
    }
    if (best_sum < 0.0) {  // target unreachable within the region, e.g. eta > 1
        best_lo = 0;
        best_hi = len - 1;
    }
    return SsiSet(M, first + best_lo, first + best_hi, anchor);
}

SsiSet ssi_with_leakage(const SystemConfig& cfg, const SpatialState& spatial, double eta) {
    const Vec profile = cluster_power_profile(cfg.M, cfg.d_over_lambda, spatial.central_doa, spatial.max_as);
    const int anchor = static_cast<int>(std::lround(cfg.bin_scale() * std::sin(spatial.central_doa)));
    return ssi_from_profile(profile, anchor, eta);
}

int support_size(const Vec& power, double eta) {
    const int M = static_cast<int>(power.size());
    const double target = eta * power.sum();
    int best = M;
    for (int start = 0; start < M; ++start) {
        double s = 0.0;
        for (int l = 1; l <= best; ++l) {
            s += power[(start + l - 1) % M];
            if (s >= target) {
                best = std::min(best, l);
                break;
            }
        }
    }
    return best;
}

double captured_fraction(const Vec& power, const SsiSet& ssi) {
    double s = 0.0;
    for (int b : ssi.bins()) s += power[b];
    const double total = power.sum();
    return total > 0.0 ? s / total : 0.0;
}

Vec beam_power(const CMat& h) {
    const CMat ht = dft_beamspace(h);
    return ht.cwiseAbs2().rowwise().mean();
}

CMat basis_matrix(const BemConfig& bem, std::span<const int> slots) {
    CMat C(bem.order(), static_cast<Eigen::Index>(slots.size()));
    for (Eigen::Index t = 0; t < C.cols(); ++t) {
        const int n = slots[t];
        if (n < 0 || n >= bem.N) throw Error(ErrorKind::dimension_mismatch, "slot outside [0, N)");
        for (int r = 0; r <= bem.mu; ++r) {
            // Integer phase index reduced mod N keeps the argument exact.
            const long long k = static_cast<long long>(r - bem.mu / 2) * n;
            C(r, t) = std::polar(1.0, kTwoPi * static_cast<double>(wrap_index(k, bem.N)) / bem.N);
        }
    }
    return C;
}

CMat basis_matrix(const BemConfig& bem) {
    std::vector<int> slots(bem.N);
    for (int n = 0; n < bem.N; ++n) slots[n] = n;
    return basis_matrix(bem, slots);
}

CVec cebem_fit(const CVec& samples, const BemConfig& bem, std::span<const int> slots) {
    if (static_cast<Eigen::Index>(slots.size()) != samples.size())
        throw Error(ErrorKind::dimension_mismatch, "one sample per slot");
    const CMat design = basis_matrix(bem, slots).transpose();
    Eigen::ColPivHouseholderQR<CMat> qr(design);
    if (qr.rank() < bem.order()) throw Error(ErrorKind::rank_deficient, "CE-BEM design rank deficient");
    return qr.solve(samples);
}

CVec cebem_fit(const CVec& series, const BemConfig& bem) {
    if (series.size() != bem.N) throw Error(ErrorKind::dimension_mismatch, "series length must equal N");
    if (bem.N < bem.order()) throw Error(ErrorKind::rank_deficient, "N < mu + 1");
    std::vector<int> slots(bem.N);
    for (int n = 0; n < bem.N; ++n) slots[n] = n;
    return cebem_fit(series, bem, slots);
}

namespace {

CMat masked_beams(const BemCoefficients& gamma, const SsiSet& ssi) {
    CMat masked = CMat::Zero(gamma.gamma.rows(), gamma.gamma.cols());
    for (int b : ssi.bins()) masked.row(b) = gamma.gamma.row(b);
    return masked;
}

}  // namespace

CVec stbem_reconstruct(const BemCoefficients& gamma, const SsiSet& ssi, const BemConfig& bem, int n) {
    const int slot[1] = {n};
    const CMat c = basis_matrix(bem, slot);
    return idft_beamspace(CVec(masked_beams(gamma, ssi) * c.col(0)));
}

CMat stbem_beamspace_block(const BemCoefficients& gamma, const SsiSet& ssi, const BemConfig& bem) {
    const CMat C = basis_matrix(bem);
    CMat out = CMat::Zero(gamma.gamma.rows(), C.cols());
    for (int b : ssi.bins()) out.row(b) = gamma.gamma.row(b) * C;
    return out;
}

CMat stbem_reconstruct_block(const BemCoefficients& gamma, const SsiSet& ssi, const BemConfig& bem) {
    return idft_beamspace(stbem_beamspace_block(gamma, ssi, bem));
}

BemCoefficients fit_channel(const CMat& h, const BemConfig& bem) {
    if (h.cols() != bem.N) throw Error(ErrorKind::dimension_mismatch, "channel must have N columns");
    const CMat C = basis_matrix(bem);
    const CMat gram = C * C.adjoint();
    // Gamma C ~= F h, solved through the normal equations of the well-conditioned basis.
    const CMat rhs = dft_beamspace(h) * C.adjoint();
    const CMat gram_t = gram.transpose();
    return {gram_t.ldlt().solve(rhs.transpose()).transpose()};
}

}  // namespace stbem
