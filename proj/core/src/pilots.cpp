// SPDX-License-Identifier: Apache-2.0
#include "stbem/pilots.hpp"

#include <cmath>
#include <string>

#include "stbem/errors.hpp"

namespace stbem {

PilotBook design_pilots(int streams, int mu, int N, PilotMode mode) {
    if (streams < 1 || mu < 0 || N < 1) throw Error(ErrorKind::config, "pilot design needs streams >= 1, mu >= 0, N >= 1");
    const long long need = static_cast<long long>(streams) * (mu + 1);
    if (need > N)
        throw Error(ErrorKind::infeasible, "need " + std::to_string(need) + " pilot slots but the block has " +
                                               std::to_string(N));
    int T = static_cast<int>(need);
    while (N % T != 0) ++T;  // terminates at T = N

    PilotBook book;
    book.mode = mode;
    book.N = N;
    book.mu = mu;
    book.T = T;
    book.slots.resize(T);
    for (int i = 0; i < T; ++i) book.slots[i] = i * (N / T);
    book.sequences.resize(streams, T);
    const double amp = std::sqrt(1.0 / T);
    for (int g = 0; g < streams; ++g)
        for (int i = 0; i < T; ++i) {
            const long long k = static_cast<long long>(i) * g * (mu + 1);
            book.sequences(g, i) = std::polar(amp, kTwoPi * static_cast<double>(wrap_index(k, T)) / T);
        }
    book.power = mode == PilotMode::uplink ? static_cast<double>(T) : 1.0;
    return book;
}

CMat pilot_basis(const PilotBook& book, const BemConfig& bem, int stream) {
    return basis_matrix(bem, book.slots) * book.sequences.row(stream).transpose().asDiagonal();
}

double orthogonality_error(const PilotBook& book, const BemConfig& bem) {
    std::vector<CMat> cs;
    for (int g = 0; g < book.streams(); ++g) cs.push_back(pilot_basis(book, bem, g));
    double worst = 0.0;
    const CMat eye = CMat::Identity(bem.order(), bem.order());
    for (int g = 0; g < book.streams(); ++g)
        for (int h = g; h < book.streams(); ++h) {
            const CMat prod = cs[g] * cs[h].adjoint();
            worst = std::max(worst, (g == h ? CMat(prod - eye) : prod).cwiseAbs().maxCoeff());
        }
    return worst;
}

CMat ls_estimate_gamma(const CMat& Y, const PilotBook& book, const BemConfig& bem) {
    if (Y.cols() != book.T) throw Error(ErrorKind::dimension_mismatch, "Y must have T columns");
    if (bem.mu != book.mu) throw Error(ErrorKind::dimension_mismatch, "basis order differs from the pilot book");
    const int L = bem.order();
    CMat psi(book.streams() * L, book.T);
    for (int g = 0; g < book.streams(); ++g) psi.middleRows(g * L, L) = pilot_basis(book, bem, g);
    const CMat gram = psi * psi.adjoint();
    const CMat gram_t = gram.transpose();
    Eigen::LLT<CMat> llt(gram_t);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorKind::pilot_design_violation, "stacked basis-pilot matrix is rank deficient");
    const Eigen::VectorXd diag = CMat(llt.matrixL()).diagonal().real();
    if (diag.minCoeff() < 1e-8 * diag.maxCoeff())
        throw Error(ErrorKind::pilot_design_violation, "stacked basis-pilot matrix is rank deficient");
    const CMat rhs = dft_beamspace(Y) * psi.adjoint() / std::sqrt(book.power);
    return llt.solve(rhs.transpose()).transpose();
}

BemCoefficients extract_user_gamma(const CMat& gamma_hat, const SsiSet& ssi, int group_slot, int mu) {
    const int L = mu + 1;
    if (gamma_hat.cols() < (group_slot + 1) * L || group_slot < 0)
        throw Error(ErrorKind::dimension_mismatch, "group slot outside the estimate");
    BemCoefficients out{CMat::Zero(gamma_hat.rows(), L)};
    for (int b : ssi.bins()) out.gamma.row(b) = gamma_hat.block(b, group_slot * L, 1, L);
    return out;
}

DownlinkMap reciprocity_map(const SsiSet& ssi_ul, double ul_wavelength, double dl_wavelength) {
    if (!(ul_wavelength > 0.0 && dl_wavelength > 0.0)) throw Error(ErrorKind::config, "wavelengths must be positive");
    const int M = ssi_ul.modulus();
    // Scale signed electrical indices so negative angles stay negative.
    const int shift = ssi_ul.center() > M / 2 ? M : 0;
    const double r = ul_wavelength / dl_wavelength;
    const int lo = static_cast<int>(std::floor(r * (ssi_ul.lo() - shift) + 1e-9));
    int hi = static_cast<int>(std::ceil(r * (ssi_ul.hi() - shift) - 1e-9));
    hi = std::min(hi, lo + M - 1);
    int center = static_cast<int>(std::lround(r * (ssi_ul.center() - shift)));
    center = std::clamp(center, lo, hi);
    DownlinkMap map;
    map.ul_wavelength = ul_wavelength;
    map.dl_wavelength = dl_wavelength;
    map.ssi_dl = SsiSet(M, lo, hi, center);
    map.tau = map.ssi_dl.size();
    return map;
}

namespace {

void check_downlink(const CVec& v, Eigen::Index expected, const PilotBook& book, const BemConfig& bem) {
    if (bem.mu != book.mu) throw Error(ErrorKind::dimension_mismatch, "basis order differs from the pilot book");
    if (v.size() != expected) throw Error(ErrorKind::dimension_mismatch, "downlink vector length");
    if (book.T < book.streams() * bem.order())
        throw Error(ErrorKind::pilot_design_violation, "fewer pilots than downlink unknowns");
}

}  // namespace

CVec downlink_training_signal(const CVec& stacked, const PilotBook& book, const BemConfig& bem) {
    const int tau = book.streams();
    const int L = bem.order();
    check_downlink(stacked, static_cast<Eigen::Index>(tau) * L, book, bem);
    const CMat coeffs = Eigen::Map<const CMat>(stacked.data(), L, tau).transpose();  // tau x L
    const CMat v = coeffs * basis_matrix(bem, book.slots);                          // tau x T
    const double amp = std::sqrt(book.power / tau);
    return amp * v.cwiseProduct(book.sequences).colwise().sum().transpose();
}

CVec downlink_train_estimate(const CVec& y_dl, const PilotBook& book, const BemConfig& bem) {
    const int tau = book.streams();
    const int L = bem.order();
    check_downlink(y_dl, book.T, book, bem);
    // Orthogonal pilots make the normal matrix (power / tau) I, so LS is a scaled correlation.
    const CMat C = basis_matrix(bem, book.slots);
    const double scale = std::sqrt(static_cast<double>(tau) / book.power);
    CVec out(static_cast<Eigen::Index>(tau) * L);
    for (int i = 0; i < tau; ++i) {
        const CVec despread = book.sequences.row(i).adjoint().cwiseProduct(y_dl);
        out.segment(static_cast<Eigen::Index>(i) * L, L) = scale * (C.conjugate() * despread);
    }
    return out;
}

BemCoefficients assemble_downlink(const CVec& stacked, const DownlinkMap& map, const BemConfig& bem) {
    const int L = bem.order();
    const std::vector<int> bins = map.ssi_dl.bins();
    if (stacked.size() != static_cast<Eigen::Index>(bins.size()) * L)
        throw Error(ErrorKind::dimension_mismatch, "stacked length must be tau (mu + 1)");
    BemCoefficients out{CMat::Zero(map.ssi_dl.modulus(), L)};
    for (std::size_t i = 0; i < bins.size(); ++i)
        out.gamma.row(bins[i]) = stacked.segment(static_cast<Eigen::Index>(i) * L, L).transpose();
    return out;
}

}  // namespace stbem
