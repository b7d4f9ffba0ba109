// SPDX-License-Identifier: Apache-2.0
#include "acceptance/criteria.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <unsupported/Eigen/FFT>

#include "stbem/basis.hpp"
#include "stbem/channel.hpp"
#include "stbem/dynamics.hpp"
#include "stbem/experiment.hpp"
#include "stbem/pilots.hpp"
#include "stbem/ukf.hpp"

namespace stbem::acceptance {

namespace {

// Tolerances and budgets.
constexpr double kOracleTol = 1e-8;
constexpr double kOracleBudget = 10.0;
constexpr double kPilotTol = 1e-12;
constexpr double kPilotBudget = 1.0;
constexpr double kBandFraction = 0.98;
constexpr double kSpectrumBudget = 30.0;
constexpr double kFitNmse = 5e-2;
constexpr double kFitRatio = 10.0;
constexpr double kSupportTarget = 11.0;
constexpr double kSupportTol = 2.0;
constexpr double kSupportBudget = 10.0;
constexpr double kStrictShare = 0.8;
constexpr double kFloorDb = 3.0;
constexpr double kDoaBudget = 300.0;
constexpr double kMadRatio = 0.5;
constexpr double kFloorRatio = 0.5;
constexpr double kUplinkBudget = 600.0;
constexpr double kBerTarget = 1e-2;
constexpr double kBerGapDb = 1.5;
constexpr long long kMinBits = 1'000'000;
constexpr double kLikelihoodTol = 1e-9;
constexpr double kRecoveryFactor = 2.0;

using Clock = std::chrono::steady_clock;

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(4) << v;
    return os.str();
}

// Aggregate rows of a run, averaged over trials: [method][snr] -> mean value.
using Table = std::map<std::string, std::map<double, double>>;

Table mean_table(const std::vector<MetricRow>& rows) {
    std::map<std::string, std::map<double, std::pair<double, int>>> acc;
    for (const auto& r : rows)
        if (r.block < 0) {
            auto& a = acc[r.method][r.snr_db];
            a.first += r.value;
            ++a.second;
        }
    Table t;
    for (const auto& [m, by_snr] : acc)
        for (const auto& [s, a] : by_snr) t[m][s] = a.first / a.second;
    return t;
}

// [method][trial] at one SNR.
std::map<std::string, std::map<int, double>> per_trial(const std::vector<MetricRow>& rows, double snr) {
    std::map<std::string, std::map<int, double>> out;
    for (const auto& r : rows)
        if (r.block < 0 && r.snr_db == snr) out[r.method][r.trial] = r.value;
    return out;
}

std::string error_rows(const std::vector<MetricRow>& rows) {
    int n = 0;
    for (const auto& r : rows)
        if (r.method.rfind("error:", 0) == 0) ++n;
    return n ? " [" + std::to_string(n) + " pipeline errors]" : "";
}

// ---------------------------------------------------------------- linear KF / RTS oracle

struct LinearModel {
    Mat F, H, Q, Rm;
    Vec m0;
    Mat P0;
};

Mat random_spd(int n, std::mt19937_64& g, double scale) {
    std::normal_distribution<double> nd;
    Mat A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = nd(g);
    return scale * (A * A.transpose() / n + 0.2 * Mat::Identity(n, n));
}

LinearModel random_model(int R, std::mt19937_64& g) {
    std::normal_distribution<double> nd;
    LinearModel m;
    m.F = Mat(R, R);
    m.H = Mat(R, R);
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < R; ++j) {
            m.F(i, j) = nd(g) * 0.4 / std::sqrt(static_cast<double>(R));
            m.H(i, j) = nd(g);
        }
    // Stable dynamics: spectral radius in [0.5, 0.98], so the state stays O(1) and the
    // comparison measures the filter rather than cancellation in huge means.
    const double radius = Eigen::EigenSolver<Mat>(m.F).eigenvalues().cwiseAbs().maxCoeff();
    m.F *= std::uniform_real_distribution<double>(0.5, 0.98)(g) / radius;
    m.H += 0.5 * Mat::Identity(R, R);
    m.Q = random_spd(R, g, 0.3);
    m.Rm = random_spd(R, g, 0.5);
    m.m0 = Vec(R);
    for (int i = 0; i < R; ++i) m.m0[i] = nd(g);
    m.P0 = random_spd(R, g, 1.0);
    return m;
}

struct KfResult {
    std::vector<Vec> fm, pm, sm;
    std::vector<Mat> fP, pP, sP, cross;
    double ll = 0.0;
};

// Textbook KF (no predict before the first update) followed by RTS.
KfResult kalman_rts(const LinearModel& m, const std::vector<Vec>& y) {
    const std::size_t n = y.size();
    const int R = static_cast<int>(m.m0.size());
    KfResult r;
    Vec x = m.m0;
    Mat P = m.P0;
    for (std::size_t z = 0; z < n; ++z) {
        if (z > 0) {
            x = m.F * x;
            P = m.F * P * m.F.transpose() + m.Q;
        }
        r.pm.push_back(x);
        r.pP.push_back(P);
        const Mat S = m.H * P * m.H.transpose() + m.Rm;
        const Mat K = P * m.H.transpose() * S.inverse();
        const Vec v = y[z] - m.H * x;
        r.ll += -0.5 * (R * std::log(2.0 * M_PI) + std::log(S.determinant()) + v.dot(S.inverse() * v));
        x = x + K * v;
        P = P - K * S * K.transpose();
        r.fm.push_back(x);
        r.fP.push_back(P);
    }
    r.sm = r.fm;
    r.sP = r.fP;
    r.cross.assign(n, Mat::Zero(R, R));
    for (std::size_t z = n - 1; z-- > 0;) {
        const Mat Pp = m.F * r.fP[z] * m.F.transpose() + m.Q;
        const Mat G = r.fP[z] * m.F.transpose() * Pp.inverse();
        r.sm[z] = r.fm[z] + G * (r.sm[z + 1] - m.F * r.fm[z]);
        r.sP[z] = r.fP[z] + G * (r.sP[z + 1] - Pp) * G.transpose();
        r.cross[z + 1] = G * r.sP[z + 1];
    }
    return r;
}

Outcome kf_oracle() {
    std::mt19937_64 g(2024);
    double worst = 0.0;
    int instances = 0;
    for (int R : {1, 3}) {
        for (int i = 0; i < 100; ++i, ++instances) {
            const LinearModel m = random_model(R, g);
            std::normal_distribution<double> nd;
            Eigen::LLT<Mat> qc(m.Q), rc(m.Rm);
            std::vector<Vec> y;
            Vec x = m.m0;
            for (int z = 0; z < 40; ++z) {
                Vec w(R), v(R);
                for (int j = 0; j < R; ++j) {
                    w[j] = nd(g);
                    v[j] = nd(g);
                }
                if (z > 0) x = m.F * x + qc.matrixL() * w;
                y.push_back(m.H * x + rc.matrixL() * v);
            }
            const KfResult ref = kalman_rts(m, y);
            const UtConfig ut = UtConfig::standard(R);
            const StateFn sys = [&](const Vec& s) { return Vec(m.F * s); };
            const StateFn meas = [&](const Vec& s) { return Vec(m.H * s); };
            const FilterRun run = ukf_filter(y, {m.m0, m.P0}, m.Q, m.Rm, ut, meas, sys);
            const SmoothedTrajectory sm = urtss_pass(run.filtered(), m.Q, ut, sys);
            auto dev = [&](const auto& a, const auto& b) {
                worst = std::max(worst, (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff()));
            };
            for (std::size_t z = 0; z < y.size(); ++z) {
                dev(run.steps[z].predicted.mean, ref.pm[z]);
                dev(run.steps[z].predicted.cov, ref.pP[z]);
                dev(run.steps[z].updated.mean, ref.fm[z]);
                dev(run.steps[z].updated.cov, ref.fP[z]);
                dev(sm.mean[z], ref.sm[z]);
                dev(sm.cov[z], ref.sP[z]);
                if (z > 0) dev(sm.crossvar[z], ref.cross[z]);
            }
            worst = std::max(worst, std::abs(run.log_likelihood - ref.ll) / std::max(1.0, std::abs(ref.ll)));
        }
    }
    return {"", worst <= kOracleTol,
            std::to_string(instances) + " instances, max deviation " + fmt(worst) + " (tol " + fmt(kOracleTol) + ")"};
}

// ---------------------------------------------------------------- pilots

Outcome pilot_orthogonality() {
    struct Case {
        int G, mu, N;
    };
    double worst = 0.0;
    std::string sizes;
    for (const Case c : {Case{3, 4, 100}, Case{2, 2, 60}, Case{4, 6, 200}}) {
        const PilotBook book = design_pilots(c.G, c.mu, c.N, PilotMode::uplink);
        const BemConfig bem = BemConfig::make(c.mu, c.N);
        // Independent check: C S_g S_g'^H C^H from first principles.
        for (int a = 0; a < c.G; ++a)
            for (int b = 0; b < c.G; ++b) {
                CMat prod = CMat::Zero(c.mu + 1, c.mu + 1);
                for (int r = 0; r <= c.mu; ++r)
                    for (int s = 0; s <= c.mu; ++s)
                        for (int t = 0; t < book.T; ++t) {
                            const int n = book.slots[t];
                            const cplx cr = std::polar(1.0, 2.0 * M_PI * (r - c.mu / 2) * n / c.N);
                            const cplx cs = std::polar(1.0, 2.0 * M_PI * (s - c.mu / 2) * n / c.N);
                            prod(r, s) += cr * book.sequences(a, t) * std::conj(cs * book.sequences(b, t));
                        }
                const CMat target = CMat::Identity(c.mu + 1, c.mu + 1) * (a == b ? 1.0 : 0.0);
                worst = std::max(worst, (prod - target).cwiseAbs().maxCoeff());
            }
        worst = std::max(worst, orthogonality_error(book, bem));
        sizes += (sizes.empty() ? "T=" : ",") + std::to_string(book.T);
    }
    return {"", worst <= kPilotTol, sizes + ", max deviation " + fmt(worst) + " (tol " + fmt(kPilotTol) + ")"};
}

// ---------------------------------------------------------------- Doppler band of the beamspace

Outcome spectrum_bound() {
    SystemConfig cfg;
    cfg.N = 20000;
    const double band = cfg.fd;
    Eigen::FFT<double> fft;
    double worst = 1.0;
    int checked = 0;
    for (int draw = 0; draw < 4; ++draw) {
        Rng rng{7, static_cast<std::uint64_t>(draw)};
        const SpatialState sp = SpatialState::uniform(deg2rad(-40.0 + 25.0 * draw), deg2rad(2.0));
        const CMat beams = dft_beamspace(render_channel(cfg, draw_rays(cfg, sp, rng)));
        const SsiSet ssi = ssi_from_angles(cfg, sp);
        // 4-term Blackman-Harris window keeps sidelobe leakage far below 2 %.
        std::vector<double> win(cfg.N);
        for (int n = 0; n < cfg.N; ++n) {
            const double x = 2.0 * M_PI * n / (cfg.N - 1);
            win[n] = 0.35875 - 0.48829 * std::cos(x) + 0.14128 * std::cos(2 * x) - 0.01168 * std::cos(3 * x);
        }
        const double df = 1.0 / (cfg.N * cfg.Ts);
        const double slack = 4.0 * df;  // window main-lobe half width
        for (int q : ssi.bins()) {
            std::vector<cplx> series(cfg.N), spec;
            for (int n = 0; n < cfg.N; ++n) series[n] = beams(q, n) * win[n];
            fft.fwd(spec, series);
            double inside = 0.0, total = 0.0;
            for (int k = 0; k < cfg.N; ++k) {
                const double f = (k <= cfg.N / 2 ? k : k - cfg.N) * df;
                const double p = std::norm(spec[k]);
                total += p;
                if (std::abs(f) <= band + slack) inside += p;
            }
            worst = std::min(worst, inside / total);
            ++checked;
        }
    }
    return {"", worst >= kBandFraction,
            std::to_string(checked) + " bins, min in-band fraction " + fmt(worst) + " (need " + fmt(kBandFraction) + ")"};
}

// ---------------------------------------------------------------- CE-BEM order

// Per-bin NMSE of an LS fit of the beamspace rows onto the centred exponential basis.
std::vector<double> fit_nmse(const CMat& beams, const std::vector<int>& rows, int mu, int N) {
    CMat basis(N, mu + 1);
    for (int n = 0; n < N; ++n)
        for (int r = 0; r <= mu; ++r) basis(n, r) = std::polar(1.0, 2.0 * M_PI * (r - mu / 2) * n / N);
    const Eigen::HouseholderQR<CMat> qr(basis);
    std::vector<double> out;
    for (int q : rows) {
        const CVec y = beams.row(q).transpose();
        const CVec coef = qr.solve(y);
        out.push_back((basis * coef - y).squaredNorm() / y.squaredNorm());
    }
    return out;
}

Outcome cebem_order() {
    SystemConfig cfg;
    // Per-bin NMSE averaged over seeds; bins are indexed by their offset from the SSI centre.
    std::map<int, std::pair<double, int>> by_offset;
    double sum4 = 0.0, sum2 = 0.0, lib_dev = 0.0;
    int bins = 0;
    for (int seed = 0; seed < 20; ++seed) {
        Rng rng{11, static_cast<std::uint64_t>(seed)};
        const SpatialState sp = SpatialState::uniform(deg2rad(rng.uniform(-50.0, 50.0)), deg2rad(2.0));
        const CMat h = render_channel(cfg, draw_rays(cfg, sp, rng));
        const CMat beams = dft_beamspace(h);
        const SsiSet ssi = ssi_from_angles(cfg, sp);
        const std::vector<int> rows = ssi.bins();
        const auto e4 = fit_nmse(beams, rows, 4, cfg.N);
        const auto e2 = fit_nmse(beams, rows, 2, cfg.N);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            auto& slot = by_offset[ssi.lo() + static_cast<int>(i) - ssi.center()];
            slot.first += e4[i];
            ++slot.second;
            sum4 += e4[i];
            sum2 += e2[i];
            ++bins;
        }
        // Library fit must match the oracle fit.
        const BemConfig bem = BemConfig::make(4, cfg.N);
        const CMat approx = fit_channel(h, bem).gamma * basis_matrix(bem);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const int q = rows[i];
            const double e = (approx.row(q) - beams.row(q)).squaredNorm() / beams.row(q).squaredNorm();
            lib_dev = std::max(lib_dev, std::abs(e - e4[i]));
        }
    }
    double worst4 = 0.0;
    for (const auto& [off, acc] : by_offset) worst4 = std::max(worst4, acc.first / acc.second);
    const double mean4 = sum4 / bins, mean2 = sum2 / bins;
    const bool pass = worst4 <= kFitNmse && mean4 <= mean2 / kFitRatio && lib_dev < 1e-9;
    return {"", pass,
            std::to_string(bins) + " bins: worst per-bin mean NMSE(mu=4) " + fmt(worst4) + " (need <= " +
                fmt(kFitNmse) + "), mean NMSE mu=4/mu=2 " + fmt(mean4) + "/" + fmt(mean2) + " (need ratio >= " +
                fmt(kFitRatio) + "), library vs oracle " + fmt(lib_dev)};
}

// ---------------------------------------------------------------- support concentration

Outcome support_concentration() {
    SystemConfig cfg;
    double sum = 0.0;
    const int draws = 100;
    for (int d = 0; d < draws; ++d) {
        Rng rng{13, static_cast<std::uint64_t>(d)};
        // Rays spread over [27, 29] degrees.
        const SpatialState sp = SpatialState::uniform(deg2rad(28.0), deg2rad(1.0));
        const CMat h = render_channel(cfg, draw_rays(cfg, sp, rng));
        sum += support_size(beam_power(h), 0.95);
    }
    const double mean = sum / draws;
    return {"", std::abs(mean - kSupportTarget) <= kSupportTol,
            "mean 95% support " + fmt(mean) + " bins (need " + fmt(kSupportTarget) + " +- " + fmt(kSupportTol) + ")"};
}

// ---------------------------------------------------------------- scenario runs

RunResult run(Scenario s, std::vector<double> snr, int trials, std::function<void(ExperimentSpec&)> tweak = {}) {
    ExperimentSpec spec;
    spec.scenario = s;
    spec.snr_grid = std::move(snr);
    spec.n_trials = trials;
    spec.per_block_rows = false;
    if (tweak) tweak(spec);
    return run_experiment(spec, SystemConfig{});
}

Outcome doa_ordering() {
    const int trials = 50;
    const RunResult r = run(Scenario::doa_track, {10.0, 20.0, 30.0}, trials);
    auto at10 = per_trial(r.rows, 10.0);
    int em_lt_noem = 0, noem_lt_dft = 0, n = 0;
    for (const auto& [t, em] : at10["em_ukf"]) {
        if (!at10["no_em"].count(t) || !at10["dft_search"].count(t)) continue;
        ++n;
        em_lt_noem += em < at10["no_em"][t];
        noem_lt_dft += at10["no_em"][t] < at10["dft_search"][t];
    }
    const Table tab = mean_table(r.rows);
    auto mse = [&](const char* m, double s) {
        double acc = 0.0;
        int c = 0;
        for (const auto& row : r.rows)
            if (row.block < 0 && row.method == m && row.snr_db == s) {
                acc += row.value * row.value;
                ++c;
            }
        return c ? acc / c : NAN;
    };
    const double floor_db = 10.0 * std::log10(mse("em_ukf", 30.0) / mse("em_ukf", 20.0));
    const double em = tab.at("em_ukf").at(10.0), noem = tab.at("no_em").at(10.0), dft = tab.at("dft_search").at(10.0);
    const bool pass = n == trials && em <= noem && noem <= dft && em_lt_noem >= kStrictShare * trials &&
                      noem_lt_dft >= kStrictShare * trials && std::abs(floor_db) <= kFloorDb;
    return {"", pass,
            "RMSE deg em/no_em/dft " + fmt(em) + "/" + fmt(noem) + "/" + fmt(dft) + ", strict " +
                std::to_string(em_lt_noem) + "," + std::to_string(noem_lt_dft) + " of " + std::to_string(n) +
                ", 30 vs 20 dB " + fmt(floor_db) + " dB" + error_rows(r.rows)};
}

Outcome as_tracking() {
    const RunResult r = run(Scenario::as_track, {10.0}, 10);
    const Table tab = mean_table(r.rows);
    const double taylor = tab.at("taylor_mad").at(10.0), dft = tab.at("dft_search_mad").at(10.0);
    return {"", taylor <= kMadRatio * dft,
            "MAD taylor " + fmt(taylor) + " vs dft_search " + fmt(dft) + " bins" + error_rows(r.rows)};
}

Outcome uplink_ordering() {
    const RunResult r = run(Scenario::ul_mse, {10.0, 20.0, 30.0}, 6);
    const Table tab = mean_table(r.rows);
    const double tracked = tab.at("stbem").at(10.0), aging = tab.at("aging").at(10.0);
    bool pass = true;
    std::string fixed;
    for (const auto& [name, by] : tab)
        if (name.rfind("fixed_upsilon_", 0) == 0) {
            const double v = by.at(10.0);
            pass = pass && tracked < v && v < aging;
            fixed += " " + name.substr(14) + ":" + fmt(v);
        }
    const double floor = tab.at("stbem").at(30.0) / tab.at("stbem").at(20.0);
    pass = pass && !fixed.empty() && floor >= kFloorRatio;
    return {"", pass,
            "MSE@10dB tracked " + fmt(tracked) + ", fixed" + fixed + ", aging " + fmt(aging) + "; 30/20 dB ratio " +
                fmt(floor) + error_rows(r.rows)};
}

Outcome downlink_efficiency() {
    const RunResult r = run(Scenario::dl_mse, {-10.0, -5.0, 0.0}, 2, [](ExperimentSpec& s) { s.n_blocks = 20; });
    const Table tab = mean_table(r.rows);
    bool pass = true;
    std::string detail;
    for (double s : {-10.0, -5.0, 0.0}) {
        const double st = tab.at("stbem_k4").at(s), ls = tab.at("conventional_ls").at(s);
        pass = pass && st < ls;
        detail += fmt(s) + "dB " + fmt(st) + " vs " + fmt(ls) + "; ";
    }
    return {"", pass, "MSE stbem(T=kappa/4) vs LS: " + detail + error_rows(r.rows)};
}

// SNR at which log10 BER crosses the target, linear interpolation; NaN if never.
double crossing(const std::map<double, double>& ber, double target) {
    auto prev = ber.end();
    for (auto it = ber.begin(); it != ber.end(); prev = it++) {
        if (it->second > target) continue;
        if (prev == ber.end()) return it->first;
        const double a = std::log10(std::max(prev->second, 1e-12)), b = std::log10(std::max(it->second, 1e-12));
        const double t = (std::log10(target) - a) / (b - a);
        return prev->first + t * (it->first - prev->first);
    }
    return NAN;
}

Outcome ber_link() {
    std::vector<double> grid;
    for (double s = -20.0; s <= 4.0; s += 2.0) grid.push_back(s);
    const RunResult r = run(Scenario::ber, grid, 2, [](ExperimentSpec& s) {
        s.n_blocks = 10;
        s.min_bits = kMinBits;
    });
    const long long bits = r.manifest.bits_per_point;
    const Table tab = mean_table(r.rows);
    const double perfect = crossing(tab.at("perfect_csi"), kBerTarget);
    const double tracked = crossing(tab.at("stbem"), kBerTarget);
    const double gap = tracked - perfect;
    bool beats_ls = true;
    for (const auto& [s, v] : tab.at("stbem"))
        if (s <= 0.0) beats_ls = beats_ls && v <= tab.at("conventional_ls").at(s);
    const bool pass = bits >= kMinBits && std::isfinite(gap) && gap <= kBerGapDb && beats_ls;
    std::string curve;
    for (const auto& [s, v] : tab.at("stbem")) curve += fmt(s) + ":" + fmt(v) + "/" + fmt(tab.at("perfect_csi").at(s)) + " ";
    return {"", pass,
            std::to_string(bits) + " bits/point, BER=1e-2 at " + fmt(tracked) + " dB vs perfect " + fmt(perfect) +
                " dB (gap " + fmt(gap) + "), beats LS at <=0 dB: " + (beats_ls ? "yes" : "no") + "; tracked/perfect " +
                curve + error_rows(r.rows)};
}

// ---------------------------------------------------------------- EM

ObservationVector synth_track(const NoiseParams& truth, const DoaModel& model, int blocks, Rng& rng) {
    ObservationVector obs{Vec(blocks)};
    double theta = model.prior_mean;
    for (int z = 0; z < blocks; ++z) {
        if (z > 0) theta = markov_step(theta, truth.q_omega, rng);
        obs.q_obs[z] = model.measure(theta) + std::sqrt(truth.q_u) * rng.normal();
    }
    return obs;
}

Outcome em_behavior() {
    const NoiseParams planted{std::pow(deg2rad(0.05), 2), 0.5};
    double worst_drop = 0.0;
    for (int run = 0; run < 20; ++run) {
        Rng rng{17, static_cast<std::uint64_t>(run)};
        DoaModel model = DoaModel::from_initial_bin(64.0, rng.uniform(-40.0, 40.0));
        const ObservationVector obs = synth_track(planted, model, 100, rng);
        const EmResult res = em_learn(obs, NoiseParams{}, model, EmOptions{300, 1e-6});
        for (std::size_t i = 1; i < res.log_likelihood.size(); ++i)
            worst_drop = std::max(worst_drop, res.log_likelihood[i - 1] - res.log_likelihood[i]);
    }

    // Recovery at 500 blocks with the 80 km/h random walk. Single-run MLEs scatter widely at
    // this process-to-measurement noise ratio, so the median over runs is compared.
    const double step = 80.0 / 3.6 * SystemConfig{}.block_duration() / 500.0;
    const NoiseParams truth{step * step, 0.25};
    std::vector<double> r_omega, r_u;
    int within = 0;
    const int runs = 20;
    for (int run = 0; run < runs; ++run) {
        Rng rng{19, static_cast<std::uint64_t>(run)};
        DoaModel model = DoaModel::from_initial_bin(64.0, rng.uniform(-40.0, 40.0));
        const ObservationVector obs = synth_track(truth, model, 500, rng);
        const EmResult res = em_learn(obs, NoiseParams{}, model, EmOptions{5000, 1e-7});
        r_omega.push_back(res.params.q_omega / truth.q_omega);
        r_u.push_back(res.params.q_u / truth.q_u);
        auto ok = [](double r) { return r >= 1.0 / kRecoveryFactor && r <= kRecoveryFactor; };
        within += ok(r_omega.back()) && ok(r_u.back());
    }
    auto median = [](std::vector<double> v) {
        std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
        return v[v.size() / 2];
    };
    const double mo = median(r_omega), mu = median(r_u);
    auto inside = [](double r) { return r >= 1.0 / kRecoveryFactor && r <= kRecoveryFactor; };
    const bool pass = worst_drop <= kLikelihoodTol && inside(mo) && inside(mu);
    return {"", pass,
            "max log-likelihood drop " + fmt(worst_drop) + " (tol " + fmt(kLikelihoodTol) +
                "); 500-block recovery median ratio q_omega " + fmt(mo) + ", q_u " + fmt(mu) + " (need within x" +
                fmt(kRecoveryFactor) + "), runs with both within x2: " + std::to_string(within) + "/" +
                std::to_string(runs)};
}

struct Entry {
    const char* name;
    Outcome (*fn)();
    double budget;  // seconds, 0 = none
};

const std::vector<Entry>& registry() {
    static const std::vector<Entry> r{
        {"kf_oracle", kf_oracle, kOracleBudget},
        {"pilot_orthogonality", pilot_orthogonality, kPilotBudget},
        {"spectrum_bound", spectrum_bound, kSpectrumBudget},
        {"cebem_order", cebem_order, 0.0},
        {"support_concentration", support_concentration, kSupportBudget},
        {"doa_ordering", doa_ordering, kDoaBudget},
        {"as_tracking", as_tracking, 0.0},
        {"uplink_ordering", uplink_ordering, kUplinkBudget},
        {"downlink_efficiency", downlink_efficiency, 0.0},
        {"ber_link", ber_link, 0.0},
        {"em_behavior", em_behavior, 0.0},
    };
    return r;
}

}  // namespace

std::vector<std::string> criterion_names() {
    std::vector<std::string> out;
    for (const auto& e : registry()) out.emplace_back(e.name);
    return out;
}

Outcome run_criterion(const std::string& name) {
    for (const auto& e : registry()) {
        if (name != e.name) continue;
        const auto start = Clock::now();
        Outcome o;
        try {
            o = e.fn();
        } catch (const std::exception& ex) {
            o = {"", false, std::string("threw: ") + ex.what()};
        }
        o.name = e.name;
        o.seconds = std::chrono::duration<double>(Clock::now() - start).count();
        if (e.budget > 0.0 && o.seconds > e.budget) {
            o.pass = false;
            o.detail += "; over the " + fmt(e.budget) + " s budget";
        }
        return o;
    }
    throw std::invalid_argument("unknown criterion '" + name + "'");
}

int run_suite(const std::string& filter, std::ostream& os) {
    int failed = 0, ran = 0;
    for (const auto& name : criterion_names()) {
        if (name.find(filter) == std::string::npos) continue;
        const Outcome o = run_criterion(name);
        ++ran;
        failed += !o.pass;
        os << (o.pass ? "PASS " : "FAIL ") << o.name << ": " << o.detail << " [" << fmt(o.seconds) << " s]"
           << std::endl;
    }
    if (ran == 0) throw std::invalid_argument("no criterion matches '" + filter + "'");
    return failed;
}

}  // namespace stbem::acceptance
