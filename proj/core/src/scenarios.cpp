// SPDX-License-Identifier: Apache-2.0
#include "scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>

#include "stbem/angular_spread.hpp"
#include "stbem/errors.hpp"

namespace stbem::detail {

namespace {

// Substream tags.
constexpr std::uint64_t kWorldStream = 1;
constexpr std::uint64_t kRayStream = 6;
constexpr std::uint64_t kUplinkDataStream = 2;
constexpr std::uint64_t kUplinkPilotStream = 3;
constexpr std::uint64_t kDownlinkPilotStream = 4;
constexpr std::uint64_t kDownlinkDataStream = 5;

double snr_to_noise(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

cplx qpsk(int b0, int b1) {
    constexpr double a = 0.70710678118654752440;
    return {a * (1 - 2 * b0), a * (1 - 2 * b1)};
}

// Signed electrical bin: negative angles stay negative.
int signed_bin(int bin, int M) { return bin > M / 2 ? bin - M : bin; }

Vec row_power(const CMat& beams) { return beams.cwiseAbs2().rowwise().mean(); }

struct World {
    const RunPlan* plan = nullptr;
    int trial = 0;
    int n_blocks = 0;
    std::vector<std::vector<double>> doa;                    // [block][user]
    std::vector<double> initial_doa;
    std::vector<double> initial_bin;  // signed line
    std::vector<SsiSet> initial_ssi;
    GroupPlan groups;
    std::vector<int> group_of;

    const SystemConfig& cfg() const { return plan->cfg; }
    const ExperimentSpec& spec() const { return plan->spec; }
    int K() const { return plan->cfg.K; }

    // Beamspace channels F h, M x N per user.
    std::vector<CMat> uplink_beams(int block) const { return beams(cfg(), block); }
    // Downlink frame: M x kappa.
    std::vector<CMat> downlink_beams(int block) const { return beams(plan->dl_cfg, block); }

    std::vector<CMat> beams(const SystemConfig& geo, int block) const {
        std::vector<CMat> g;
        g.reserve(K());
        for (int k = 0; k < K(); ++k) g.push_back(render_beamspace(geo, rays_at(geo, block, k)));
        return g;
    }

    // Fresh rays every block around the current central DOA. Keyed by (block, user) so the
    // uplink and downlink renders of one block see the same scatterers.
    std::vector<RayParams> rays_at(const SystemConfig& geo, int block, int k) const {
        Rng rng{cfg().seed, static_cast<std::uint64_t>(trial), kRayStream, static_cast<std::uint64_t>(block),
                static_cast<std::uint64_t>(k)};
        return draw_rays(geo, SpatialState::uniform(doa[block][k], deg2rad(spec().max_as_deg)), rng);
    }
};

int blocks_for(const RunPlan& plan) {
    const auto& spec = plan.spec;
    if (spec.scenario != Scenario::ber) return spec.n_blocks;
    const long long bits_per_block = 2LL * plan.cfg.K * plan.dl_cfg.N;
    const long long per_trial = (spec.min_bits + spec.n_trials - 1) / spec.n_trials;
    const long long needed = (per_trial + bits_per_block - 1) / bits_per_block;
    return static_cast<int>(std::max<long long>(spec.n_blocks, needed));
}

std::vector<double> draw_initial_doas(const SystemConfig& cfg, Rng& rng) {
    const int n_clusters = std::min(4, cfg.K);
    std::vector<double> centers;
    for (int attempt = 0; attempt < 100000 && static_cast<int>(centers.size()) < n_clusters; ++attempt) {
        if (attempt % 1000 == 0) centers.clear();
        const double c = deg2rad(rng.uniform(-60.0, 60.0));
        const bool separated = std::all_of(centers.begin(), centers.end(),
                                           [c](double o) { return std::abs(o - c) >= deg2rad(15.0); });
        if (separated) centers.push_back(c);
    }
    std::vector<double> doa(cfg.K);
    for (int k = 0; k < cfg.K; ++k) doa[k] = centers[k % n_clusters] + deg2rad(rng.uniform(-3.0, 3.0));
    return doa;
}

World build_world(const RunPlan& plan, int trial) {
    const SystemConfig& cfg = plan.cfg;
    const ExperimentSpec& spec = plan.spec;
    World w;
    w.plan = &plan;
    w.trial = trial;
    w.n_blocks = blocks_for(plan);
    Rng rng{cfg.seed, static_cast<std::uint64_t>(trial), kWorldStream};

    w.initial_doa = draw_initial_doas(cfg, rng);
    const double max_as = deg2rad(spec.max_as_deg);
    const double limit = kPi / 2 - max_as - 0.05;
    w.doa.assign(w.n_blocks, w.initial_doa);
    for (int z = 1; z < w.n_blocks; ++z)
        for (int k = 0; k < cfg.K; ++k)
            w.doa[z][k] = std::clamp(markov_step(w.doa[z - 1][k], plan.q_truth, rng), -limit, limit);

    // Initial SSI sets from a noiseless DFT search of block 0.
    const auto b0 = w.uplink_beams(0);
    for (int k = 0; k < cfg.K; ++k) {
        const Vec power = row_power(b0[k]);
        Eigen::Index peak = 0;
        power.maxCoeff(&peak);
        const int anchor = static_cast<int>(peak);
        w.initial_bin.push_back(signed_bin(anchor, cfg.M));
        w.initial_ssi.push_back(ssi_from_profile(power, anchor, spec.eta));
    }
    w.groups = group_users(w.initial_ssi, GroupingConfig{spec.guard, std::nullopt});
    w.group_of.assign(cfg.K, -1);
    for (int g = 0; g < w.groups.count(); ++g)
        for (int k : w.groups.groups[g]) w.group_of[k] = g;
    return w;
}

// Received block of one group in beamspace: QPSK data from each member plus noise. The DFT
// is unitary, so white noise drawn here is white noise at the antennas too.
CMat group_received(const World& w, const std::vector<CMat>& beams, int g, double noise_var, Rng& rng) {
    const SystemConfig& cfg = w.cfg();
    CMat x = CMat::Zero(cfg.M, cfg.N);
    for (int k : w.groups.groups[g]) {
        CVec s(cfg.N);
        for (int n = 0; n < cfg.N; ++n) s[n] = qpsk(rng.integer(0, 1), rng.integer(0, 1));
        x += beams[k] * s.asDiagonal();
    }
    if (noise_var > 0.0)
        for (Eigen::Index n = 0; n < x.cols(); ++n)
            for (Eigen::Index m = 0; m < x.rows(); ++m) x(m, n) += rng.cnormal(noise_var);
    return x;
}

// Tracking chain at one uplink SNR.
struct Tracking {
    int snr_idx = 0;
    double snr_db = 0.0;
    double noise_var = 0.0;
    bool alive = true;
    std::string error_kind;
    std::string error;
    std::vector<std::string> dropouts;  // user-blocks observed below the no-signal threshold

    std::vector<DoaModel> model;
    std::vector<double> f_mean, f_var;
    std::vector<Vec> obs;                       // [user][block]
    std::vector<std::vector<int>> window;       // [user][block]
    std::vector<NoiseParams> learned;
    std::vector<DoaTrack> em, noem;
    std::vector<std::vector<double>> sigma2, dtheta_raw, dtheta;
    std::vector<std::vector<int>> ssi_dft, ssi_ref;
    std::vector<std::vector<SsiSet>> ssi;       // tracked, [user][block]
    std::vector<std::vector<double>> obs_trace_pred;  // online predicted bin, [user][block]

    void fail(const Error& e) {
        alive = false;
        error_kind = std::string(to_string(e.kind()));
        error = e.what();
    }
};

Tracking make_tracking(const World& w, int snr_idx, double snr_db) {
    const SystemConfig& cfg = w.cfg();
    Tracking t;
    t.snr_idx = snr_idx;
    t.snr_db = snr_db;
    t.noise_var = snr_to_noise(snr_db);
    for (int k = 0; k < cfg.K; ++k) {
        DoaModel m = DoaModel::from_initial_bin(cfg.bin_scale(), w.initial_bin[k]);
        m.round_measurement = w.spec().round_measurement;
        t.model.push_back(m);
        t.f_mean.push_back(m.prior_mean);
        t.f_var.push_back(m.prior_var);
    }
    t.obs.assign(cfg.K, Vec::Zero(w.n_blocks));
    t.window.assign(cfg.K, std::vector<int>(w.n_blocks, w.spec().window));
    t.obs_trace_pred.assign(cfg.K, std::vector<double>(w.n_blocks, 0.0));
    return t;
}

Rng uplink_data_rng(const World& w, const Tracking& t, int block, int g) {
    return Rng{w.cfg().seed, static_cast<std::uint64_t>(w.trial), kUplinkDataStream,
               static_cast<std::uint64_t>(t.snr_idx), static_cast<std::uint64_t>(block), static_cast<std::uint64_t>(g)};
}

void observe_block(const World& w, Tracking& t, int z, const std::vector<CMat>& beams) {
    const SystemConfig& cfg = w.cfg();
    const double c = cfg.bin_scale();
    const NoiseParams init{};
    for (int g = 0; g < w.groups.count(); ++g) {
        const auto& members = w.groups.groups[g];
        std::vector<double> center;
        for (int k : members) center.push_back(z == 0 ? w.initial_bin[k] : c * std::sin(t.f_mean[k]));
        Rng rng = uplink_data_rng(w, t, z, g);
        const Vec power = row_power(group_received(w, beams, g, t.noise_var, rng));
        for (std::size_t i = 0; i < members.size(); ++i) {
            const int k = members[i];
            // Keep the search away from the neighbours' peaks.
            int win = w.spec().window;
            for (std::size_t j = 0; j < members.size(); ++j)
                if (j != i) win = std::min(win, static_cast<int>(std::abs(center[i] - center[j]) / 2.0));
            win = std::max(win, 1);
            t.window[k][z] = win;
            t.obs_trace_pred[k][z] = center[i];
            double q = 0.0;
            try {
                q = observe_central_ssi(power, center[i], win);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::no_signal) throw;
                // A faded user in a crowded group: coast on the prediction for this block.
                if (z > 0) t.f_var[k] += init.q_omega;
                t.obs[k][z] = t.model[k].measure(t.f_mean[k]);
                t.dropouts.push_back("user " + std::to_string(k) + " block " + std::to_string(z));
                continue;
            }
            t.obs[k][z] = q;
            const DoaStep s = doa_filter_step(t.f_mean[k], t.f_var[k], q, init, t.model[k], z > 0);
            t.f_mean[k] = s.mean;
            t.f_var[k] = s.var;
        }
    }
}

void learn(const World& w, Tracking& t) {
    const EmOptions opts{w.spec().em_max_iters, w.spec().em_tol};
    for (int k = 0; k < w.K(); ++k) {
        const ObservationVector ov{t.obs[k]};
        const EmResult r = em_learn(ov, NoiseParams{}, t.model[k], opts);
        t.learned.push_back(r.params);
        t.em.push_back(track_doa(ov, r.params, t.model[k]));
        t.noem.push_back(track_doa(ov, NoiseParams{}, t.model[k]));
    }
}

void spread_block(const World& w, Tracking& t, int z, const std::vector<CMat>& beams) {
    const SystemConfig& cfg = w.cfg();
    if (z == 0) {
        t.sigma2.assign(cfg.K, std::vector<double>(w.n_blocks, 0.0));
        t.dtheta_raw.assign(cfg.K, std::vector<double>(w.n_blocks, 0.0));
        t.ssi_dft.assign(cfg.K, std::vector<int>(w.n_blocks, 0));
        t.ssi_ref.assign(cfg.K, std::vector<int>(w.n_blocks, 0));
    }
    for (int g = 0; g < w.groups.count(); ++g) {
        const auto& members = w.groups.groups[g];
        Rng rng = uplink_data_rng(w, t, z, g);
        const CMat xb = group_received(w, beams, g, t.noise_var, rng);
        const SampleCovariance cov = sample_covariance(idft_beamspace(xb));
        std::vector<double> thetas;
        for (int k : members) thetas.push_back(t.em[k].smooth_mean[z]);
        const double noise =
            w.spec().estimate_noise ? estimate_noise_floor(cov, static_cast<int>(members.size())) : t.noise_var;
        const SpreadEstimate est = estimate_sigma(cov, thetas, cfg, noise);
        const Vec power = row_power(xb);
        for (std::size_t i = 0; i < members.size(); ++i) {
            const int k = members[i];
            t.sigma2[k][z] = est.sigma2[static_cast<Eigen::Index>(i)];
            t.dtheta_raw[k][z] = est.delta_theta[static_cast<Eigen::Index>(i)];
            const int anchor = static_cast<int>(std::lround(t.obs[k][z]));
            t.ssi_dft[k][z] = ssi_from_profile(power, anchor, w.spec().eta, t.window[k][z]).size();
            t.ssi_ref[k][z] = support_size(row_power(beams[k]), w.spec().eta);
        }
    }
}

void finish_spread(const World& w, Tracking& t) {
    const SystemConfig& cfg = w.cfg();
    t.dtheta.resize(cfg.K);
    t.ssi.assign(cfg.K, {});
    for (int k = 0; k < cfg.K; ++k) {
        t.dtheta[k] = moving_median(t.dtheta_raw[k], 3);
        for (int z = 0; z < w.n_blocks; ++z)
            t.ssi[k].push_back(
                ssi_with_leakage(cfg, SpatialState::uniform(t.em[k].smooth_mean[z], t.dtheta[k][z]), w.spec().eta));
    }
}

enum class Depth { doa, spread };

// Runs the tracking chain for every pipeline; errors disable only the affected pipeline.
void run_tracking(const World& w, std::vector<Tracking>& ts, Depth depth) {
    for (int z = 0; z < w.n_blocks; ++z) {
        const auto beams = w.uplink_beams(z);
        for (auto& t : ts) {
            if (!t.alive) continue;
            try {
                observe_block(w, t, z, beams);
            } catch (const Error& e) {
                t.fail(Error(e.kind(), "block " + std::to_string(z) + ": " + e.what()));
            }
        }
    }
    for (auto& t : ts) {
        if (!t.alive) continue;
        try {
            learn(w, t);
        } catch (const Error& e) {
            t.fail(e);
        }
    }
    if (depth == Depth::doa) return;
    for (int z = 0; z < w.n_blocks; ++z) {
        bool any = false;
        for (const auto& t : ts) any = any || t.alive;
        if (!any) break;
        const auto beams = w.uplink_beams(z);
        for (auto& t : ts) {
            if (!t.alive) continue;
            try {
                spread_block(w, t, z, beams);
            } catch (const Error& e) {
                t.fail(Error(e.kind(), "block " + std::to_string(z) + ": " + e.what()));
            }
        }
    }
    for (auto& t : ts) {
        if (!t.alive) continue;
        try {
            finish_spread(w, t);
        } catch (const Error& e) {
            t.fail(e);
        }
    }
}

struct RowSink {
    const World* w;
    std::vector<MetricRow>* rows;
    void add(double snr_db, int block, const std::string& method, double value) const {
        rows->push_back({to_string(w->spec().scenario), snr_db, block, method, w->trial, value});
    }
};

// ---------------------------------------------------------------- doa_track

void score_doa(const World& w, const std::vector<Tracking>& ts, const RowSink& sink) {
    const double c = w.cfg().bin_scale();
    for (const auto& t : ts) {
        if (!t.alive) continue;
        struct Method {
            std::string name;
            std::function<double(int, int)> estimate;
        };
        std::vector<Method> methods{{"em_ukf", [&](int k, int z) { return t.em[k].smooth_mean[z]; }}};
        if (w.spec().wants("no_em")) methods.push_back({"no_em", [&](int k, int z) { return t.noem[k].smooth_mean[z]; }});
        if (w.spec().wants("dft_search"))
            methods.push_back({"dft_search", [&](int k, int z) { return std::asin(std::clamp(t.obs[k][z] / c, -1.0, 1.0)); }});
        for (const auto& m : methods) {
            double total = 0.0;
            for (int z = 0; z < w.n_blocks; ++z) {
                double block = 0.0;
                for (int k = 0; k < w.K(); ++k) {
                    const double e = rad2deg(m.estimate(k, z) - w.doa[z][k]);
                    block += e * e;
                }
                total += block;
                if (w.spec().per_block_rows) sink.add(t.snr_db, z, m.name, std::sqrt(block / w.K()));
            }
            sink.add(t.snr_db, -1, m.name, std::sqrt(total / (w.K() * w.n_blocks)));
        }
    }
}

// ---------------------------------------------------------------- as_track

void score_spread(const World& w, const std::vector<Tracking>& ts, const RowSink& sink) {
    for (const auto& t : ts) {
        if (!t.alive) continue;
        double mad_taylor = 0.0, mad_dft = 0.0;
        for (int z = 0; z < w.n_blocks; ++z) {
            double taylor = 0.0, dft = 0.0, ref = 0.0;
            for (int k = 0; k < w.K(); ++k) {
                taylor += t.ssi[k][z].size();
                dft += t.ssi_dft[k][z];
                ref += t.ssi_ref[k][z];
                mad_taylor += std::abs(t.ssi[k][z].size() - t.ssi_ref[k][z]);
                mad_dft += std::abs(t.ssi_dft[k][z] - t.ssi_ref[k][z]);
            }
            if (w.spec().per_block_rows) {
                sink.add(t.snr_db, z, "taylor", taylor / w.K());
                if (w.spec().wants("dft_search")) sink.add(t.snr_db, z, "dft_search", dft / w.K());
                sink.add(t.snr_db, z, "reference", ref / w.K());
            }
        }
        const double n = static_cast<double>(w.K()) * w.n_blocks;
        sink.add(t.snr_db, -1, "taylor_mad", mad_taylor / n);
        if (w.spec().wants("dft_search")) sink.add(t.snr_db, -1, "dft_search_mad", mad_dft / n);
    }
}

// ---------------------------------------------------------------- ul_mse

SsiSet tracked_center_set(const World& w, const Tracking& t, int k, int z, int size) {
    const int center = static_cast<int>(std::lround(w.cfg().bin_scale() * std::sin(t.em[k].smooth_mean[z])));
    return SsiSet::centered(w.cfg().M, center, size);
}

void run_uplink(const World& w, std::vector<Tracking>& ts, const PilotBook& book, const RowSink& sink) {
    const SystemConfig& cfg = w.cfg();
    const BemConfig& bem = w.plan->bem;
    const ExperimentSpec& spec = w.spec();

    std::vector<std::string> names{"stbem"};
    if (spec.wants("fixed_upsilon"))
        for (int u : spec.fixed_upsilon) names.push_back("fixed_upsilon_" + std::to_string(u));
    if (spec.wants("aging")) names.push_back("aging");
    if (spec.wants("sbem_static")) names.push_back("sbem_static");

    // [pipeline][method] running sums over blocks.
    std::vector<std::vector<double>> totals(ts.size(), std::vector<double>(names.size(), 0.0));
    std::vector<std::vector<CMat>> aging(ts.size());

    for (int z = 0; z < w.n_blocks; ++z) {
        // Scored in beamspace: the unitary DFT leaves the per-slot error ratio unchanged.
        const auto beams = w.uplink_beams(z);
        for (std::size_t p = 0; p < ts.size(); ++p) {
            Tracking& t = ts[p];
            if (!t.alive) continue;
            try {
                Rng rng{cfg.seed, static_cast<std::uint64_t>(w.trial), kUplinkPilotStream,
                        static_cast<std::uint64_t>(t.snr_idx), static_cast<std::uint64_t>(z)};
                const double amp = std::sqrt(book.power);
                CMat Yb = CMat::Zero(cfg.M, book.T);
                for (int k = 0; k < cfg.K; ++k)
                    for (int i = 0; i < book.T; ++i)
                        Yb.col(i) += amp * book.sequences(w.group_of[k], i) * beams[k].col(book.slots[i]);
                for (Eigen::Index i = 0; i < Yb.cols(); ++i)
                    for (Eigen::Index m = 0; m < Yb.rows(); ++m) Yb(m, i) += rng.cnormal(t.noise_var);
                const CMat gamma_hat = ls_estimate_gamma(idft_beamspace(Yb), book, bem);

                auto estimate = [&](int k, const SsiSet& s) {
                    return stbem_beamspace_block(extract_user_gamma(gamma_hat, s, w.group_of[k], bem.mu), s, bem);
                };
                std::vector<std::vector<CMat>> est(names.size());
                for (int k = 0; k < cfg.K; ++k) {
                    std::size_t m = 0;
                    est[m++].push_back(estimate(k, t.ssi[k][z]));
                    if (spec.wants("fixed_upsilon"))
                        for (int u : spec.fixed_upsilon) est[m++].push_back(estimate(k, tracked_center_set(w, t, k, z, u)));
                    if (spec.wants("aging")) {
                        if (z == 0) aging[p].push_back(est[0].back());
                        est[m++].push_back(aging[p][k]);
                    }
                    if (spec.wants("sbem_static")) est[m++].push_back(estimate(k, t.ssi[k][0]));
                }
                for (std::size_t m = 0; m < names.size(); ++m) {
                    const double mse = score_mse(beams, est[m]);
                    totals[p][m] += mse;
                    if (spec.per_block_rows) sink.add(t.snr_db, z, names[m], mse);
                }
            } catch (const Error& e) {
                t.fail(Error(e.kind(), "block " + std::to_string(z) + ": " + e.what()));
            }
        }
    }
    for (std::size_t p = 0; p < ts.size(); ++p) {
        if (!ts[p].alive) continue;
        for (std::size_t m = 0; m < names.size(); ++m) sink.add(ts[p].snr_db, -1, names[m], totals[p][m] / w.n_blocks);
    }
}

// ---------------------------------------------------------------- downlink

// Sparse beamspace estimate: values on `rows` only.
struct BeamEstimate {
    std::vector<int> rows;
    CMat values;  // rows.size() x slots
};

BeamEstimate downlink_estimate(const CMat& g, const SsiSet& bins, const PilotBook& book, const BemConfig& bem,
                               const CMat& c_full, Rng& rng) {
    const std::vector<int> rows = bins.bins();
    const int tau = static_cast<int>(rows.size());
    const double amp = std::sqrt(book.power / tau);
    CVec y = CVec::Zero(book.T);
    for (int t = 0; t < book.T; ++t) {
        cplx acc{0.0, 0.0};
        for (int i = 0; i < tau; ++i) acc += book.sequences(i, t) * g(rows[i], book.slots[t]);
        y[t] = amp * acc + rng.cnormal(1.0);
    }
    const CVec stacked = downlink_train_estimate(y, book, bem);
    const CMat coeffs = Eigen::Map<const CMat>(stacked.data(), bem.order(), tau).transpose();
    return {rows, coeffs * c_full};
}

double sparse_mse(const CMat& truth, const BeamEstimate& est) {
    CMat diff = truth;
    for (std::size_t i = 0; i < est.rows.size(); ++i) diff.row(est.rows[i]) -= est.values.row(static_cast<Eigen::Index>(i));
    const Eigen::RowVectorXd num = diff.cwiseAbs2().colwise().sum();
    const Eigen::RowVectorXd den = truth.cwiseAbs2().colwise().sum();
    double s = 0.0;
    int used = 0;
    for (Eigen::Index n = 0; n < truth.cols(); ++n)
        if (den[n] > 0.0) {
            s += num[n] / den[n];
            ++used;
        }
    return used ? s / used : 0.0;
}

struct BitCount {
    long long errors = 0;
    long long bits = 0;
};

// QPSK matched-filter downlink over every slot of the block for all users at once.
// Each ADMA group gets its own downlink resource, so only same-group beams interfere.
BitCount matched_filter_ber(const std::vector<CMat>& g, const std::vector<BeamEstimate>& est,
                            const std::vector<int>& group_of, double rho, Rng rng) {
    const int K = static_cast<int>(g.size());
    const Eigen::Index N = g[0].cols();
    // cross[l][k](n) = <g_hat_l(n), g_k(n)>
    std::vector<std::vector<Eigen::RowVectorXcd>> cross(K, std::vector<Eigen::RowVectorXcd>(K));
    std::vector<Eigen::RowVectorXd> norm(K);
    for (int l = 0; l < K; ++l) {
        const auto& e = est[l];
        norm[l] = e.values.cwiseAbs2().colwise().sum().cwiseSqrt();
        CMat sub(static_cast<Eigen::Index>(e.rows.size()), N);
        for (int k = 0; k < K; ++k) {
            if (group_of[k] != group_of[l]) continue;
            for (std::size_t i = 0; i < e.rows.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = g[k].row(e.rows[i]);
            cross[l][k] = e.values.conjugate().cwiseProduct(sub).colwise().sum();
        }
    }
    const double amp = std::sqrt(rho);
    BitCount bc;
    std::vector<int> b0(K), b1(K);
    std::vector<cplx> d(K);
    for (Eigen::Index n = 0; n < N; ++n) {
        for (int l = 0; l < K; ++l) {
            b0[l] = rng.integer(0, 1);
            b1[l] = rng.integer(0, 1);
            d[l] = qpsk(b0[l], b1[l]);
        }
        for (int k = 0; k < K; ++k) {
            cplx y = rng.cnormal(1.0);
            for (int l = 0; l < K; ++l)
                if (group_of[l] == group_of[k] && norm[l][n] > 0.0) y += amp * cross[l][k][n] / norm[l][n] * d[l];
            bc.errors += (y.real() < 0.0) != (b0[k] == 1);
            bc.errors += (y.imag() < 0.0) != (b1[k] == 1);
            bc.bits += 2;
        }
    }
    return bc;
}

void run_downlink(const World& w, const Tracking& t, const RowSink& sink) {
    const RunPlan& plan = *w.plan;
    const SystemConfig& cfg = w.cfg();
    const ExperimentSpec& spec = w.spec();
    const BemConfig& bem = plan.bem_dl;
    const CMat c_full = basis_matrix(bem);
    const bool ber = spec.scenario == Scenario::ber;
    const int M = cfg.M;

    struct Method {
        std::string name;
        int book = -1;  // index into dl_books, -1 for LS, -2 for perfect CSI
        bool fixed_center = false;
    };
    std::vector<Method> methods;
    if (ber && spec.wants("perfect_csi")) methods.push_back({"perfect_csi", -2, false});
    for (std::size_t b = 0; b < plan.dl_books.size(); ++b)
        methods.push_back({ber && b == 0 ? "stbem" : "stbem_k" + std::to_string(spec.dl_pilot_divisors[b]),
                           static_cast<int>(b), false});
    if (spec.wants("conventional_ls")) methods.push_back({"conventional_ls", -1, false});
    if (spec.wants("sbem_static")) methods.push_back({"sbem_static", 0, true});

    const std::size_t S = spec.snr_grid.size();
    std::vector<std::vector<double>> mse_total(S, std::vector<double>(methods.size(), 0.0));
    std::vector<std::vector<BitCount>> bits(S, std::vector<BitCount>(methods.size()));

    auto dl_center = [&](int k, int z) {
        return reciprocity_map(t.ssi[k][z], spec.wavelength_ratio, 1.0).ssi_dl.center();
    };

    for (int z = 0; z < w.n_blocks; ++z) {
        const auto g = w.downlink_beams(z);
        for (std::size_t s = 0; s < S; ++s) {
            const double rho = std::pow(10.0, spec.snr_grid[s] / 10.0);
            for (std::size_t mi = 0; mi < methods.size(); ++mi) {
                const Method& m = methods[mi];
                std::vector<BeamEstimate> est;
                for (int k = 0; k < cfg.K; ++k) {
                    if (m.book == -2) {
                        std::vector<int> all(M);
                        std::iota(all.begin(), all.end(), 0);
                        est.push_back({all, g[k]});
                        continue;
                    }
                    Rng rng{cfg.seed, static_cast<std::uint64_t>(w.trial), kDownlinkPilotStream,
                            static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(z), mi,
                            static_cast<std::uint64_t>(k)};
                    PilotBook book = m.book == -1 ? *plan.ls_book : plan.dl_books[m.book];
                    book.power = plan.kappa * rho;  // equal training energy for every method
                    SsiSet bins = m.book == -1
                                      ? SsiSet(M, 0, M - 1, 0)
                                      : SsiSet::centered(M, dl_center(k, m.fixed_center ? 0 : z), book.streams());
                    est.push_back(downlink_estimate(g[k], bins, book, bem, c_full, rng));
                }
                if (ber) {
                    const Rng data{cfg.seed, static_cast<std::uint64_t>(w.trial), kDownlinkDataStream,
                                   static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(z)};
                    const BitCount bc = matched_filter_ber(g, est, w.group_of, rho, data);
                    bits[s][mi].errors += bc.errors;
                    bits[s][mi].bits += bc.bits;
                    if (spec.per_block_rows)
                        sink.add(spec.snr_grid[s], z, m.name, static_cast<double>(bc.errors) / bc.bits);
                } else {
                    double mse = 0.0;
                    for (int k = 0; k < cfg.K; ++k) mse += sparse_mse(g[k], est[k]);
                    mse /= cfg.K;
                    mse_total[s][mi] += mse;
                    if (spec.per_block_rows) sink.add(spec.snr_grid[s], z, m.name, mse);
                }
            }
        }
    }
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            const double v = ber ? static_cast<double>(bits[s][mi].errors) / std::max<long long>(bits[s][mi].bits, 1)
                                 : mse_total[s][mi] / w.n_blocks;
            sink.add(spec.snr_grid[s], -1, methods[mi].name, v);
        }
}

void report_failures(const std::vector<Tracking>& ts, const RowSink& sink, TrialRecord& rec) {
    for (const auto& t : ts) {
        for (const auto& d : t.dropouts)
            rec.diagnostics.push_back("snr " + std::to_string(t.snr_db) + " dB: no signal, coasted " + d);
        if (!t.alive) {
            sink.add(t.snr_db, -1, "error:" + t.error_kind, 0.0);
            rec.diagnostics.push_back("snr " + std::to_string(t.snr_db) + " dB: " + t.error);
        }
    }
}

}  // namespace

RunPlan make_plan(const ExperimentSpec& spec, const SystemConfig& cfg) {
    RunPlan plan;
    plan.spec = spec;
    plan.cfg = cfg;
    const int mu = spec.mu > 0 ? spec.mu : cfg.default_mu();
    plan.bem = BemConfig::make(mu, cfg.N);
    if (plan.bem.order() > cfg.N) throw Error(ErrorKind::config, "mu + 1 exceeds the block length");
    const double step = spec.speed_kmh / 3.6 * cfg.block_duration() / spec.cell_radius_m;
    plan.q_truth = step * step;

    plan.manifest.cfg = cfg;
    plan.manifest.spec = spec;
    plan.manifest.mu = plan.bem.mu;
    plan.manifest.truth_q_omega = plan.q_truth;

    const bool downlink = spec.scenario == Scenario::dl_mse || spec.scenario == Scenario::ber;
    // One downlink block spans one uplink block; Doppler and spacing scale with the carrier.
    const double dl_doppler_cycles = cfg.fd * spec.wavelength_ratio * cfg.block_duration();
    const int mu_dl = std::max(plan.bem.mu, 2 * static_cast<int>(std::ceil(dl_doppler_cycles - 1e-9)));
    plan.kappa = cfg.M * (mu_dl + 1);
    plan.dl_cfg = cfg;
    plan.dl_cfg.d_over_lambda = cfg.d_over_lambda * spec.wavelength_ratio;
    plan.dl_cfg.fd = cfg.fd * spec.wavelength_ratio;
    plan.dl_cfg.N = plan.kappa;
    plan.dl_cfg.Ts = cfg.block_duration() / plan.kappa;
    plan.bem_dl = BemConfig::make(mu_dl, plan.kappa);
    plan.manifest.mu_dl = mu_dl;
    if (downlink) {
        for (int d : spec.dl_pilot_divisors) {
            if (cfg.M % d != 0)
                throw Error(ErrorKind::config, "downlink pilot divisor " + std::to_string(d) + " must divide M");
            plan.dl_books.push_back(design_pilots(cfg.M / d, mu_dl, plan.kappa, PilotMode::downlink));
        }
        plan.ls_book = design_pilots(cfg.M, mu_dl, plan.kappa, PilotMode::downlink);
        plan.manifest.dl_pilots = plan.dl_books;
    }
    plan.manifest.blocks_per_trial = blocks_for(plan);
    if (spec.scenario == Scenario::ber)
        plan.manifest.bits_per_point = 2LL * cfg.K * plan.kappa * plan.manifest.blocks_per_trial * spec.n_trials;
    return plan;
}

TrialOutput run_trial(const RunPlan& plan, int trial) {
    TrialOutput out;
    const ExperimentSpec& spec = plan.spec;
    const World w = build_world(plan, trial);
    out.record.trial = trial;
    out.record.initial_doa = w.initial_doa;
    out.record.plan = w.groups;
    const RowSink sink{&w, &out.rows};

    std::vector<Tracking> ts;
    const bool downlink = spec.scenario == Scenario::dl_mse || spec.scenario == Scenario::ber;
    if (downlink) {
        ts.push_back(make_tracking(w, 0, spec.tracking_snr_db));
    } else {
        for (std::size_t s = 0; s < spec.snr_grid.size(); ++s)
            ts.push_back(make_tracking(w, static_cast<int>(s), spec.snr_grid[s]));
    }

    switch (spec.scenario) {
        case Scenario::doa_track:
            run_tracking(w, ts, Depth::doa);
            score_doa(w, ts, sink);
            break;
        case Scenario::as_track:
            run_tracking(w, ts, Depth::spread);
            score_spread(w, ts, sink);
            break;
        case Scenario::ul_mse: {
            run_tracking(w, ts, Depth::spread);
            try {
                const PilotBook book = design_pilots(w.groups.count(), plan.bem.mu, plan.cfg.N, PilotMode::uplink);
                out.record.ul_pilots = book;
                run_uplink(w, ts, book, sink);
            } catch (const Error& e) {
                for (auto& t : ts) if (t.alive) t.fail(e);
            }
            break;
        }
        case Scenario::dl_mse:
        case Scenario::ber:
            run_tracking(w, ts, Depth::spread);
            if (ts[0].alive) {
                try {
                    run_downlink(w, ts[0], sink);
                } catch (const Error& e) {
                    ts[0].fail(e);
                }
            }
            break;
    }
    for (const auto& t : ts) out.record.learned.push_back(t.learned);
    report_failures(ts, sink, out.record);
    return out;
}

std::vector<TraceRow> trace_trial(const RunPlan& plan, int trial) {
    const World w = build_world(plan, trial);
    std::vector<Tracking> ts{make_tracking(w, 0, plan.spec.snr_grid.front())};
    run_tracking(w, ts, Depth::spread);
    const Tracking& t = ts[0];
    if (!t.alive) throw Error(ErrorKind::no_signal, t.error);
    const double c = plan.cfg.bin_scale();
    std::vector<TraceRow> rows;
    for (int k = 0; k < w.K(); ++k)
        for (int z = 0; z < w.n_blocks; ++z) {
            TraceRow r;
            r.user = k;
            r.block = z;
            r.true_doa = w.doa[z][k];
            r.obs_bin = t.obs[k][z];
            r.pred_mean = t.em[k].pred_mean[z];
            r.pred_var = t.em[k].pred_var[z];
            r.filt_mean = t.em[k].filt_mean[z];
            r.filt_var = t.em[k].filt_var[z];
            r.innovation = t.em[k].innovation[z];
            r.smooth_mean = t.em[k].smooth_mean[z];
            r.smooth_var = t.em[k].smooth_var[z];
            r.dft_doa = std::asin(std::clamp(t.obs[k][z] / c, -1.0, 1.0));
            r.sigma2_hat = t.sigma2[k][z];
            r.dtheta_hat = t.dtheta[k][z];
            r.ssi_tracked = t.ssi[k][z].size();
            r.ssi_dft = t.ssi_dft[k][z];
            r.ssi_reference = t.ssi_ref[k][z];
            rows.push_back(r);
        }
    return rows;
}

}  // namespace stbem::detail
