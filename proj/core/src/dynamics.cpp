// SPDX-License-Identifier: Apache-2.0
#include "stbem/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include <string>

#include "stbem/errors.hpp"

namespace stbem {

double DoaModel::measure(double theta) const {
    const double y = scale * std::sin(theta);
    return round_measurement ? std::round(y) : y;
}

DoaModel DoaModel::from_initial_bin(double scale, double bin) {
    DoaModel m;
    m.scale = scale;
    m.prior_mean = std::asin(std::clamp(bin / scale, -1.0, 1.0));
    const double slope = scale * std::max(std::cos(m.prior_mean), 1e-3);
    m.prior_var = 1.0 / (slope * slope);
    return m;
}

double observe_central_ssi(const Vec& power, double predicted_center, int window) {
    const int M = static_cast<int>(power.size());
    if (window < 1) throw Error(ErrorKind::config, "observation window must be >= 1");
    const double total = power.sum();
    if (!(total > 0.0)) throw Error(ErrorKind::no_signal, "all-zero input");
    const long long c = std::llround(predicted_center);
    const int reach = std::min(window, (M - 1) / 2);
    long long best = c;
    double peak = -1.0;
    for (long long b = c - reach; b <= c + reach; ++b) {
        const double p = power[wrap_index(b, M)];
        if (p > peak) {
            peak = p;
            best = b;
        }
    }
    if (peak < 3.0 * total / M) throw Error(ErrorKind::no_signal, "peak-to-mean power ratio below 3");
    return static_cast<double>(best);
}

double observe_central_ssi(const CMat& x, double predicted_center, int window) {
    return observe_central_ssi(beam_power(x), predicted_center, window);
}

double markov_step(double theta_prev, double q_omega, Rng& rng) {
    return q_omega > 0.0 ? theta_prev + std::sqrt(q_omega) * rng.normal() : theta_prev;
}

namespace {

void check_obs(const ObservationVector& obs) {
    if (obs.q_obs.size() < 2) throw Error(ErrorKind::dimension_mismatch, "need at least two observations");
}

}  // namespace

namespace {

struct ScalarWeights {
    double m0, mi, c0, ci, spread;
};

ScalarWeights scalar_weights(const UtConfig& ut) {
    const UtWeights w = UtWeights::from(ut);
    return {w.mean[0], w.mean[1], w.cov[0], w.cov[1], std::sqrt(ut.R + ut.epsilon())};
}

double scalar_sqrt(double var) {
    if (var == 0.0) return 0.0;
    if (var > 0.0) return std::sqrt(var);
    if (var + 1e-12 > 0.0) return std::sqrt(var + 1e-12);
    throw Error(ErrorKind::cholesky_failure, "negative variance");
}

DoaStep scalar_step(double mean, double var, double obs, const NoiseParams& params, const DoaModel& model,
                    const ScalarWeights& w, bool predict) {
    if (model.ut.R != 1) throw Error(ErrorKind::config, "DOA model is scalar");
    DoaStep s;
    s.pred_mean = mean;
    s.pred_var = var;
    if (predict) {
        // Identity dynamics: the unscented moments of +-spread*sqrt(var) reproduce var exactly.
        const double d = w.spread * scalar_sqrt(var);
        s.pred_mean = w.m0 * mean + w.mi * ((mean + d) + (mean - d));
        const double e1 = (mean + d) - s.pred_mean, e2 = (mean - d) - s.pred_mean, e0 = mean - s.pred_mean;
        s.pred_var = w.c0 * e0 * e0 + w.ci * (e1 * e1 + e2 * e2) + params.q_omega;
    }
    const double d = w.spread * scalar_sqrt(s.pred_var);
    const double x0 = s.pred_mean, x1 = s.pred_mean + d, x2 = s.pred_mean - d;
    const double y0 = model.measure(x0), y1 = model.measure(x1), y2 = model.measure(x2);
    const double ybar = w.m0 * y0 + w.mi * (y1 + y2);
    const double pyy = w.c0 * (y0 - ybar) * (y0 - ybar) + w.ci * ((y1 - ybar) * (y1 - ybar) + (y2 - ybar) * (y2 - ybar)) +
                       params.q_u;
    const double pxy = w.ci * ((x1 - x0) * (y1 - ybar) + (x2 - x0) * (y2 - ybar));
    if (!(pyy > 0.0)) throw Error(ErrorKind::singular_innovation, "innovation covariance is singular");
    const double gain = pxy / pyy;
    s.innovation = obs - ybar;
    s.mean = s.pred_mean + gain * s.innovation;
    s.var = s.pred_var - gain * pyy * gain;
    s.log_likelihood = -0.5 * (std::log(kTwoPi) + std::log(pyy) + s.innovation * s.innovation / pyy);
    return s;
}

}  // namespace

DoaStep doa_filter_step(double mean, double var, double obs, const NoiseParams& params, const DoaModel& model,
                        bool predict) {
    return scalar_step(mean, var, obs, params, model, scalar_weights(model.ut), predict);
}

DoaTrack track_doa(const ObservationVector& obs, const NoiseParams& params, const DoaModel& model) {
    check_obs(obs);
    const auto n = static_cast<std::size_t>(obs.q_obs.size());
    const ScalarWeights w = scalar_weights(model.ut);
    DoaTrack t;
    t.pred_mean.resize(n);
    t.pred_var.resize(n);
    t.filt_mean.resize(n);
    t.filt_var.resize(n);
    t.innovation.resize(n);
    double mean = model.prior_mean, var = model.prior_var;
    for (std::size_t z = 0; z < n; ++z) {
        DoaStep s;
        try {
            s = scalar_step(mean, var, obs.q_obs[static_cast<Eigen::Index>(z)], params, model, w, z > 0);
        } catch (const Error& e) {
            throw Error(e.kind(), "block " + std::to_string(z) + ": " + e.what());
        }
        t.pred_mean[z] = s.pred_mean;
        t.pred_var[z] = s.pred_var;
        t.filt_mean[z] = mean = s.mean;
        t.filt_var[z] = var = s.var;
        t.innovation[z] = s.innovation;
        t.log_likelihood += s.log_likelihood;
    }

    // Backward pass; with identity dynamics the cross term of the filtered points is their variance.
    t.smooth_mean = t.filt_mean;
    t.smooth_var = t.filt_var;
    t.crossvar.assign(n, 0.0);
    for (std::size_t z = n - 1; z-- > 0;) {
        const double d = w.spread * scalar_sqrt(t.filt_var[z]);
        const double m = t.filt_mean[z];
        const double m_pred = w.m0 * m + w.mi * ((m + d) + (m - d));
        const double e0 = m - m_pred, e1 = m + d - m_pred, e2 = m - d - m_pred;
        const double p_pred = w.c0 * e0 * e0 + w.ci * (e1 * e1 + e2 * e2) + params.q_omega;
        const double cross = w.ci * (d * e1 - d * e2);
        if (!(p_pred > 0.0))
            throw Error(ErrorKind::singular_covariance, "predicted covariance singular at block " + std::to_string(z + 1));
        const double g = cross / p_pred;
        t.smooth_mean[z] = m + g * (t.smooth_mean[z + 1] - m_pred);
        t.smooth_var[z] = t.filt_var[z] + g * (t.smooth_var[z + 1] - p_pred) * g;
        t.crossvar[z + 1] = g * t.smooth_var[z + 1];
    }
    return t;
}

EmStep em_iterate(const ObservationVector& obs, const NoiseParams& current, const DoaModel& model) {
    const DoaTrack t = track_doa(obs, current, model);
    const ScalarWeights w = scalar_weights(model.ut);
    const auto n = t.smooth_mean.size();

    // Measurement residual second moment under the smoothed Gaussian, by a 3-point UT.
    double resid = 0.0;
    for (std::size_t z = 0; z < n; ++z) {
        const double m = t.smooth_mean[z];
        const double d = w.spread * std::sqrt(std::max(t.smooth_var[z], 0.0));
        const double q = obs.q_obs[static_cast<Eigen::Index>(z)];
        const double e0 = q - model.measure(m), e1 = q - model.measure(m + d), e2 = q - model.measure(m - d);
        resid += w.m0 * e0 * e0 + w.mi * (e1 * e1 + e2 * e2);
    }

    double incr = 0.0;
    for (std::size_t z = 1; z < n; ++z) {
        const double dm = t.smooth_mean[z] - t.smooth_mean[z - 1];
        incr += t.smooth_var[z] + t.smooth_var[z - 1] - 2.0 * t.crossvar[z] + dm * dm;
    }

    EmStep step;
    step.log_likelihood = t.log_likelihood;
    step.params.q_u = resid / static_cast<double>(n);
    step.params.q_omega = incr / static_cast<double>(n - 1);
    if (!(step.params.q_u > kVarianceFloor)) {
        step.params.q_u = kVarianceFloor;
        step.clamped = true;
    }
    if (!(step.params.q_omega > kVarianceFloor)) {
        step.params.q_omega = kVarianceFloor;
        step.clamped = true;
    }
    return step;
}

EmResult em_learn(const ObservationVector& obs, const NoiseParams& init, const DoaModel& model,
                  const EmOptions& opts) {
    if (opts.max_iters < 1) throw Error(ErrorKind::config, "max_iters must be >= 1");
    if (!(init.q_omega > 0.0 && init.q_u > 0.0)) throw Error(ErrorKind::config, "initial variances must be positive");
    EmResult r;
    NoiseParams params = init;
    for (int it = 0; it < opts.max_iters; ++it) {
        const EmStep step = em_iterate(obs, params, model);
        r.log_likelihood.push_back(step.log_likelihood);
        r.clamped = r.clamped || step.clamped;
        const double change = std::max(std::abs(step.params.q_omega - params.q_omega) / params.q_omega,
                                       std::abs(step.params.q_u - params.q_u) / params.q_u);
        params = step.params;
        ++r.iterations;
        if (change < opts.tol) {
            r.converged = true;
            break;
        }
    }
    r.log_likelihood.push_back(track_doa(obs, params, model).log_likelihood);
    r.params = params;
    return r;
}

}  // namespace stbem
