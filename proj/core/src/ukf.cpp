// SPDX-License-Identifier: Apache-2.0
#include "stbem/ukf.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "stbem/errors.hpp"

namespace stbem {

UtWeights UtWeights::from(const UtConfig& ut) {
    if (ut.R < 1) throw Error(ErrorKind::config, "state dimension must be >= 1");
    const double eps = ut.epsilon();
    const double spread = ut.R + eps;
    if (!(spread > 0.0)) throw Error(ErrorKind::config, "alpha^2 (R + kappa) must be positive");
    const int n = 2 * ut.R + 1;
    UtWeights w;
    w.mean = Vec::Constant(n, 1.0 / (2.0 * spread));
    w.mean[0] = eps / spread;
    w.cov = w.mean;
    w.cov[0] = w.mean[0] + 1.0 - ut.alpha * ut.alpha + ut.beta;
    if (std::abs(w.mean.sum() - 1.0) > 1e-12 || !w.cov.allFinite())
        throw Error(ErrorKind::config, "unscented weights are inconsistent");
    return w;
}

namespace {

void symmetrize(Mat& P) { P = 0.5 * (P + P.transpose()).eval(); }

Mat matrix_sqrt(const Mat& cov) {
    if (cov.isZero(0.0)) return Mat::Zero(cov.rows(), cov.cols());
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    const Mat jittered = cov + 1e-12 * Mat::Identity(cov.rows(), cov.cols());
    Eigen::LLT<Mat> retry(jittered);
    if (retry.info() == Eigen::Success) return retry.matrixL();
    throw Error(ErrorKind::cholesky_failure, "covariance is not positive semidefinite");
}

struct Moments {
    Vec mean;
    Mat cov;
    Mat cross;  // sum Wc (chi - chi_0)(Y - mean)^T
};

// Unscented transform of points chi through f.
Moments transform(const Mat& chi, const UtWeights& w, const StateFn& f) {
    const Eigen::Index n = chi.cols();
    Vec first = f(chi.col(0));
    Mat Y(first.size(), n);
    Y.col(0) = first;
    for (Eigen::Index i = 1; i < n; ++i) Y.col(i) = f(chi.col(i));
    Moments m;
    m.mean = Y * w.mean;
    const Mat dy = Y.colwise() - m.mean;
    const Mat dx = chi.colwise() - chi.col(0);
    m.cov = dy * w.cov.asDiagonal() * dy.transpose();
    m.cross = dx * w.cov.asDiagonal() * dy.transpose();
    return m;
}

}  // namespace

Vec identity_map(const Vec& x) { return x; }

Mat sigma_points(const FilterState& state, const UtConfig& ut) {
    const int R = ut.R;
    if (state.mean.size() != R || state.cov.rows() != R || state.cov.cols() != R)
        throw Error(ErrorKind::dimension_mismatch, "state dimension does not match UtConfig::R");
    const double spread = std::sqrt(R + ut.epsilon());
    const Mat L = spread * matrix_sqrt(state.cov);
    Mat chi(R, 2 * R + 1);
    chi.col(0) = state.mean;
    for (int i = 0; i < R; ++i) {
        chi.col(1 + i) = state.mean + L.col(i);
        chi.col(1 + R + i) = state.mean - L.col(i);
    }
    return chi;
}

StepResult ukf_step(const FilterState& prev, const Vec& obs, const Mat& q_process, const Mat& q_meas,
                    const UtConfig& ut, const StateFn& meas_fn, const StateFn& sys_fn, bool predict) {
    const UtWeights w = UtWeights::from(ut);
    StepResult out;
    if (predict) {
        const Moments pm = transform(sigma_points(prev, ut), w, sys_fn);
        out.predicted.mean = pm.mean;
        out.predicted.cov = pm.cov + q_process;
        symmetrize(out.predicted.cov);
    } else {
        out.predicted = prev;
    }

    // Measurement moments use points redrawn around the predicted state.
    const Mat chi = sigma_points(out.predicted, ut);
    const Moments mm = transform(chi, w, meas_fn);
    GainBundle& g = out.gain;
    g.y_pred = mm.mean;
    g.pyy = mm.cov + q_meas;
    g.pxy = mm.cross;
    if (obs.size() != g.y_pred.size()) throw Error(ErrorKind::dimension_mismatch, "observation size");

    Eigen::LLT<Mat> llt(g.pyy);
    if (llt.info() != Eigen::Success || !(g.pyy.diagonal().array() > 0.0).all())
        throw Error(ErrorKind::singular_innovation, "innovation covariance is singular");
    g.kalman_gain = llt.solve(g.pxy.transpose()).transpose();
    out.innovation = obs - g.y_pred;
    out.updated.mean = out.predicted.mean + g.kalman_gain * out.innovation;
    out.updated.cov = out.predicted.cov - g.kalman_gain * g.pyy * g.kalman_gain.transpose();
    symmetrize(out.updated.cov);

    const double logdet = 2.0 * Mat(llt.matrixL()).diagonal().array().log().sum();
    const double maha = out.innovation.dot(llt.solve(out.innovation));
    out.log_likelihood = -0.5 * (static_cast<double>(obs.size()) * std::log(kTwoPi) + logdet + maha);
    return out;
}

std::vector<FilterState> FilterRun::filtered() const {
    std::vector<FilterState> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.updated);
    return out;
}

FilterRun ukf_filter(const std::vector<Vec>& obs, const FilterState& prior, const Mat& q_process,
                     const Mat& q_meas, const UtConfig& ut, const StateFn& meas_fn, const StateFn& sys_fn) {
    FilterRun run;
    run.steps.reserve(obs.size());
    FilterState state = prior;
    for (std::size_t z = 0; z < obs.size(); ++z) {
        try {
            run.steps.push_back(ukf_step(state, obs[z], q_process, q_meas, ut, meas_fn, sys_fn, z > 0));
        } catch (const Error& e) {
            throw Error(e.kind(), "block " + std::to_string(z) + ": " + e.what());
        }
        state = run.steps.back().updated;
        run.log_likelihood += run.steps.back().log_likelihood;
    }
    return run;
}

SmoothedTrajectory urtss_pass(const std::vector<FilterState>& filtered, const Mat& q_process,
                              const UtConfig& ut, const StateFn& sys_fn) {
    if (filtered.empty()) throw Error(ErrorKind::dimension_mismatch, "no filtered states");
    const UtWeights w = UtWeights::from(ut);
    const std::size_t n = filtered.size();
    SmoothedTrajectory s;
    s.mean.resize(n);
    s.cov.resize(n);
    s.crossvar.assign(n, Mat::Zero(ut.R, ut.R));
    s.mean[n - 1] = filtered[n - 1].mean;
    s.cov[n - 1] = filtered[n - 1].cov;
    for (std::size_t z = n - 1; z-- > 0;) {
        const Moments pm = transform(sigma_points(filtered[z], ut), w, sys_fn);
        Mat p_pred = pm.cov + q_process;
        symmetrize(p_pred);
        Eigen::LLT<Mat> llt(p_pred);
        if (llt.info() != Eigen::Success)
            throw Error(ErrorKind::singular_covariance, "predicted covariance singular at block " + std::to_string(z + 1));
        const Mat gain = llt.solve(pm.cross.transpose()).transpose();
        s.mean[z] = filtered[z].mean + gain * (s.mean[z + 1] - pm.mean);
        s.cov[z] = filtered[z].cov + gain * (s.cov[z + 1] - p_pred) * gain.transpose();
        symmetrize(s.cov[z]);
        s.crossvar[z + 1] = gain * s.cov[z + 1];
    }
    return s;
}

void write_filter_trace(std::ostream& os, const FilterRun& run) {
    os << "block,pred_mean,pred_cov,post_mean,post_cov,innovation\n";
    for (std::size_t z = 0; z < run.steps.size(); ++z) {
        const auto& s = run.steps[z];
        os << z << ',' << s.predicted.mean[0] << ',' << s.predicted.cov(0, 0) << ',' << s.updated.mean[0] << ','
           << s.updated.cov(0, 0) << ',' << s.innovation[0] << '\n';
    }
}

}  // namespace stbem
