// SPDX-License-Identifier: Apache-2.0
#include "stbem/angular_spread.hpp"

#include <algorithm>
#include <cmath>

#include "stbem/channel.hpp"
#include "stbem/errors.hpp"

namespace stbem {

CVec steering_derivative(const SystemConfig& cfg, double theta) {
    CVec a = steering_vector(cfg, theta);
    const double slope = kTwoPi * cfg.d_over_lambda * std::cos(theta);
    for (int m = 0; m < cfg.M; ++m) a[m] *= cplx(0.0, slope * m);
    return a;
}

TaylorDictionary TaylorDictionary::build(const SystemConfig& cfg, std::span<const double> thetas) {
    const auto K = static_cast<Eigen::Index>(thetas.size());
    TaylorDictionary d;
    d.A.resize(cfg.M, 2 * K);
    for (Eigen::Index k = 0; k < K; ++k) {
        d.A.col(k) = steering_vector(cfg, thetas[k]);
        d.A.col(K + k) = steering_derivative(cfg, thetas[k]);
    }
    return d;
}

SampleCovariance sample_covariance(const CMat& x) {
    if (x.cols() < 1) throw Error(ErrorKind::dimension_mismatch, "need at least one snapshot");
    SampleCovariance c;
    c.n_samples = static_cast<int>(x.cols());
    c.Rx = x * x.adjoint() / static_cast<double>(x.cols());
    c.Rx = 0.5 * (c.Rx + c.Rx.adjoint()).eval();
    return c;
}

SpreadEstimate estimate_sigma(const SampleCovariance& cov, std::span<const double> thetas,
                              const SystemConfig& cfg, double noise_var) {
    const auto K = static_cast<Eigen::Index>(thetas.size());
    if (K < 1) throw Error(ErrorKind::dimension_mismatch, "no tracked users");
    if (2 * K > cfg.M) throw Error(ErrorKind::degenerate_geometry, "2K exceeds the antenna count");
    if (cov.Rx.rows() != cfg.M || cov.Rx.cols() != cfg.M)
        throw Error(ErrorKind::dimension_mismatch, "covariance must be M x M");
    for (Eigen::Index i = 0; i < K; ++i)
        for (Eigen::Index j = i + 1; j < K; ++j)
            if (std::abs(thetas[i] - thetas[j]) < 1e-6)
                throw Error(ErrorKind::degenerate_geometry, "tracked DOAs closer than 1e-6 rad");

    const CMat A = TaylorDictionary::build(cfg, thetas).A;
    Eigen::JacobiSVD<CMat> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& s = svd.singularValues();
    const double cutoff = 1e-10 * s[0];
    Vec inv = Vec::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s[i] > cutoff) inv[i] = 1.0 / s[i];
    const CMat pinv = svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();

    const CMat signal = cov.Rx - noise_var * CMat::Identity(cfg.M, cfg.M);
    const CMat sigma = pinv * signal * pinv.adjoint();

    SpreadEstimate out;
    out.sigma2 = Vec::Zero(K);
    out.delta_theta = Vec::Zero(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const double power = sigma(k, k).real();
        const double spread = sigma(K + k, K + k).real();
        const double ratio = power > 0.0 ? spread / power : 0.0;
        out.sigma2[k] = std::max(ratio, 0.0);
        out.delta_theta[k] = std::sqrt(3.0 * out.sigma2[k]);
    }
    return out;
}

double estimate_noise_floor(const SampleCovariance& cov, int n_users) {
    const auto M = cov.Rx.rows();
    const Eigen::Index keep = M - 2 * static_cast<Eigen::Index>(n_users);
    if (keep < 1) throw Error(ErrorKind::degenerate_geometry, "no noise subspace left");
    Eigen::SelfAdjointEigenSolver<CMat> eig(cov.Rx, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().head(keep).mean();
}

std::vector<double> moving_median(std::span<const double> values, int width) {
    const int n = static_cast<int>(values.size());
    const int half = std::max(width, 1) / 2;
    std::vector<double> out(n);
    std::vector<double> buf;
    for (int i = 0; i < n; ++i) {
        buf.assign(values.begin() + std::max(0, i - half), values.begin() + std::min(n, i + half + 1));
        std::sort(buf.begin(), buf.end());
        const std::size_t m = buf.size();
        out[i] = m % 2 ? buf[m / 2] : 0.5 * (buf[m / 2 - 1] + buf[m / 2]);
    }
    return out;
}

}  // namespace stbem
