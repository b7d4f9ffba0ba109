// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <numbers>

#include <Eigen/Dense>

namespace stbem {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

// Non-negative remainder, for bin arithmetic on the M-circle.
constexpr int wrap_index(long long i, int m) {
    const long long r = i % m;
    return static_cast<int>(r < 0 ? r + m : r);
}

}  // namespace stbem
