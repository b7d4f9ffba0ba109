// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "stbem/types.hpp"

namespace stbem {

// Bessel function of the first kind, order zero.
double bessel_j0(double x);

// Adaptive Simpson quadrature of a complex integrand on [a, b].
cplx integrate(const std::function<cplx(double)>& f, double a, double b, double abs_tol = 1e-8);

}  // namespace stbem
