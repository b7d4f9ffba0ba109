// SPDX-License-Identifier: Apache-2.0
#include "stbem/special.hpp"

#include <cmath>

namespace stbem {

namespace {

// Power series; long double keeps cancellation below 1e-12 up to |x| = 20.
double j0_series(double x) {
    const long double q = -0.25L * static_cast<long double>(x) * x;
    long double term = 1.0L;
    long double sum = 1.0L;
    for (int k = 1; k < 200; ++k) {
        term *= q / (static_cast<long double>(k) * k);
        sum += term;
        if (std::fabs(term) < 1e-22L * std::fabs(sum) && k > 5) break;
    }
    return static_cast<double>(sum);
}

// Hankel asymptotic expansion, truncated at the smallest term.
double j0_asymptotic(double x) {
    double p = 0.0, q = 0.0;
    double a = 1.0;  // a_k(0) / x^k
    double last = 1e300;
    for (int k = 0; k < 60; ++k) {
        if (k > 0) {
            const double odd = 2.0 * k - 1.0;
            a *= -odd * odd / (k * 8.0 * x);
        }
        if (std::abs(a) > last) break;
        last = std::abs(a);
        const double sign = ((k / 2) % 2 == 0) ? 1.0 : -1.0;
        if (k % 2 == 0) p += sign * a; else q += sign * a;
    }
    const double w = x - kPi / 4.0;
    return std::sqrt(2.0 / (kPi * x)) * (p * std::cos(w) - q * std::sin(w));
}

struct Panel {
    double a, b;
    cplx fa, fm, fb;
    cplx whole;
};

cplx simpson(const std::function<cplx(double)>& f, const Panel& s, double tol, int depth) {
    const double m = 0.5 * (s.a + s.b);
    const double lm = 0.5 * (s.a + m), rm = 0.5 * (m + s.b);
    const cplx flm = f(lm), frm = f(rm);
    const double h = s.b - s.a;
    const cplx left = h / 12.0 * (s.fa + 4.0 * flm + s.fm);
    const cplx right = h / 12.0 * (s.fm + 4.0 * frm + s.fb);
    const cplx diff = left + right - s.whole;
    if (depth <= 0 || std::abs(diff) <= 15.0 * tol)
        return left + right + diff / 15.0;
    return simpson(f, {s.a, m, s.fa, flm, s.fm, left}, 0.5 * tol, depth - 1) +
           simpson(f, {m, s.b, s.fm, frm, s.fb, right}, 0.5 * tol, depth - 1);
}

}  // namespace

double bessel_j0(double x) {
    const double ax = std::abs(x);
    return ax <= 20.0 ? j0_series(ax) : j0_asymptotic(ax);
}

cplx integrate(const std::function<cplx(double)>& f, double a, double b, double abs_tol) {
    if (a == b) return {0.0, 0.0};
    // Seed with a few panels so oscillatory integrands are not accepted on a lucky first guess.
    constexpr int kPanels = 8;
    cplx total{0.0, 0.0};
    const double h = (b - a) / kPanels;
    for (int i = 0; i < kPanels; ++i) {
        const double lo = a + i * h, hi = lo + h, mid = 0.5 * (lo + hi);
        const cplx flo = f(lo), fmid = f(mid), fhi = f(hi);
        const Panel p{lo, hi, flo, fmid, fhi, h / 6.0 * (flo + 4.0 * fmid + fhi)};
        total += simpson(f, p, abs_tol / kPanels, 40);
    }
    return total;
}

}  // namespace stbem
