// SPDX-License-Identifier: Apache-2.0
#include "stbem/config.hpp"

#include <cmath>

#include "stbem/errors.hpp"
#include "stbem/rng.hpp"

namespace stbem {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return "config";
        case ErrorKind::dimension_mismatch: return "dimension_mismatch";
        case ErrorKind::cholesky_failure: return "cholesky_failure";
        case ErrorKind::singular_innovation: return "singular_innovation";
        case ErrorKind::singular_covariance: return "singular_covariance";
        case ErrorKind::degenerate_geometry: return "degenerate_geometry";
        case ErrorKind::pilot_design_violation: return "pilot_design_violation";
        case ErrorKind::infeasible: return "infeasible";
        case ErrorKind::no_signal: return "no_signal";
        case ErrorKind::group_overflow: return "group_overflow";
        case ErrorKind::rank_deficient: return "rank_deficient";
    }
    return "unknown";
}

int SystemConfig::default_mu() const {
    // Tolerance keeps fd N Ts = 2 from ceiling to 3 through rounding.
    return 2 * static_cast<int>(std::ceil(fd * N * Ts - 1e-9));
}

void validate(const SystemConfig& cfg) {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::config, msg); };
    if (cfg.M < 2) fail("M must be >= 2");
    if (!(cfg.d_over_lambda > 0.0 && cfg.d_over_lambda <= 0.5)) fail("d_over_lambda must be in (0, 0.5]");
    if (cfg.K < 1) fail("K must be >= 1");
    if (cfg.G < 1) fail("G must be >= 1");
    if (cfg.N < 1) fail("N must be >= 1");
    if (!(cfg.Ts > 0.0)) fail("Ts must be positive");
    if (!(cfg.fd >= 0.0)) fail("fd must be non-negative");
    if (!(cfg.fd * cfg.Ts < 0.5)) fail("fd * Ts must be below 0.5");
    if (cfg.P < 1) fail("P must be >= 1");
    if (!(cfg.noise_var >= 0.0)) fail("noise_var must be non-negative");
}

Rng::Rng(std::initializer_list<std::uint64_t> key) {
    std::vector<std::uint32_t> words;
    for (auto k : key) {
        words.push_back(static_cast<std::uint32_t>(k));
        words.push_back(static_cast<std::uint32_t>(k >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    engine_.seed(seq);
}

cplx Rng::cnormal(double var) {
    const double s = std::sqrt(0.5 * var);
    const double re = normal();
    const double im = normal();
    return {s * re, s * im};
}

}  // namespace stbem
