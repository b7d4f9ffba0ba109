// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stbem {

enum class ErrorKind {
    config,
    dimension_mismatch,
    cholesky_failure,
    singular_innovation,
    singular_covariance,
    degenerate_geometry,
    pilot_design_violation,
    infeasible,
    no_signal,
    group_overflow,
    rank_deficient,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    // Config errors are the caller's fault; everything else is numerical.
    bool is_config() const noexcept { return kind_ == ErrorKind::config; }

private:
    ErrorKind kind_;
};

}  // namespace stbem
