// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "stbem/types.hpp"

namespace stbem {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    // Substream keyed by a tuple, e.g. {seed, trial, stream}.
    Rng(std::initializer_list<std::uint64_t> key);

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    double normal() { return normal_(engine_); }
    // Circularly-symmetric complex Gaussian with E|z|^2 = var.
    cplx cnormal(double var = 1.0);
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace stbem
