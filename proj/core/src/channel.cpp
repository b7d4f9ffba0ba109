// SPDX-License-Identifier: Apache-2.0
#include "stbem/channel.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <istream>
#include <ostream>

#include "stbem/errors.hpp"
#include "stbem/special.hpp"

namespace stbem {

CVec steering_vector(int M, double d_over_lambda, double theta) {
    CVec a(M);
    const double phase = kTwoPi * d_over_lambda * std::sin(theta);
    for (int m = 0; m < M; ++m) a[m] = std::polar(1.0, phase * m);
    return a;
}

CVec steering_vector(const SystemConfig& cfg, double theta) {
    return steering_vector(cfg.M, cfg.d_over_lambda, theta);
}

std::vector<RayParams> draw_rays(const SystemConfig& cfg, const SpatialState& spatial, Rng& rng) {
    if (!(spatial.max_as < kPi / 2) || spatial.max_as < 0.0)
        throw Error(ErrorKind::config, "max_as must lie in [0, pi/2)");
    std::vector<RayParams> rays(cfg.P);
    for (auto& r : rays) {
        r.gain = rng.cnormal(1.0);
        r.motion_angle = rng.uniform(0.0, kTwoPi);
        r.init_phase = rng.uniform(0.0, kTwoPi);
        r.as_offset = spatial.max_as > 0.0 ? rng.uniform(-spatial.max_as, spatial.max_as) : 0.0;
        r.doa = spatial.central_doa + r.as_offset;
    }
    return rays;
}

namespace {

// N x P Doppler/phase factors, scaled by the ray gains and 1/sqrt(P).
CMat ray_factors(const SystemConfig& cfg, std::span<const RayParams> rays) {
    const int P = static_cast<int>(rays.size());
    CMat D(cfg.N, P);
    const double norm = 1.0 / std::sqrt(static_cast<double>(P));
    for (int p = 0; p < P; ++p) {
        const auto& r = rays[p];
        const double w = kTwoPi * cfg.fd * cfg.Ts * std::cos(r.motion_angle);
        for (int n = 0; n < cfg.N; ++n) D(n, p) = norm * r.gain * std::polar(1.0, -(w * n + r.init_phase));
    }
    return D;
}

}  // namespace

CMat render_channel(const SystemConfig& cfg, std::span<const RayParams> rays) {
    const int P = static_cast<int>(rays.size());
    CMat A(cfg.M, P);
    for (int p = 0; p < P; ++p) A.col(p) = steering_vector(cfg.M, cfg.d_over_lambda, rays[p].doa);
    return A * ray_factors(cfg, rays).transpose();
}

CVec beamspace_steering(int M, double d_over_lambda, double theta) {
    CVec out(M);
    const double u = d_over_lambda * std::sin(theta);
    const double scale = 1.0 / std::sqrt(static_cast<double>(M));
    for (int q = 0; q < M; ++q) {
        // Geometric sum of exp(j m x) with x reduced to [-pi, pi).
        double x = kTwoPi * (u - static_cast<double>(q) / M);
        x -= kTwoPi * std::floor((x + kPi) / kTwoPi);
        const double half = 0.5 * x;
        const double s = std::sin(half);
        const double amp = std::abs(s) < 1e-9 ? M : std::sin(M * half) / s;
        out[q] = scale * amp * std::polar(1.0, (M - 1) * half);
    }
    return out;
}

CMat render_beamspace(const SystemConfig& cfg, std::span<const RayParams> rays) {
    const int P = static_cast<int>(rays.size());
    CMat B(cfg.M, P);
    for (int p = 0; p < P; ++p) B.col(p) = beamspace_steering(cfg.M, cfg.d_over_lambda, rays[p].doa);
    return B * ray_factors(cfg, rays).transpose();
}

ChannelBlock generate_block(const SystemConfig& cfg, std::span<const SpatialState> spatial,
                            std::int64_t zeta, Rng& rng) {
    ChannelBlock block;
    block.block_index = zeta;
    block.h.reserve(spatial.size());
    block.rays.reserve(spatial.size());
    for (const auto& s : spatial) {
        block.rays.push_back(draw_rays(cfg, s, rng));
        block.h.push_back(render_channel(cfg, block.rays.back()));
    }
    return block;
}

CMat uplink_received(const ChannelBlock& block, const CMat& symbols, const SystemConfig& cfg, Rng& rng) {
    const auto K = static_cast<Eigen::Index>(block.h.size());
    if (symbols.rows() != K || symbols.cols() != cfg.N)
        throw Error(ErrorKind::dimension_mismatch, "symbols must be K x N");
    CMat x = CMat::Zero(cfg.M, cfg.N);
    for (Eigen::Index k = 0; k < K; ++k) {
        if (block.h[k].rows() != cfg.M || block.h[k].cols() != cfg.N)
            throw Error(ErrorKind::dimension_mismatch, "channel must be M x N");
        x += block.h[k] * symbols.row(k).asDiagonal();
    }
    if (cfg.noise_var > 0.0)
        for (Eigen::Index n = 0; n < x.cols(); ++n)
            for (Eigen::Index m = 0; m < x.rows(); ++m) x(m, n) += rng.cnormal(cfg.noise_var);
    return x;
}

cplx spatial_correlation(const SystemConfig& cfg, const SpatialState& spatial, int offset) {
    const double x = kTwoPi * cfg.d_over_lambda * offset;
    const double lo = spatial.central_doa - spatial.max_as;
    const double hi = spatial.central_doa + spatial.max_as;
    if (spatial.max_as <= 0.0) return std::polar(1.0, x * std::sin(spatial.central_doa));
    const cplx integral = integrate([x](double t) { return std::polar(1.0, x * std::sin(t)); }, lo, hi);
    return integral / (hi - lo);
}

cplx theoretical_correlation(const SystemConfig& cfg, const SpatialState& spatial, int lag,
                             int antenna_i, int antenna_l) {
    const double temporal = bessel_j0(kTwoPi * cfg.fd * lag * cfg.Ts);
    return temporal * spatial_correlation(cfg, spatial, antenna_i - antenna_l);
}

namespace {

template <typename T>
void put_le(std::ostream& os, T value) {
    using U = std::make_unsigned_t<T>;
    const auto u = static_cast<U>(value);
    std::array<char, sizeof(T)> bytes{};
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((u >> (8 * i)) & 0xFF);
    os.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& is) {
    using U = std::make_unsigned_t<T>;
    std::array<unsigned char, sizeof(T)> bytes{};
    is.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (!is) throw Error(ErrorKind::dimension_mismatch, "truncated block dump");
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(bytes[i]) << (8 * i);
    return static_cast<T>(u);
}

constexpr std::uint32_t kDumpVersion = 1;

}  // namespace

void write_block_dump(std::ostream& os, const ChannelBlock& block) {
    const int K = static_cast<int>(block.h.size());
    const int M = K > 0 ? static_cast<int>(block.h[0].rows()) : 0;
    const int N = K > 0 ? static_cast<int>(block.h[0].cols()) : 0;
    os.write("STBM", 4);
    put_le<std::uint32_t>(os, kDumpVersion);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(M));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(N));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(K));
    put_le<std::int64_t>(os, block.block_index);
    for (const auto& h : block.h) {
        if (h.rows() != M || h.cols() != N)
            throw Error(ErrorKind::dimension_mismatch, "users disagree on block shape");
        for (int n = 0; n < N; ++n)
            for (int m = 0; m < M; ++m) {
                put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(static_cast<float>(h(m, n).real())));
                put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(static_cast<float>(h(m, n).imag())));
            }
    }
}

BlockDump read_block_dump(std::istream& is) {
    char magic[4]{};
    is.read(magic, 4);
    if (!is || std::string_view(magic, 4) != "STBM")
        throw Error(ErrorKind::dimension_mismatch, "not a block dump");
    if (get_le<std::uint32_t>(is) != kDumpVersion)
        throw Error(ErrorKind::dimension_mismatch, "unsupported dump version");
    BlockDump d;
    d.M = static_cast<int>(get_le<std::uint32_t>(is));
    d.N = static_cast<int>(get_le<std::uint32_t>(is));
    d.K = static_cast<int>(get_le<std::uint32_t>(is));
    d.block_index = get_le<std::int64_t>(is);
    const std::size_t count = static_cast<std::size_t>(d.M) * d.N * d.K;
    d.data.resize(count);
    for (auto& z : d.data) {
        const float re = std::bit_cast<float>(get_le<std::uint32_t>(is));
        const float im = std::bit_cast<float>(get_le<std::uint32_t>(is));
        z = {re, im};
    }
    return d;
}

}  // namespace stbem
