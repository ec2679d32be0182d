#pragma once

#include "hdqc/types.hpp"

#include <cmath>
#include <cstdint>
#include <utility>

namespace hdqc {

// Counter-based generator: Philox2x64 with 10 rounds (Salmon et al. 2011).
// State is (counter, stream, key); every (key, stream, counter) triple maps to
// a fixed 128-bit output block, so substreams are reproducible regardless of
// how work is scheduled across threads or machines. No libc or libstdc++
// distribution code is involved anywhere downstream; all sampling is built on
// the raw 64-bit stream below and is therefore bit-stable across platforms.
class Philox2x64 {
  public:
    Philox2x64(std::uint64_t key, std::uint64_t stream)
        : key_(key), stream_(stream) {}

    std::uint64_t next() {
        if (have_second_) {
            have_second_ = false;
            return second_;
        }
        auto [a, b] = block(counter_++, stream_, key_);
        second_ = b;
        have_second_ = true;
        return a;
    }

    static std::pair<std::uint64_t, std::uint64_t> block(std::uint64_t c0, std::uint64_t c1,
                                                         std::uint64_t key) {
        constexpr std::uint64_t kMul = 0xD2B74407B1CE6E93ULL;
        constexpr std::uint64_t kWeyl = 0x9E3779B97F4A7C15ULL;
        for (int round = 0; round < 10; ++round) {
            const auto prod = static_cast<unsigned __int128>(kMul) * c0;
            const auto hi = static_cast<std::uint64_t>(prod >> 64);
            const auto lo = static_cast<std::uint64_t>(prod);
            c0 = hi ^ key ^ c1;
            c1 = lo;
            key += kWeyl;
        }
        return {c0, c1};
    }

  private:
    std::uint64_t key_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    std::uint64_t second_ = 0;
    bool have_second_ = false;
};

// Sampling front end over Philox. normal() is the trigonometric Box-Muller
// transform (pairs cached), gamma() is Marsaglia-Tsang squeeze rejection for
// shape >= 1. Rejection loops consume a variable number of draws, which is
// harmless: each consumer owns its own substream.
class Rng {
  public:
    Rng(std::uint64_t seed, std::uint64_t stream) : eng_(seed, stream) {}

    std::uint64_t next_u64() { return eng_.next(); }

    /// Uniform on the open interval (0, 1): (k + 0.5) / 2^53.
    double uniform() {
        return (static_cast<double>(eng_.next() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * M_PI * u2;
        cached_ = r * std::sin(t);
        have_cached_ = true;
        return r * std::cos(t);
    }

    /// Gamma(shape, 1) for shape >= 1.
    double gamma(double shape) {
        if (shape < 1.0) throw ConfigError("Rng::gamma requires shape >= 1");
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double chi_square(double dof) {
        if (dof < 2.0) throw ConfigError("Rng::chi_square requires dof >= 2");
        return 2.0 * gamma(0.5 * dof);
    }

  private:
    Philox2x64 eng_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace hdqc
