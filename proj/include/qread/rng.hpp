#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "qread/errors.hpp"
#include "qread/special_functions.hpp"

namespace qread {

/// Counter-based random stream: output i is the SplitMix64 finalizer applied
/// to key + i * golden-ratio increment, with the key derived from
/// (seed, stream, substream). Streams are independent by construction, so
/// frame generation keyed by (seed, frame_id, arm) is reproducible under any
/// scheduling.
class CounterRng {
  public:
    using result_type = std::uint64_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type(0); }

    CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0)
        : key_(mix(mix(mix(seed + kGolden) ^ stream) ^ substream)) {}

    result_type operator()() { return mix(key_ + (++counter_) * kGolden); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return double((*this)() >> 11) * 0x1.0p-53; }

    /// Box-Muller normal; the paired value is cached within this stream.
    double normal(double mean, double stddev) {
        if (stddev == 0.0) return mean;
        if (has_spare_) {
            has_spare_ = false;
            return mean + stddev * spare_;
        }
        const double r = std::sqrt(-2.0 * std::log1p(-uniform01()));
        const double t = 2.0 * 3.14159265358979323846 * uniform01();
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return mean + stddev * r * std::cos(t);
    }

    /// Poisson sample; Knuth product method below mean 10, transformed
    /// rejection (PTRD) above.
    std::int64_t poisson(double mean) {
        if (!(mean >= 0.0)) throw ValidationError("poisson: mean must be >= 0");
        if (mean == 0.0) return 0;
        if (mean < 10.0) {
            const double limit = std::exp(-mean);
            std::int64_t k = 0;
            double prod = uniform01();
            while (prod > limit) {
                ++k;
                prod *= uniform01();
            }
            return k;
        }
        const double slam = std::sqrt(mean);
        const double loglam = std::log(mean);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double vr = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            const double u = uniform01() - 0.5;
            double v = uniform01();
            const double us = 0.5 - std::fabs(u);
            const auto k = std::int64_t(std::floor((2.0 * a / us + b) * u + mean + 0.43));
            if (us >= 0.07 && v <= vr) return k;
            if (k < 0 || (us < 0.013 && v > us)) continue;
            if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
                double(k) * loglam - mean - log_factorial(k))
                return k;
        }
    }

    /// Binomial sample; inversion for small n*p, transformed rejection (BTRS)
    /// otherwise.
    std::int64_t binomial(std::int64_t n, double p) {
        if (n < 0) throw ValidationError("binomial: n must be >= 0");
        if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("binomial: p must be in [0,1]");
        if (n == 0 || p == 0.0) return 0;
        if (p == 1.0) return n;
        const bool flipped = p > 0.5;
        const double q = flipped ? 1.0 - p : p;
        const std::int64_t k = double(n) * q < 10.0 ? binomial_inversion(n, q) : binomial_btrs(n, q);
        return flipped ? n - k : k;
    }

  private:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

    static std::uint64_t mix(std::uint64_t x) {
        x ^= x >> 30;
        x *= 0xBF58476D1CE4E5B9ull;
        x ^= x >> 27;
        x *= 0x94D049BB133111EBull;
        x ^= x >> 31;
        return x;
    }

    std::int64_t binomial_inversion(std::int64_t n, double q) {
        // n q < 10 keeps (1-q)^n well above underflow.
        const double ratio = q / (1.0 - q);
        double f = std::pow(1.0 - q, double(n));
        double u = uniform01();
        std::int64_t k = 0;
        while (u > f) {
            u -= f;
            ++k;
            if (k > n) {  // guard against fp residue in the far tail
                k = n;
                break;
            }
            f *= ratio * double(n - k + 1) / double(k);
        }
        return k;
    }

    // Hormann's transformed rejection with squeeze, as used for n q >= 10.
    std::int64_t binomial_btrs(std::int64_t n, double q) {
        const double nd = double(n);
        const double spq = std::sqrt(nd * q * (1.0 - q));
        const double b = 1.15 + 2.53 * spq;
        const double a = -0.0873 + 0.0248 * b + 0.01 * q;
        const double c = nd * q + 0.5;
        const double vr = 0.92 - 4.2 / b;
        const double urvr = 0.86 * vr;
        const double alpha = (2.83 + 5.1 / b) * spq;
        const double lpq = std::log(q / (1.0 - q));
        const auto m = std::int64_t(std::floor((nd + 1.0) * q));
        const double h = log_factorial(m) + log_factorial(n - m);
        for (;;) {
            double u, v = uniform01();
            if (v <= urvr) {
                u = v / vr - 0.43;
                return std::int64_t(std::floor((2.0 * a / (0.5 - std::fabs(u)) + b) * u + c));
            }
            if (v >= vr) {
                u = uniform01() - 0.5;
            } else {
                u = v / vr - 0.93;
                u = (u < 0.0 ? -0.5 : 0.5) - u;
                v = uniform01() * vr;
            }
            const double us = 0.5 - std::fabs(u);
            const auto k = std::int64_t(std::floor((2.0 * a / us + b) * u + c));
            if (k < 0 || k > n) continue;
            v = v * alpha / (a / (us * us) + b);
            if (std::log(v) <= h - log_factorial(k) - log_factorial(n - k) + double(k - m) * lpq)
                return k;
        }
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace qread
