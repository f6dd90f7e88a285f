#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qread/discriminate.hpp"
#include "qread/errors.hpp"
#include "qread/rng.hpp"

namespace qread {

enum class Transmitter { tmsv, coherent };
enum class Sampling { exact_pair, gaussian };

/// One acquired (or simulated) frame: the integrated region counts of both
/// arms. Counts are real-valued after electronic-noise addition and clamped
/// at zero. truth is present for simulated or labeled calibration data.
struct FrameRecord {
    std::int64_t frame_id = 0;
    double n_s = 0.0;
    double n_i = 0.0;
    std::optional<int> truth;
};

struct FrameSet {
    std::vector<FrameRecord> frames;

    double mean_s() const {
        double s = 0.0;
        for (const auto& f : frames) s += f.n_s;
        return frames.empty() ? 0.0 : s / double(frames.size());
    }
    double mean_i() const {
        double s = 0.0;
        for (const auto& f : frames) s += f.n_i;
        return frames.empty() ? 0.0 : s / double(frames.size());
    }

    /// CSV with header frame_id,n_s,n_i,truth; floats carry 17 significant
    /// digits so re-reading reproduces the values bit-exactly.
    void write_csv(std::ostream& os) const {
        os << "frame_id,n_s,n_i,truth\n";
        char buf[128];
        for (const auto& f : frames) {
            std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,", (long long)f.frame_id, f.n_s, f.n_i);
            os << buf;
            if (f.truth)
                os << *f.truth << '\n';
            else
                os << "NA\n";
        }
    }

    static FrameSet read_csv(std::istream& is) {
        FrameSet set;
        std::string line;
        if (!std::getline(is, line)) throw ValidationError("FrameSet: empty CSV");
        if (line.size() && line.back() == '\r') line.pop_back();
        if (line != "frame_id,n_s,n_i,truth")
            throw ValidationError("FrameSet: unexpected CSV header '" + line + "'");
        while (std::getline(is, line)) {
            if (line.size() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            FrameRecord f;
            char truth[8] = {0};
            long long id = 0;
            if (std::sscanf(line.c_str(), "%lld,%lf,%lf,%7s", &id, &f.n_s, &f.n_i, truth) != 4)
                throw ValidationError("FrameSet: bad CSV record '" + line + "'");
            f.frame_id = id;
            if (truth[0] == '0' && truth[1] == 0)
                f.truth = 0;
            else if (truth[0] == '1' && truth[1] == 0)
                f.truth = 1;
            else if (std::string(truth) == "NA")
                f.truth.reset();
            else
                throw ValidationError("FrameSet: bad truth field '" + std::string(truth) + "'");
            set.frames.push_back(f);
        }
        return set;
    }

    /// JSON-lines mirror of the CSV fields; absent truth serializes as null.
    void write_jsonl(std::ostream& os) const {
        char buf[192];
        for (const auto& f : frames) {
            std::snprintf(buf, sizeof buf, "{\"frame_id\":%lld,\"n_s\":%.17g,\"n_i\":%.17g,\"truth\":",
                          (long long)f.frame_id, f.n_s, f.n_i);
            os << buf;
            if (f.truth)
                os << *f.truth << "}\n";
            else
                os << "null}\n";
        }
    }

    static FrameSet read_jsonl(std::istream& is) {
        FrameSet set;
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            FrameRecord f;
            long long id = 0;
            int t = -1;
            if (std::sscanf(line.c_str(), "{\"frame_id\":%lld,\"n_s\":%lf,\"n_i\":%lf,\"truth\":%d}",
                            &id, &f.n_s, &f.n_i, &t) == 4) {
                f.truth = t;
            } else if (std::sscanf(line.c_str(),
                                   "{\"frame_id\":%lld,\"n_s\":%lf,\"n_i\":%lf,\"truth\":null}", &id,
                                   &f.n_s, &f.n_i) == 3) {
                f.truth.reset();
            } else {
                throw ValidationError("FrameSet: bad JSONL record '" + line + "'");
            }
            f.frame_id = id;
            set.frames.push_back(f);
        }
        return set;
    }
};

/// Frame-generation configuration for one simulated acquisition.
struct SimConfig {
    Transmitter transmitter = Transmitter::tmsv;
    ChannelPair pair;
    std::int64_t frames_per_set = 10000;
    std::uint64_t rng_seed = 0;
    Sampling sampling = Sampling::exact_pair;
    int threads = 1;

    static constexpr double kExactPairEnergyGuard = 1e7;

    void validate() const {
        pair.validate();
        if (frames_per_set < 1) throw ValidationError("SimConfig: frames_per_set must be >= 1");
        if (threads < 1) throw ValidationError("SimConfig: threads must be >= 1");
        if (sampling == Sampling::exact_pair && pair.mean_signal_photons > kExactPairEnergyGuard)
            throw RuntimeGuard("SimConfig: exact-pair sampling limited to N <= 1e7");
    }
};

namespace detail {

// Substream ids: arm index in the low bits, set/purpose tag above, so every
// (seed, frame_id, arm) triple is an independent stream.
inline constexpr std::uint64_t kArmPair = 0;
inline constexpr std::uint64_t kArmSignal = 1;
inline constexpr std::uint64_t kArmIdler = 2;
inline constexpr std::uint64_t kTagTruth1 = 1ull << 8;
inline constexpr std::uint64_t kTagClassical = 1ull << 9;
inline constexpr std::uint64_t kTagDark = 1ull << 10;
inline constexpr std::uint64_t kTagShutter = 1ull << 11;

inline double arm_noise(CounterRng& rng, const ChannelPair& pair, double base) {
    double v = base;
    if (pair.straylight_mean > 0.0) v += double(rng.poisson(pair.straylight_mean));
    if (pair.electronic_variance > 0.0)
        v += rng.normal(0.0, std::sqrt(pair.electronic_variance));
    return std::max(0.0, v);
}

template <typename PerFrame>
FrameSet generate(std::int64_t frames, int threads, PerFrame&& per_frame) {
    FrameSet set;
    set.frames.resize(std::size_t(frames));
    if (threads <= 1) {
        for (std::int64_t i = 0; i < frames; ++i) set.frames[std::size_t(i)] = per_frame(i);
        return set;
    }
    std::vector<std::thread> pool;
    const std::int64_t chunk = (frames + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const std::int64_t lo = t * chunk;
        const std::int64_t hi = std::min(frames, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &set, &per_frame] {
            for (std::int64_t i = lo; i < hi; ++i) set.frames[std::size_t(i)] = per_frame(i);
        });
    }
    for (auto& th : pool) th.join();
    return set;
}

}  // namespace detail

/// Simulate a single frame under the given truth bit. Exact-pair mode draws
/// the pair count Poisson(N) and thins each arm binomially; Gaussian mode
/// samples the bivariate normal model directly. Straylight adds Poisson
/// counts and electronic noise adds zero-mean Gaussian counts per region.
inline FrameRecord simulate_frame(const SimConfig& cfg, int truth, std::int64_t frame_id) {
    const ChannelPair& pair = cfg.pair;
    const double tau = truth ? pair.tau1 : pair.tau0;
    const std::uint64_t tag = truth ? detail::kTagTruth1 : 0;
    FrameRecord f;
    f.frame_id = frame_id;
    f.truth = truth;
    if (cfg.transmitter == Transmitter::coherent) {
        CounterRng s(cfg.rng_seed, std::uint64_t(frame_id), detail::kArmSignal | tag);
        const double lam = pair.eta_s * tau * pair.mean_signal_photons;
        f.n_s = detail::arm_noise(s, pair, double(s.poisson(lam)));
        f.n_i = 0.0;
        return f;
    }
    if (cfg.sampling == Sampling::gaussian) {
        const GaussianPairModel m = gaussian_likelihood_model(pair, truth);
        CounterRng s(cfg.rng_seed, std::uint64_t(frame_id), detail::kArmSignal | tag);
        const double z1 = s.normal(0.0, 1.0), z2 = s.normal(0.0, 1.0);
        const double l11 = std::sqrt(m.var_s);
        const double l21 = m.cov / l11;
        const double l22 = std::sqrt(std::max(0.0, m.var_i - l21 * l21));
        f.n_s = std::max(0.0, m.mean_s + l11 * z1);
        f.n_i = std::max(0.0, m.mean_i + l21 * z1 + l22 * z2);
        return f;
    }
    CounterRng pr(cfg.rng_seed, std::uint64_t(frame_id), detail::kArmPair | tag);
    const std::int64_t n = pr.poisson(pair.mean_signal_photons);
    CounterRng s(cfg.rng_seed, std::uint64_t(frame_id), detail::kArmSignal | tag);
    CounterRng i(cfg.rng_seed, std::uint64_t(frame_id), detail::kArmIdler | tag);
    f.n_s = detail::arm_noise(s, pair, double(s.binomial(n, pair.eta_s * tau)));
    f.n_i = detail::arm_noise(i, pair, double(i.binomial(n, pair.eta_i)));
    return f;
}

/// One acquisition: frames_per_set frames under a fixed truth bit.
/// Deterministic for a given (seed, config) at any thread count.
inline FrameSet simulate_set(const SimConfig& cfg, int truth) {
    cfg.validate();
    return detail::generate(cfg.frames_per_set, cfg.threads,
                            [&](std::int64_t id) { return simulate_frame(cfg, truth, id); });
}

/// Reference data with the quantum correlation removed: both arms are
/// independent Poisson with the same marginal means as the pair source set.
inline FrameSet classically_correlated_set(const SimConfig& cfg, int truth) {
    cfg.validate();
    const ChannelPair& pair = cfg.pair;
    const double tau = truth ? pair.tau1 : pair.tau0;
    const std::uint64_t tag = detail::kTagClassical | (truth ? detail::kTagTruth1 : 0);
    return detail::generate(cfg.frames_per_set, cfg.threads, [&, tau, tag](std::int64_t id) {
        FrameRecord f;
        f.frame_id = id;
        f.truth = truth;
        CounterRng s(cfg.rng_seed, std::uint64_t(id), detail::kArmSignal | tag);
        CounterRng i(cfg.rng_seed, std::uint64_t(id), detail::kArmIdler | tag);
        f.n_s = detail::arm_noise(s, pair, double(s.poisson(pair.eta_s * tau * pair.mean_signal_photons)));
        f.n_i = detail::arm_noise(i, pair, double(i.poisson(pair.eta_i * pair.mean_signal_photons)));
        return f;
    });
}

/// Frames of a dark detector region: straylight plus electronic noise only.
/// Calibration frames keep signed (bias-subtracted) values; clamping here
/// would bias the noise estimators built on them.
inline FrameSet simulate_dark_set(const SimConfig& cfg, std::int64_t frames) {
    cfg.validate();
    return detail::generate(frames, cfg.threads, [&](std::int64_t id) {
        FrameRecord f;
        f.frame_id = id;
        CounterRng s(cfg.rng_seed, std::uint64_t(id), detail::kArmSignal | detail::kTagDark);
        double v = 0.0;
        if (cfg.pair.straylight_mean > 0.0) v += double(s.poisson(cfg.pair.straylight_mean));
        if (cfg.pair.electronic_variance > 0.0)
            v += s.normal(0.0, std::sqrt(cfg.pair.electronic_variance));
        f.n_s = f.n_i = v;
        return f;
    });
}

/// Shutter-closed frames: electronic noise alone, signed values kept.
inline FrameSet simulate_shutter_set(const SimConfig& cfg, std::int64_t frames) {
    cfg.validate();
    return detail::generate(frames, cfg.threads, [&](std::int64_t id) {
        FrameRecord f;
        f.frame_id = id;
        CounterRng s(cfg.rng_seed, std::uint64_t(id), detail::kArmSignal | detail::kTagShutter);
        const double v = cfg.pair.electronic_variance > 0.0
                             ? s.normal(0.0, std::sqrt(cfg.pair.electronic_variance))
                             : 0.0;
        f.n_s = f.n_i = v;
        return f;
    });
}

}  // namespace qread
