#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "qread/errors.hpp"
#include "qread/montecarlo.hpp"

namespace qread {

/// Point estimate with a 1-sigma uncertainty from subset resampling.
struct Estimate {
    double value = 0.0;
    double stddev = 0.0;
};

/// Channel unbalance, correlation statistic, efficiencies and noise levels
/// recovered from frame data. out_of_range flags efficiency estimates that
/// fall outside (0, 1] (e.g. on classically correlated data); the values are
/// still reported.
struct CalibrationResult {
    Estimate gamma;
    Estimate sigma;  // sigma_{gamma,B} correlation statistic
    Estimate eta_s;
    Estimate eta_i;
    Estimate straylight_mean;
    Estimate electronic_variance;
    bool out_of_range = false;

    void write_json(std::ostream& os) const {
        char buf[512];
        const auto field = [&](const char* name, const Estimate& e, const char* sep) {
            std::snprintf(buf, sizeof buf, "  \"%s\": {\"value\": %.17g, \"stddev\": %.17g}%s\n",
                          name, e.value, e.stddev, sep);
            os << buf;
        };
        os << "{\n";
        field("gamma", gamma, ",");
        field("sigma", sigma, ",");
        field("eta_s", eta_s, ",");
        field("eta_i", eta_i, ",");
        field("straylight_mean", straylight_mean, ",");
        field("electronic_variance", electronic_variance, ",");
        os << "  \"out_of_range\": " << (out_of_range ? "true" : "false") << "\n}\n";
    }
};

namespace detail {

inline double sample_mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / double(v.size());
}

inline double sample_variance(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = sample_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / double(v.size() - 1);
}

// Standard deviation across per-subset estimates: the repeat-the-measurement
// uncertainty procedure, standardized on contiguous equal splits.
template <typename Fn>
Estimate subset_estimate(const FrameSet& frames, int subsets, Fn&& estimator) {
    Estimate e;
    e.value = estimator(frames);
    if (subsets < 2 || std::int64_t(frames.frames.size()) < subsets) return e;
    const std::int64_t n = std::int64_t(frames.frames.size());
    const std::int64_t chunk = n / subsets;
    std::vector<double> vals;
    for (int k = 0; k < subsets; ++k) {
        FrameSet sub;
        const std::int64_t lo = k * chunk;
        const std::int64_t hi = (k == subsets - 1) ? n : lo + chunk;
        sub.frames.assign(frames.frames.begin() + lo, frames.frames.begin() + hi);
        vals.push_back(estimator(sub));
    }
    e.stddev = std::sqrt(sample_variance(vals));
    return e;
}

}  // namespace detail

/// Channel unbalance gamma = <n_S> / <n_I>.
inline double estimate_gamma(const FrameSet& frames) {
    if (frames.frames.size() < 2) throw ValidationError("estimate_gamma: need >= 2 frames");
    const double mi = frames.mean_i();
    if (!(mi > 0.0)) throw EmptyIdler("estimate_gamma: idler mean is not positive");
    return frames.mean_s() / mi;
}

inline Estimate estimate_gamma_with_stddev(const FrameSet& frames, int subsets = 10) {
    return detail::subset_estimate(frames, subsets,
                                   [](const FrameSet& f) { return estimate_gamma(f); });
}

/// Noise-corrected signal-idler correlation statistic
///   sigma = Var(n_S - gamma n_I) / <n_S + gamma n_I> * <n_S> / <n_S - N_SL>
///         - (D2_el + <N_SL>) / <n_S - N_SL>,
/// with corrections on the signal side only, as the method prescribes.
inline double estimate_sigma(const FrameSet& frames, double gamma, double straylight_mean,
                             double electronic_variance) {
    if (frames.frames.size() < 2) throw ValidationError("estimate_sigma: need >= 2 frames");
    if (!std::isfinite(gamma) || !std::isfinite(straylight_mean) ||
        !std::isfinite(electronic_variance))
        throw ValidationError("estimate_sigma: inputs must be finite");
    std::vector<double> diff;
    diff.reserve(frames.frames.size());
    double sum_s = 0.0, sum_comb = 0.0;
    for (const auto& f : frames.frames) {
        diff.push_back(f.n_s - gamma * f.n_i);
        sum_s += f.n_s;
        sum_comb += f.n_s + gamma * f.n_i;
    }
    const double n = double(frames.frames.size());
    const double mean_s = sum_s / n;
    const double mean_comb = sum_comb / n;
    const double mean_s_minus_sl = mean_s - straylight_mean;
    if (!(mean_s_minus_sl > 0.0))
        throw DivisionDomain("estimate_sigma: <n_S - N_SL> is not positive");
    const double var_diff = detail::sample_variance(diff);
    return var_diff / mean_comb * mean_s / mean_s_minus_sl -
           (electronic_variance + straylight_mean) / mean_s_minus_sl;
}

/// Full efficiency calibration: gamma and sigma from the frames, then
///   eta_S = (1 + gamma)/2 - sigma,  eta_I = eta_S / gamma,
/// with subset-resampled 1-sigma uncertainties on every estimate.
inline CalibrationResult estimate_efficiencies(const FrameSet& frames, double straylight_mean,
                                               double electronic_variance, int subsets = 10) {
    CalibrationResult r;
    r.straylight_mean = {straylight_mean, 0.0};
    r.electronic_variance = {electronic_variance, 0.0};
    r.gamma = detail::subset_estimate(frames, subsets,
                                      [](const FrameSet& f) { return estimate_gamma(f); });
    const auto sigma_of = [&](const FrameSet& f) {
        return estimate_sigma(f, estimate_gamma(f), straylight_mean, electronic_variance);
    };
    r.sigma = detail::subset_estimate(frames, subsets, sigma_of);
    const auto eta_s_of = [&](const FrameSet& f) {
        return (1.0 + estimate_gamma(f)) / 2.0 - sigma_of(f);
    };
    const auto eta_i_of = [&](const FrameSet& f) { return eta_s_of(f) / estimate_gamma(f); };
    r.eta_s = detail::subset_estimate(frames, subsets, eta_s_of);
    r.eta_i = detail::subset_estimate(frames, subsets, eta_i_of);
    r.out_of_range = !(r.eta_s.value > 0.0 && r.eta_s.value <= 1.0) ||
                     !(r.eta_i.value > 0.0 && r.eta_i.value <= 1.0);
    return r;
}

/// Straylight and electronic noise from auxiliary acquisitions: the shutter
/// set fixes the electronic variance (and any residual offset), the dark
/// region set minus that offset gives the straylight mean.
inline std::pair<Estimate, Estimate> estimate_noise(const FrameSet& dark_frames,
                                                    const FrameSet& shutter_frames,
                                                    int subsets = 10) {
    if (dark_frames.frames.empty() || shutter_frames.frames.empty())
        throw ValidationError("estimate_noise: both frame sets must be non-empty");
    const double offset = shutter_frames.mean_s();
    const Estimate straylight = detail::subset_estimate(
        dark_frames, subsets, [offset](const FrameSet& f) { return f.mean_s() - offset; });
    const Estimate elec = detail::subset_estimate(shutter_frames, subsets, [](const FrameSet& f) {
        std::vector<double> v;
        v.reserve(f.frames.size());
        for (const auto& fr : f.frames) v.push_back(fr.n_s);
        return detail::sample_variance(v);
    });
    return {straylight, elec};
}

}  // namespace qread
