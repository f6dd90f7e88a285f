#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "qread/errors.hpp"
#include "qread/special_functions.hpp"

namespace qread {

/// B(n | m, tau): probability that n of m photons survive independent
/// Bernoulli(tau) loss trials. Zero for n > m. Evaluated multiplicatively for
/// small m and in log space above m = 100, where the direct product can
/// overflow or lose the leading binomial factor.
inline double binomial_kernel(std::int64_t n, std::int64_t m, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError("binomial_kernel: tau must be in [0,1]");
    if (n < 0 || m < 0) throw ValidationError("binomial_kernel: counts must be non-negative");
    if (n > m) return 0.0;
    if (tau == 0.0) return n == 0 ? 1.0 : 0.0;
    if (tau == 1.0) return n == m ? 1.0 : 0.0;
    if (m <= 100) {
        // C(m,n) tau^n interleaved to keep intermediates in range.
        double r = 1.0;
        for (std::int64_t i = 1; i <= n; ++i) r *= double(m - n + i) / double(i) * tau;
        for (std::int64_t i = 0; i < m - n; ++i) r *= 1.0 - tau;
        return r;
    }
    const double lg = log_choose(m, n) + double(n) * std::log(tau) + double(m - n) * std::log1p(-tau);
    return std::exp(lg);
}

/// Pure-loss (attenuation) channel acting on photon-number statistics.
class LossChannel {
  public:
    explicit LossChannel(double tau) : tau_(tau) {
        if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError("LossChannel: tau must be in [0,1]");
    }
    double tau() const { return tau_; }

  private:
    double tau_;
};

/// Two losses in series are one loss with the product transmittance.
inline LossChannel compose_losses(double tau, double eta) {
    LossChannel a(tau), b(eta);  // validates both
    return LossChannel(a.tau() * b.tau());
}

/// Photon-number pmf on 0..n_max with the truncated tail kept below
/// kTailMass by the factory constructors. Construction from raw values
/// requires normalization within kNormTolerance; renormalized() is the
/// explicit escape hatch for heavier truncation.
class PhotonDistribution {
  public:
    static constexpr double kTailMass = 1e-12;
    static constexpr double kNormTolerance = 1e-9;

    explicit PhotonDistribution(std::vector<double> pmf) : pmf_(std::move(pmf)) {
        if (pmf_.empty()) throw ValidationError("PhotonDistribution: empty pmf");
        double sum = 0.0;
        for (double p : pmf_) {
            if (!(p >= 0.0)) throw ValidationError("PhotonDistribution: negative or NaN entry");
            sum += p;
        }
        if (std::fabs(sum - 1.0) > kNormTolerance)
            throw ValidationError("PhotonDistribution: pmf sums to " + std::to_string(sum) +
                                  "; renormalize explicitly if truncation was intended");
    }

    /// Explicit renormalization entry point for raw weights (e.g. truncated
    /// tails): rescales to unit mass instead of rejecting.
    static PhotonDistribution from_unnormalized(std::vector<double> weights) {
        double sum = 0.0;
        for (double p : weights) {
            if (!(p >= 0.0)) throw ValidationError("from_unnormalized: negative or NaN entry");
            sum += p;
        }
        if (!(sum > 0.0)) throw ValidationError("from_unnormalized: zero total mass");
        for (double& p : weights) p /= sum;
        return PhotonDistribution(std::move(weights));
    }

    /// Deterministic n-photon state.
    static PhotonDistribution fock(std::int64_t n) {
        if (n < 0) throw ValidationError("fock: n must be >= 0");
        std::vector<double> p(std::size_t(n) + 1, 0.0);
        p.back() = 1.0;
        return PhotonDistribution(std::move(p));
    }

    /// Poisson(lambda) statistics (coherent light).
    static PhotonDistribution poisson(double lambda) {
        if (!(lambda >= 0.0)) throw ValidationError("poisson: lambda must be >= 0");
        if (lambda == 0.0) return fock(0);
        const std::int64_t n_max = tail_cutoff(lambda, std::sqrt(lambda));
        std::vector<double> p(std::size_t(n_max) + 1);
        const double ll = std::log(lambda);
        for (std::int64_t n = 0; n <= n_max; ++n)
            p[std::size_t(n)] = std::exp(-lambda + double(n) * ll - log_factorial(n));
        return from_truncated(std::move(p));
    }

    /// Bose-Einstein statistics with the given mean (single thermal mode).
    static PhotonDistribution thermal(double mean) {
        if (!(mean >= 0.0)) throw ValidationError("thermal: mean must be >= 0");
        if (mean == 0.0) return fock(0);
        const double r = mean / (1.0 + mean);
        // Geometric tail: mass above n_max is r^(n_max+1).
        const std::int64_t n_max =
            std::max<std::int64_t>(1, std::int64_t(std::ceil(std::log(kTailMass) / std::log(r))));
        std::vector<double> p(std::size_t(n_max) + 1);
        double w = 1.0 / (1.0 + mean);
        for (std::int64_t n = 0; n <= n_max; ++n, w *= r) p[std::size_t(n)] = w;
        return from_truncated(std::move(p));
    }

    /// Total counts of `modes` i.i.d. thermal modes with mean_per_mode photons
    /// each: a negative binomial with r = modes. For mean_per_mode << 1 this
    /// approaches Poisson(modes * mean_per_mode).
    static PhotonDistribution multithermal_total(std::int64_t modes, double mean_per_mode) {
        if (modes < 1) throw ValidationError("multithermal_total: modes must be >= 1");
        if (!(mean_per_mode >= 0.0)) throw ValidationError("multithermal_total: mean must be >= 0");
        if (mean_per_mode == 0.0) return fock(0);
        const double q = mean_per_mode / (1.0 + mean_per_mode);
        const double mean = double(modes) * mean_per_mode;
        const double sd = std::sqrt(mean * (1.0 + mean_per_mode));
        const std::int64_t n_max = tail_cutoff(mean, sd);
        const double r = double(modes);
        const double lgr = std::lgamma(r);
        const double lq = std::log(q), l1q = std::log1p(-q);
        std::vector<double> p(std::size_t(n_max) + 1);
        for (std::int64_t n = 0; n <= n_max; ++n)
            p[std::size_t(n)] = std::exp(std::lgamma(double(n) + r) - log_factorial(n) - lgr +
                                         r * l1q + double(n) * lq);
        return from_truncated(std::move(p));
    }

    std::int64_t n_max() const { return std::int64_t(pmf_.size()) - 1; }
    double p(std::int64_t n) const {
        return (n >= 0 && n < std::int64_t(pmf_.size())) ? pmf_[std::size_t(n)] : 0.0;
    }
    const std::vector<double>& pmf() const { return pmf_; }

    double total() const { return std::accumulate(pmf_.begin(), pmf_.end(), 0.0); }

    double mean() const {
        double m = 0.0;
        for (std::size_t n = 0; n < pmf_.size(); ++n) m += double(n) * pmf_[n];
        return m;
    }

    double variance() const {
        const double m = mean();
        double v = 0.0;
        for (std::size_t n = 0; n < pmf_.size(); ++n) v += (double(n) - m) * (double(n) - m) * pmf_[n];
        return v;
    }

    PhotonDistribution renormalized() const {
        const double s = total();
        if (s <= 0.0) throw ValidationError("renormalized: zero total mass");
        std::vector<double> p(pmf_);
        for (double& x : p) x /= s;
        return PhotonDistribution(std::move(p));
    }

  private:
    // Mean + 10 sigma + margin, then verified/extended so the dropped tail is
    // provably below kTailMass.
    static std::int64_t tail_cutoff(double mean, double sd) {
        return std::int64_t(std::ceil(mean + 10.0 * sd + 36.0));
    }

    static PhotonDistribution from_truncated(std::vector<double> p) {
        PhotonDistribution d{unchecked_tag{}};
        d.pmf_ = std::move(p);
        const double tail = 1.0 - d.total();
        if (tail > kTailMass)
            throw ValidationError("PhotonDistribution: truncation tail above tolerance");
        return d;
    }

    struct unchecked_tag {};
    explicit PhotonDistribution(unchecked_tag) {}

    std::vector<double> pmf_;
};

/// Compound the pmf with the loss channel's binomial kernel:
/// out(n) = sum_m in(m) B(n | m, tau).
inline PhotonDistribution apply_loss(const PhotonDistribution& dist, const LossChannel& ch) {
    const auto& in = dist.pmf();
    const double tau = ch.tau();
    std::vector<double> out(in.size(), 0.0);
    for (std::int64_t m = 0; m < std::int64_t(in.size()); ++m) {
        const double w = in[std::size_t(m)];
        if (w == 0.0) continue;
        for (std::int64_t n = 0; n <= m; ++n) out[std::size_t(n)] += w * binomial_kernel(n, m, tau);
    }
    // Loss cannot push mass above the input support, so the input's
    // truncation level (and the normalization check) carry over.
    return PhotonDistribution(std::move(out));
}

/// Two EPR-correlated thermal-marginal modes: the signal/idler pair source.
struct TmsvSource {
    double mean_photons = 0.0;  // per-mode mean photon number N
    std::int64_t modes = 1;     // M identical copies

    TmsvSource(double mean_photons_, std::int64_t modes_ = 1)
        : mean_photons(mean_photons_), modes(modes_) {
        if (!(mean_photons >= 0.0)) throw ValidationError("TmsvSource: mean_photons must be >= 0");
        if (modes < 1) throw ValidationError("TmsvSource: modes must be >= 1");
    }
};

/// Joint pmf over count pairs (n_s, n_i) on a rectangular support.
class JointCountPmf {
  public:
    JointCountPmf(std::int64_t ns_max, std::int64_t ni_max)
        : ns_max_(ns_max), ni_max_(ni_max),
          p_(std::size_t(ns_max + 1) * std::size_t(ni_max + 1), 0.0) {
        if (ns_max < 0 || ni_max < 0) throw ValidationError("JointCountPmf: negative support");
    }

    std::int64_t ns_max() const { return ns_max_; }
    std::int64_t ni_max() const { return ni_max_; }

    double& at(std::int64_t ns, std::int64_t ni) {
        return p_[std::size_t(ns) * std::size_t(ni_max_ + 1) + std::size_t(ni)];
    }
    double at(std::int64_t ns, std::int64_t ni) const {
        return p_[std::size_t(ns) * std::size_t(ni_max_ + 1) + std::size_t(ni)];
    }
    /// Zero outside the stored support.
    double p(std::int64_t ns, std::int64_t ni) const {
        if (ns < 0 || ni < 0 || ns > ns_max_ || ni > ni_max_) return 0.0;
        return at(ns, ni);
    }

    double total() const { return std::accumulate(p_.begin(), p_.end(), 0.0); }

    PhotonDistribution marginal_signal() const {
        std::vector<double> m(std::size_t(ns_max_) + 1, 0.0);
        for (std::int64_t ns = 0; ns <= ns_max_; ++ns)
            for (std::int64_t ni = 0; ni <= ni_max_; ++ni) m[std::size_t(ns)] += at(ns, ni);
        return PhotonDistribution(std::move(m));
    }

    PhotonDistribution marginal_idler() const {
        std::vector<double> m(std::size_t(ni_max_) + 1, 0.0);
        for (std::int64_t ns = 0; ns <= ns_max_; ++ns)
            for (std::int64_t ni = 0; ni <= ni_max_; ++ni) m[std::size_t(ni)] += at(ns, ni);
        return PhotonDistribution(std::move(m));
    }

  private:
    std::int64_t ns_max_, ni_max_;
    std::vector<double> p_;
};

/// Dense joint tables scale as the squared thermal cutoff (~28 N); past this
/// support the exact route is not tractable and the Gaussian model applies.
inline constexpr std::int64_t kMaxJointSupport = 2000;

inline void check_joint_support(std::int64_t n_max) {
    if (n_max > kMaxJointSupport)
        throw RuntimeGuard("joint pmf support " + std::to_string(n_max) +
                           " exceeds the exact-evaluation guard; use the Gaussian model");
}

/// Ideal single-copy pair-source joint statistics: perfectly correlated
/// counts with thermal weights, all mass on the diagonal n_s == n_i.
inline JointCountPmf tmsv_joint_ideal(const TmsvSource& src) {
    if (src.modes != 1) throw ValidationError("tmsv_joint_ideal: exact pmf implemented for modes == 1");
    const PhotonDistribution w = PhotonDistribution::thermal(src.mean_photons);
    check_joint_support(w.n_max());
    JointCountPmf j(w.n_max(), w.n_max());
    for (std::int64_t n = 0; n <= w.n_max(); ++n) j.at(n, n) = w.p(n);
    return j;
}

/// Joint statistics after independent losses on each arm:
/// P(n_s, n_i) = sum_n w(n) B(n_s | n, tau_s) B(n_i | n, tau_i).
inline JointCountPmf tmsv_joint_after_channels(const TmsvSource& src, double tau_s, double tau_i) {
    LossChannel cs(tau_s), ci(tau_i);  // validates
    if (src.modes != 1)
        throw ValidationError("tmsv_joint_after_channels: exact pmf implemented for modes == 1");
    const PhotonDistribution w = PhotonDistribution::thermal(src.mean_photons);
    check_joint_support(w.n_max());
    const std::int64_t k = w.n_max();
    JointCountPmf j(k, k);
    if (tau_i == 1.0) {
        for (std::int64_t n = 0; n <= k; ++n)
            for (std::int64_t ns = 0; ns <= n; ++ns) j.at(ns, n) = w.p(n) * binomial_kernel(ns, n, tau_s);
        return j;
    }
    if (tau_s == 1.0) {
        for (std::int64_t n = 0; n <= k; ++n)
            for (std::int64_t ni = 0; ni <= n; ++ni) j.at(n, ni) = w.p(n) * binomial_kernel(ni, n, tau_i);
        return j;
    }
    // Precompute kernel rows once; the triple loop is then a cheap rank-1 sum.
    std::vector<std::vector<double>> bs(std::size_t(k) + 1), bi(std::size_t(k) + 1);
    for (std::int64_t n = 0; n <= k; ++n) {
        bs[std::size_t(n)].resize(std::size_t(n) + 1);
        bi[std::size_t(n)].resize(std::size_t(n) + 1);
        for (std::int64_t x = 0; x <= n; ++x) {
            bs[std::size_t(n)][std::size_t(x)] = binomial_kernel(x, n, tau_s);
            bi[std::size_t(n)][std::size_t(x)] = binomial_kernel(x, n, tau_i);
        }
    }
    for (std::int64_t n = 0; n <= k; ++n) {
        const double wn = w.p(n);
        if (wn == 0.0) continue;
        for (std::int64_t ns = 0; ns <= n; ++ns) {
            const double f = wn * bs[std::size_t(n)][std::size_t(ns)];
            if (f < 1e-300) continue;
            for (std::int64_t ni = 0; ni <= n; ++ni)
                j.at(ns, ni) += f * bi[std::size_t(n)][std::size_t(ni)];
        }
    }
    return j;
}

/// Exact joint law of the many-mode pair model: pair count ~ Poisson(rate),
/// each pair detected on the signal arm with probability p_s and on the idler
/// arm with probability p_i, independently. This is the law the Monte Carlo
/// frame generator samples, and the one the Gaussian count model approximates.
inline JointCountPmf pair_joint_after_channels(double pair_rate, double p_s, double p_i) {
    if (!(pair_rate >= 0.0)) throw ValidationError("pair_joint_after_channels: rate must be >= 0");
    LossChannel cs(p_s), ci(p_i);  // validates
    const PhotonDistribution w = PhotonDistribution::poisson(pair_rate);
    check_joint_support(w.n_max());
    const std::int64_t k = w.n_max();
    JointCountPmf j(k, k);
    std::vector<std::vector<double>> bs(std::size_t(k) + 1), bi(std::size_t(k) + 1);
    for (std::int64_t n = 0; n <= k; ++n) {
        bs[std::size_t(n)].resize(std::size_t(n) + 1);
        bi[std::size_t(n)].resize(std::size_t(n) + 1);
        for (std::int64_t x = 0; x <= n; ++x) {
            bs[std::size_t(n)][std::size_t(x)] = binomial_kernel(x, n, p_s);
            bi[std::size_t(n)][std::size_t(x)] = binomial_kernel(x, n, p_i);
        }
    }
    for (std::int64_t n = 0; n <= k; ++n) {
        const double wn = w.p(n);
        if (wn < 1e-300) continue;
        for (std::int64_t ns = 0; ns <= n; ++ns) {
            const double f = wn * bs[std::size_t(n)][std::size_t(ns)];
            if (f < 1e-300) continue;
            for (std::int64_t ni = 0; ni <= n; ++ni)
                j.at(ns, ni) += f * bi[std::size_t(n)][std::size_t(ni)];
        }
    }
    return j;
}

enum class Arm { signal, idler };

/// Compound one arm of a joint pmf with a loss channel, leaving the other
/// arm untouched.
inline JointCountPmf apply_loss_to_arm(const JointCountPmf& j, const LossChannel& ch, Arm arm) {
    const double tau = ch.tau();
    JointCountPmf out(j.ns_max(), j.ni_max());
    if (arm == Arm::signal) {
        for (std::int64_t ns = 0; ns <= j.ns_max(); ++ns)
            for (std::int64_t ni = 0; ni <= j.ni_max(); ++ni) {
                const double w = j.at(ns, ni);
                if (w == 0.0) continue;
                for (std::int64_t n = 0; n <= ns; ++n)
                    out.at(n, ni) += w * binomial_kernel(n, ns, tau);
            }
    } else {
        for (std::int64_t ns = 0; ns <= j.ns_max(); ++ns)
            for (std::int64_t ni = 0; ni <= j.ni_max(); ++ni) {
                const double w = j.at(ns, ni);
                if (w == 0.0) continue;
                for (std::int64_t n = 0; n <= ni; ++n)
                    out.at(ns, n) += w * binomial_kernel(n, ni, tau);
            }
    }
    return out;
}

/// Effective Poisson rate of the total pair count for a many-mode source with
/// few photons per mode: the per-mode statistics are thermal, but the total
/// over modes >> 1 is Poissonian to excellent accuracy, so the Monte Carlo
/// pair model draws the pair number at rate Lambda = energy_total.
inline double pair_poisson_rate(const TmsvSource& src, double energy_total) {
    (void)src;
    if (!(energy_total >= 0.0)) throw ValidationError("pair_poisson_rate: energy must be >= 0");
    return energy_total;
}

}  // namespace qread
