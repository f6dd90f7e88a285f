#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <utility>
#include <variant>

#include "qread/errors.hpp"
#include "qread/photon_stats.hpp"
#include "qread/special_functions.hpp"

namespace qread {

/// One binary memory-cell discrimination instance: the two cell
/// transmittances, the detection efficiencies of both arms, the mean signal
/// energy addressed to the cell, and the per-region detector noise.
struct ChannelPair {
    double tau0 = 0.0;                 // transmittance encoding bit 0
    double tau1 = 1.0;                 // transmittance encoding bit 1
    double eta_s = 1.0;                // signal-arm detection efficiency
    double eta_i = 1.0;                // idler-arm detection efficiency
    double mean_signal_photons = 0.0;  // N at the memory cell
    double straylight_mean = 0.0;      // background photons per region per frame
    double electronic_variance = 0.0;  // read-noise variance per region per frame

    void validate() const {
        if (!(tau0 >= 0.0 && tau1 <= 1.0 && tau0 <= tau1))
            throw ValidationError("ChannelPair: need 0 <= tau0 <= tau1 <= 1");
        if (!(eta_s > 0.0 && eta_s <= 1.0 && eta_i > 0.0 && eta_i <= 1.0))
            throw ValidationError("ChannelPair: efficiencies must be in (0,1]");
        if (!(mean_signal_photons >= 0.0))
            throw ValidationError("ChannelPair: mean_signal_photons must be >= 0");
        if (!(straylight_mean >= 0.0) || !(electronic_variance >= 0.0))
            throw ValidationError("ChannelPair: noise terms must be >= 0");
    }
};

/// Error-probability floor for any transmitter with classical photon
/// statistics at mean signal energy n_photons:
/// (1 - sqrt(1 - exp(-N (sqrt(tau1) - sqrt(tau0))^2))) / 2.
inline double classical_bound(double n_photons, double tau0, double tau1) {
    if (!(tau0 >= 0.0 && tau1 <= 1.0 && tau0 <= tau1))
        throw ValidationError("classical_bound: need 0 <= tau0 <= tau1 <= 1");
    if (!(n_photons >= 0.0)) throw ValidationError("classical_bound: n_photons must be >= 0");
    const double d = std::sqrt(tau1) - std::sqrt(tau0);
    const double x = n_photons * d * d;
    return (1.0 - std::sqrt(-std::expm1(-x))) / 2.0;
}

/// Detection losses on the signal arm are indistinguishable from cell
/// attenuation, so analysis uses the effective pair (eta_s tau0, eta_s tau1)
/// with a perfect signal arm. Applies to the classical bound as well.
inline std::pair<double, double> substitute_efficiency(const ChannelPair& pair) {
    pair.validate();
    return {pair.eta_s * pair.tau0, pair.eta_s * pair.tau1};
}

/// Count threshold of the single-beam photon-counting rule for Poisson
/// statistics: decide tau0 iff n <= lambda (tau1 - tau0) / log(tau1/tau0).
inline double coherent_threshold(double lambda, double tau0, double tau1) {
    if (!(lambda >= 0.0)) throw ValidationError("coherent_threshold: lambda must be >= 0");
    if (!(tau0 >= 0.0 && tau1 <= 1.0 && tau0 <= tau1))
        throw ValidationError("coherent_threshold: need 0 <= tau0 <= tau1 <= 1");
    if (tau0 == tau1) throw DegenerateChannels("coherent_threshold: tau0 == tau1");
    if (tau0 == 0.0) throw DegenerateChannels("coherent_threshold: tau0 == 0");
    return lambda * (tau1 - tau0) / std::log(tau1 / tau0);
}

/// Success probability of the single-beam photon-counting rule on Poisson
/// statistics, via regularized incomplete gamma CDFs split at the floored
/// threshold (boundary count decided as tau0).
inline double coherent_success_probability(double lambda, double tau0, double tau1) {
    const double n_th = coherent_threshold(lambda, tau0, tau1);
    const auto k = std::int64_t(std::floor(n_th));
    return 0.5 * (poisson_cdf(k, lambda * tau0) + 1.0 - poisson_cdf(k, lambda * tau1));
}

inline double coherent_error_probability(double lambda, double tau0, double tau1) {
    return 1.0 - coherent_success_probability(lambda, tau0, tau1);
}

/// Slope of the pair-count decision line n_s <= slope * n_i for the
/// idler-preserving pair transmitter. tau1 -> 1 and tau0 -> 0 are handled by
/// their analytic limits (slope 1 and 0).
inline double tmsv_threshold_slope(double tau0, double tau1) {
    if (!(tau0 >= 0.0 && tau1 <= 1.0 && tau0 <= tau1))
        throw ValidationError("tmsv_threshold_slope: need 0 <= tau0 <= tau1 <= 1");
    if (tau0 == tau1) throw DegenerateChannels("tmsv_threshold_slope: tau0 == tau1");
    if (tau1 == 1.0) return 1.0;
    if (tau0 == 0.0) return 0.0;
    return 1.0 / (std::log(tau1 / tau0) / std::log((1.0 - tau0) / (1.0 - tau1)) + 1.0);
}

/// Idler-conditioned threshold: decide tau0 iff n_s <= slope * n_i.
inline double tmsv_threshold(double n_i, double tau0, double tau1) {
    if (!(n_i >= 0.0)) throw ValidationError("tmsv_threshold: n_i must be >= 0");
    return tmsv_threshold_slope(tau0, tau1) * n_i;
}

/// Success probability of the pair transmitter with a lossless idler arm and
/// the per-idler-count threshold rule. For tau1 == 1 the surviving-pair
/// likelihoods live on the diagonal and the exact maximum-likelihood value is
/// evaluated directly (the threshold limit is not the Bayes rule there).
inline double tmsv_success_probability(double mean_photons, double tau0, double tau1) {
    if (!(mean_photons >= 0.0))
        throw ValidationError("tmsv_success_probability: mean_photons must be >= 0");
    if (!(tau0 >= 0.0 && tau1 <= 1.0 && tau0 <= tau1))
        throw ValidationError("tmsv_success_probability: need 0 <= tau0 <= tau1 <= 1");
    if (tau0 == tau1) throw DegenerateChannels("tmsv_success_probability: tau0 == tau1");
    const PhotonDistribution w = PhotonDistribution::thermal(mean_photons);
    if (tau1 == 1.0) {
        // Diagonal-only tau1 likelihood: on ties at (0,0) decide tau0; at
        // n >= 1 the tau1 likelihood w(n) beats w(n) tau0^n.
        double ok0 = 1.0, ok1 = 0.0;
        for (std::int64_t n = 1; n <= w.n_max(); ++n) {
            ok0 -= w.p(n) * std::pow(tau0, double(n));
            ok1 += w.p(n);
        }
        return 0.5 * (ok0 + ok1);
    }
    const double slope = tmsv_threshold_slope(tau0, tau1);
    double s = 0.0;
    for (std::int64_t ni = 0; ni <= w.n_max(); ++ni) {
        const auto k = std::int64_t(std::floor(slope * double(ni)));
        double cdf0 = 0.0, cdf1 = 0.0;
        for (std::int64_t ns = 0; ns <= k && ns <= ni; ++ns) {
            cdf0 += binomial_kernel(ns, ni, tau0);
            cdf1 += binomial_kernel(ns, ni, tau1);
        }
        s += w.p(ni) * (cdf0 + 1.0 - cdf1);
    }
    return 0.5 * s;
}

inline double tmsv_error_probability(double mean_photons, double tau0, double tau1) {
    return 1.0 - tmsv_success_probability(mean_photons, tau0, tau1);
}

/// Expected success probability of the exact Bayes rule with equal priors:
/// (1/2) sum over outcomes of max(P0, P1).
inline double bayes_success_probability(const JointCountPmf& p0, const JointCountPmf& p1) {
    const std::int64_t ns_max = std::max(p0.ns_max(), p1.ns_max());
    const std::int64_t ni_max = std::max(p0.ni_max(), p1.ni_max());
    double s = 0.0;
    for (std::int64_t ns = 0; ns <= ns_max; ++ns)
        for (std::int64_t ni = 0; ni <= ni_max; ++ni) s += std::max(p0.p(ns, ni), p1.p(ns, ni));
    return 0.5 * s;
}

/// Bivariate normal approximation of the detected pair counts under one
/// hypothesis. Valid deep in the many-photon regime; the pair model gives
///   mean  = (eta_s tau N + SL, eta_i N + SL)
///   var   = mean + electronic variance per arm
///   cov   = eta_s tau eta_i N.
struct GaussianPairModel {
    double mean_s = 0.0, mean_i = 0.0;
    double var_s = 1.0, var_i = 1.0;
    double cov = 0.0;

    double log_likelihood(double ns, double ni) const {
        const double det = var_s * var_i - cov * cov;
        if (!(det > 0.0)) throw ModelEvaluationError("GaussianPairModel: covariance not positive definite");
        const double ds = ns - mean_s, di = ni - mean_i;
        const double q = (var_i * ds * ds - 2.0 * cov * ds * di + var_s * di * di) / det;
        return -0.5 * (q + std::log(det)) - std::log(2.0 * 3.14159265358979323846);
    }

    /// Signal-arm marginal, used by the single-beam classical comparison.
    double signal_marginal_log_likelihood(double ns) const {
        const double ds = ns - mean_s;
        return -0.5 * (ds * ds / var_s + std::log(var_s)) - 0.5 * std::log(2.0 * 3.14159265358979323846);
    }
};

constexpr double kGaussianValidityFloor = 1e3;

/// Gaussian count model for the given hypothesis (0 -> tau0, 1 -> tau1).
/// strict = true rejects configurations below the documented validity floor
/// N > 1e3 instead of extrapolating.
inline GaussianPairModel gaussian_likelihood_model(const ChannelPair& pair, int hypothesis,
                                                   bool strict = false) {
    pair.validate();
    if (hypothesis != 0 && hypothesis != 1)
        throw ValidationError("gaussian_likelihood_model: hypothesis must be 0 or 1");
    if (strict && !(pair.mean_signal_photons > kGaussianValidityFloor))
        throw InvalidRegime("gaussian_likelihood_model: N below Gaussian validity floor");
    const double tau = hypothesis == 0 ? pair.tau0 : pair.tau1;
    const double n = pair.mean_signal_photons;
    GaussianPairModel m;
    m.mean_s = pair.eta_s * tau * n + pair.straylight_mean;
    m.mean_i = pair.eta_i * n + pair.straylight_mean;
    m.var_s = pair.eta_s * tau * n + pair.straylight_mean + pair.electronic_variance;
    m.var_i = pair.eta_i * n + pair.straylight_mean + pair.electronic_variance;
    m.cov = pair.eta_s * tau * pair.eta_i * n;
    return m;
}

/// Likelihood of a count pair under one hypothesis: either an exact joint
/// pmf table (counts rounded to the nearest integer) or a Gaussian model.
class JointCountModel {
  public:
    static JointCountModel exact(JointCountPmf pmf) {
        JointCountModel m(std::make_shared<JointCountPmf>(std::move(pmf)));
        // precomputed so evaluation stays const and concurrency-safe
        m.marginal_ = std::make_shared<PhotonDistribution>(
            std::get<std::shared_ptr<JointCountPmf>>(m.model_)->marginal_signal());
        return m;
    }
    static JointCountModel gaussian(GaussianPairModel m) { return JointCountModel(m); }

    double log_likelihood(double ns, double ni) const {
        if (auto* g = std::get_if<GaussianPairModel>(&model_)) return g->log_likelihood(ns, ni);
        const auto& t = *std::get<std::shared_ptr<JointCountPmf>>(model_);
        const double p = t.p(llround_clamped(ns), llround_clamped(ni));
        return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
    }

    double signal_marginal_log_likelihood(double ns) const {
        if (auto* g = std::get_if<GaussianPairModel>(&model_))
            return g->signal_marginal_log_likelihood(ns);
        const double p = marginal_->p(llround_clamped(ns));
        return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
    }

  private:
    explicit JointCountModel(std::shared_ptr<JointCountPmf> t) : model_(std::move(t)) {}
    explicit JointCountModel(GaussianPairModel g) : model_(g) {}

    static std::int64_t llround_clamped(double x) { return std::llround(std::max(0.0, x)); }

    std::variant<std::shared_ptr<JointCountPmf>, GaussianPairModel> model_;
    std::shared_ptr<PhotonDistribution> marginal_;
};

/// Equal-prior Bayes decision between two hypothesis models, compared in log
/// space. Ties decide 0. Throws if neither model assigns the outcome any
/// probability.
inline int bayes_decide(double ns, double ni, const JointCountModel& m0, const JointCountModel& m1) {
    const double l0 = m0.log_likelihood(ns, ni);
    const double l1 = m1.log_likelihood(ns, ni);
    if (std::isinf(l0) && std::isinf(l1) && l0 < 0.0 && l1 < 0.0)
        throw ModelEvaluationError("bayes_decide: outcome has zero likelihood under both hypotheses");
    return l1 > l0 ? 1 : 0;
}

/// Binary Shannon entropy in bits, with 0 log 0 := 0.
inline double binary_entropy(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("binary_entropy: p must be in [0,1]");
    if (p == 0.0 || p == 1.0) return 0.0;
    return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

/// Per-cell information gains of the pair strategy over the classical bound
/// (gain_a) and over the single-beam photon-counting strategy (gain_emp),
/// with the entropies they derive from.
struct GainReport {
    double p_err_quantum = 0.5;
    double p_err_classical_pc = 0.5;
    double c_bound = 0.5;
    double h_quantum = 1.0;
    double h_classical_pc = 1.0;
    double h_bound = 1.0;
    double gain_a = 0.0;
    double gain_emp = 0.0;
    double sigma_gain_a = 0.0;
    double sigma_gain_emp = 0.0;
};

inline GainReport gains(double p_err_quantum, double p_err_classical_pc, double c_bound) {
    GainReport r;
    r.p_err_quantum = p_err_quantum;
    r.p_err_classical_pc = p_err_classical_pc;
    r.c_bound = c_bound;
    r.h_quantum = binary_entropy(p_err_quantum);
    r.h_classical_pc = binary_entropy(p_err_classical_pc);
    r.h_bound = binary_entropy(c_bound);
    r.gain_a = r.h_bound - r.h_quantum;
    r.gain_emp = r.h_classical_pc - r.h_quantum;
    return r;
}

/// Exact Bayes error between two equally likely 1-D normals. The decision
/// regions follow the sign of the log-density difference, a quadratic in x.
inline double normal_bayes_error(double m0, double s0, double m1, double s1) {
    if (!(s0 > 0.0 && s1 > 0.0)) throw ValidationError("normal_bayes_error: stddevs must be > 0");
    const double a = 0.5 / (s1 * s1) - 0.5 / (s0 * s0);
    const double b = m0 / (s0 * s0) - m1 / (s1 * s1);
    const double c = 0.5 * m1 * m1 / (s1 * s1) - 0.5 * m0 * m0 / (s0 * s0) + std::log(s1 / s0);
    const auto cdf0 = [&](double x) { return normal_cdf((x - m0) / s0); };
    const auto cdf1 = [&](double x) { return normal_cdf((x - m1) / s1); };
    if (std::fabs(a) < 1e-300) {
        if (std::fabs(b) < 1e-300) return 0.5;  // identical densities
        const double x = -c / b;
        // g(x) = b x + c >= 0 decides 0.
        if (b > 0.0)
            return 0.5 * (cdf0(x) + 1.0 - cdf1(x));
        return 0.5 * (1.0 - cdf0(x) + cdf1(x));
    }
    const double disc = b * b - 4.0 * a * c;
    if (disc <= 0.0) return 0.5;  // one hypothesis is never chosen
    const double sq = std::sqrt(disc);
    double x1 = (-b - sq) / (2.0 * a);
    double x2 = (-b + sq) / (2.0 * a);
    if (x1 > x2) std::swap(x1, x2);
    if (a > 0.0) {
        // decide 0 outside (x1, x2)
        const double err0 = cdf0(x2) - cdf0(x1);
        const double err1 = 1.0 - (cdf1(x2) - cdf1(x1));
        return 0.5 * (err0 + err1);
    }
    const double err0 = 1.0 - (cdf0(x2) - cdf0(x1));
    const double err1 = cdf1(x2) - cdf1(x1);
    return 0.5 * (err0 + err1);
}

/// Model-predicted error of the Bayes rule between two Gaussian pair models:
/// project onto the Fisher discriminant of the averaged covariance, then take
/// the exact 1-D Bayes error of the projected laws. Exact when the two
/// covariances coincide; an excellent approximation in the regimes used here,
/// where they differ at relative order (tau1 - tau0).
inline double gaussian_pair_bayes_error(const GaussianPairModel& m0, const GaussianPairModel& m1) {
    const double dms = m1.mean_s - m0.mean_s;
    const double dmi = m1.mean_i - m0.mean_i;
    const double vs = 0.5 * (m0.var_s + m1.var_s);
    const double vi = 0.5 * (m0.var_i + m1.var_i);
    const double cv = 0.5 * (m0.cov + m1.cov);
    const double det = vs * vi - cv * cv;
    if (!(det > 0.0)) throw ModelEvaluationError("gaussian_pair_bayes_error: singular covariance");
    if (dms == 0.0 && dmi == 0.0) return 0.5;
    // w = Sigma^{-1} (mu1 - mu0)
    const double ws = (vi * dms - cv * dmi) / det;
    const double wi = (vs * dmi - cv * dms) / det;
    const auto project = [&](const GaussianPairModel& m) {
        const double mean = ws * m.mean_s + wi * m.mean_i;
        const double var =
            ws * ws * m.var_s + 2.0 * ws * wi * m.cov + wi * wi * m.var_i;
        return std::pair<double, double>(mean, std::sqrt(var));
    };
    const auto [mu0, sd0] = project(m0);
    const auto [mu1, sd1] = project(m1);
    return normal_bayes_error(mu0, sd0, mu1, sd1);
}

/// One-dimensional threshold rule error under normal marginals: decide 0 iff
/// x <= threshold.
inline double normal_threshold_error(double threshold, double m0, double s0, double m1, double s1) {
    if (!(s0 > 0.0 && s1 > 0.0)) throw ValidationError("normal_threshold_error: stddevs must be > 0");
    const double err0 = 1.0 - normal_cdf((threshold - m0) / s0);
    const double err1 = normal_cdf((threshold - m1) / s1);
    return 0.5 * (err0 + err1);
}

/// Decision rule over a measured count pair. The four kinds mirror the
/// strategies in use: fixed count threshold on the signal arm, idler-scaled
/// threshold, exact likelihood tables, and Gaussian likelihoods. Table and
/// Gaussian rules can be restricted to the signal marginal for the
/// single-beam classical comparison.
class DecisionRule {
  public:
    enum class Kind { coherent_threshold, tmsv_threshold, likelihood_table, gaussian_likelihood };

    static DecisionRule coherent_thresh(double n_th) {
        DecisionRule r(Kind::coherent_threshold);
        r.n_th_ = n_th;
        return r;
    }
    static DecisionRule tmsv_thresh(double slope) {
        DecisionRule r(Kind::tmsv_threshold);
        r.slope_ = slope;
        return r;
    }
    static DecisionRule likelihood_table(JointCountModel m0, JointCountModel m1,
                                         bool marginal_only = false) {
        DecisionRule r(Kind::likelihood_table);
        r.models_ = std::make_shared<std::pair<JointCountModel, JointCountModel>>(std::move(m0),
                                                                                  std::move(m1));
        r.marginal_only_ = marginal_only;
        return r;
    }
    static DecisionRule gaussian(GaussianPairModel m0, GaussianPairModel m1,
                                 bool marginal_only = false) {
        return likelihood_table(JointCountModel::gaussian(m0), JointCountModel::gaussian(m1),
                                marginal_only)
            .with_kind(Kind::gaussian_likelihood);
    }

    Kind kind() const { return kind_; }

    int decide(double ns, double ni) const {
        switch (kind_) {
            case Kind::coherent_threshold:
                return ns <= n_th_ ? 0 : 1;
            case Kind::tmsv_threshold:
                return ns <= slope_ * ni ? 0 : 1;
            case Kind::likelihood_table:
            case Kind::gaussian_likelihood: {
                const auto& [m0, m1] = *models_;
                if (marginal_only_) {
                    const double l0 = m0.signal_marginal_log_likelihood(ns);
                    const double l1 = m1.signal_marginal_log_likelihood(ns);
                    if (std::isinf(l0) && std::isinf(l1) && l0 < 0.0 && l1 < 0.0)
                        throw ModelEvaluationError("DecisionRule: zero marginal likelihoods");
                    return l1 > l0 ? 1 : 0;
                }
                return bayes_decide(ns, ni, m0, m1);
            }
        }
        throw ModelEvaluationError("DecisionRule: unknown kind");
    }

  private:
    explicit DecisionRule(Kind k) : kind_(k) {}
    DecisionRule with_kind(Kind k) && {
        kind_ = k;
        return std::move(*this);
    }

    Kind kind_;
    double n_th_ = 0.0;
    double slope_ = 0.0;
    bool marginal_only_ = false;
    std::shared_ptr<std::pair<JointCountModel, JointCountModel>> models_;
};

}  // namespace qread
