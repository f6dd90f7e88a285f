#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qread/calibrate.hpp"
#include "qread/discriminate.hpp"
#include "qread/errors.hpp"
#include "qread/montecarlo.hpp"

namespace qread {

enum class RuleKind { coherent_threshold, tmsv_threshold, likelihood_table, gaussian_likelihood };

/// Default receiver model: exact pair-model likelihood tables where they are
/// cheap and exact (small N, no continuous noise), the Gaussian count model
/// in the many-photon regime.
inline RuleKind default_rule_kind(const ChannelPair& pair) {
    const bool exact_feasible = pair.mean_signal_photons <= kGaussianValidityFloor &&
                                pair.electronic_variance == 0.0 && pair.straylight_mean == 0.0;
    return exact_feasible ? RuleKind::likelihood_table : RuleKind::gaussian_likelihood;
}

/// Full experiment description: discrimination instance, transmitter,
/// acquisition size, decision rule and error-bar procedure. An unset
/// decision_rule resolves via default_rule_kind.
struct ExperimentConfig {
    ChannelPair pair;
    Transmitter transmitter = Transmitter::tmsv;
    std::int64_t frames_per_set = 10000;
    std::optional<RuleKind> decision_rule;
    int subsets_for_errorbars = 10;
    std::uint64_t seed = 0;
    Sampling sampling = Sampling::exact_pair;
    int threads = 1;

    RuleKind resolved_rule() const { return decision_rule.value_or(default_rule_kind(pair)); }

    void validate() const {
        pair.validate();
        if (frames_per_set < 1) throw ValidationError("ExperimentConfig: frames_per_set must be >= 1");
        if (subsets_for_errorbars < 1)
            throw ValidationError("ExperimentConfig: subsets_for_errorbars must be >= 1");
        if (frames_per_set % subsets_for_errorbars != 0)
            throw ValidationError(
                "ExperimentConfig: subsets_for_errorbars must divide frames_per_set");
        if (threads < 1) throw ValidationError("ExperimentConfig: threads must be >= 1");
    }

    SimConfig sim_config() const {
        SimConfig s;
        s.transmitter = transmitter;
        s.pair = pair;
        s.frames_per_set = frames_per_set;
        s.rng_seed = seed;
        s.sampling = sampling;
        s.threads = threads;
        return s;
    }
};

struct ErrorEstimate {
    double p_err = 0.5;
    double stddev = 0.0;
};

/// Frame-counting error probability of a rule over two labeled sets, both
/// hypotheses weighted equally. The 1-sigma bar is the standard deviation of
/// the estimate across contiguous subset pairs.
inline ErrorEstimate empirical_error_probability(const FrameSet& set0, const FrameSet& set1,
                                                 const DecisionRule& rule, int subsets = 10) {
    if (set0.frames.empty() || set1.frames.empty())
        throw ValidationError("empirical_error_probability: empty frame set");
    for (const auto* set : {&set0, &set1})
        for (const auto& f : set->frames)
            if (!f.truth) throw UnlabeledData("empirical_error_probability: frame without truth");
    const auto err_fraction = [&](const FrameSet& s, std::size_t lo, std::size_t hi) {
        std::int64_t wrong = 0;
        for (std::size_t i = lo; i < hi; ++i)
            wrong += rule.decide(s.frames[i].n_s, s.frames[i].n_i) != *s.frames[i].truth;
        return double(wrong) / double(hi - lo);
    };
    ErrorEstimate e;
    e.p_err = 0.5 * (err_fraction(set0, 0, set0.frames.size()) +
                     err_fraction(set1, 0, set1.frames.size()));
    if (subsets >= 2 && set0.frames.size() >= std::size_t(subsets) &&
        set1.frames.size() >= std::size_t(subsets)) {
        std::vector<double> vals;
        for (int k = 0; k < subsets; ++k) {
            const auto slice = [&](const FrameSet& s) {
                const std::size_t chunk = s.frames.size() / std::size_t(subsets);
                const std::size_t lo = std::size_t(k) * chunk;
                const std::size_t hi = (k == subsets - 1) ? s.frames.size() : lo + chunk;
                return err_fraction(s, lo, hi);
            };
            vals.push_back(0.5 * (slice(set0) + slice(set1)));
        }
        e.stddev = std::sqrt(detail::sample_variance(vals));
    }
    return e;
}

namespace detail {

// Quantum-side rule for the configured kind. The degenerate tau0 == tau1
// case is served by identical Gaussian models, whose ties always decide 0.
// Exact tables follow the pair model the frame generator samples.
inline DecisionRule quantum_rule(const ExperimentConfig& cfg) {
    const ChannelPair& p = cfg.pair;
    switch (cfg.resolved_rule()) {
        case RuleKind::gaussian_likelihood:
            return DecisionRule::gaussian(gaussian_likelihood_model(p, 0),
                                          gaussian_likelihood_model(p, 1));
        case RuleKind::tmsv_threshold:
            return DecisionRule::tmsv_thresh(tmsv_threshold_slope(p.eta_s * p.tau0, p.eta_s * p.tau1));
        case RuleKind::likelihood_table:
            return DecisionRule::likelihood_table(
                JointCountModel::exact(pair_joint_after_channels(p.mean_signal_photons,
                                                                 p.eta_s * p.tau0, p.eta_i)),
                JointCountModel::exact(pair_joint_after_channels(p.mean_signal_photons,
                                                                 p.eta_s * p.tau1, p.eta_i)));
        case RuleKind::coherent_threshold:
            return DecisionRule::coherent_thresh(
                coherent_threshold(p.mean_signal_photons, p.eta_s * p.tau0, p.eta_s * p.tau1));
    }
    throw ValidationError("quantum_rule: unknown rule kind");
}

// Single-beam classical comparison: the fixed count threshold on the signal
// marginal at the effective transmittances. tau0 == tau1 has no threshold;
// its limit is a rule that always answers 0 (error probability 1/2).
inline DecisionRule classical_rule(const ExperimentConfig& cfg) {
    const ChannelPair& p = cfg.pair;
    if (p.tau0 == p.tau1)
        return DecisionRule::coherent_thresh(std::numeric_limits<double>::infinity());
    return DecisionRule::coherent_thresh(
        coherent_threshold(p.mean_signal_photons, p.eta_s * p.tau0, p.eta_s * p.tau1));
}

}  // namespace detail

/// Model-predicted error probabilities for the two strategies at the
/// configured parameters. Uses the Gaussian count model in the many-photon
/// regime (or whenever electronic noise makes exact pmfs unavailable) and
/// exact pmf evaluation below it.
struct TheoryPrediction {
    double p_err_quantum = 0.5;
    double p_err_classical_pc = 0.5;
};

inline TheoryPrediction predict_errors(const ChannelPair& pair) {
    pair.validate();
    TheoryPrediction t;
    if (pair.tau0 == pair.tau1) return t;
    // Exact pair-model pmfs below the Gaussian validity floor (noise-free
    // configurations only; electronic noise has no discrete pmf), Gaussian
    // count model above it.
    const bool gaussian_regime = pair.mean_signal_photons > kGaussianValidityFloor ||
                                 pair.electronic_variance > 0.0 || pair.straylight_mean > 0.0;
    if (gaussian_regime) {
        const GaussianPairModel m0 = gaussian_likelihood_model(pair, 0);
        const GaussianPairModel m1 = gaussian_likelihood_model(pair, 1);
        t.p_err_quantum = gaussian_pair_bayes_error(m0, m1);
        const double n_th =
            pair.tau0 > 0.0
                ? coherent_threshold(pair.mean_signal_photons, pair.eta_s * pair.tau0,
                                     pair.eta_s * pair.tau1)
                : 0.0;
        t.p_err_classical_pc = normal_threshold_error(n_th, m0.mean_s, std::sqrt(m0.var_s),
                                                      m1.mean_s, std::sqrt(m1.var_s));
        return t;
    }
    const JointCountPmf p0 =
        pair_joint_after_channels(pair.mean_signal_photons, pair.eta_s * pair.tau0, pair.eta_i);
    const JointCountPmf p1 =
        pair_joint_after_channels(pair.mean_signal_photons, pair.eta_s * pair.tau1, pair.eta_i);
    t.p_err_quantum = 1.0 - bayes_success_probability(p0, p1);
    t.p_err_classical_pc = pair.tau0 > 0.0
                               ? coherent_error_probability(pair.mean_signal_photons,
                                                            pair.eta_s * pair.tau0,
                                                            pair.eta_s * pair.tau1)
                               : 0.5;
    return t;
}

/// Simulate both truth sets, decide pair frames with the configured joint
/// rule and the classical comparison on the signal marginal of the same
/// frames, and assemble the gain report against the classical bound at the
/// effective transmittances.
inline GainReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const SimConfig sim = cfg.sim_config();
    const FrameSet set0 = simulate_set(sim, 0);
    const FrameSet set1 = simulate_set(sim, 1);

    const DecisionRule qrule = cfg.pair.tau0 == cfg.pair.tau1
                                   ? DecisionRule::gaussian(gaussian_likelihood_model(cfg.pair, 0),
                                                            gaussian_likelihood_model(cfg.pair, 1))
                                   : detail::quantum_rule(cfg);
    const DecisionRule crule = detail::classical_rule(cfg);

    const ErrorEstimate pq = empirical_error_probability(set0, set1, qrule, cfg.subsets_for_errorbars);
    const ErrorEstimate pc = empirical_error_probability(set0, set1, crule, cfg.subsets_for_errorbars);

    const auto [t0_eff, t1_eff] = substitute_efficiency(cfg.pair);
    const double c = classical_bound(cfg.pair.mean_signal_photons, t0_eff, t1_eff);

    GainReport r = gains(pq.p_err, pc.p_err, c);

    // Per-subset gains; the reported sigma is their standard deviation while
    // the point estimate stays on the full set.
    const int k = cfg.subsets_for_errorbars;
    if (k >= 2) {
        std::vector<double> ga, ge;
        const std::size_t chunk0 = set0.frames.size() / std::size_t(k);
        const std::size_t chunk1 = set1.frames.size() / std::size_t(k);
        for (int s = 0; s < k; ++s) {
            FrameSet sub0, sub1;
            sub0.frames.assign(set0.frames.begin() + s * chunk0,
                               set0.frames.begin() + (s + 1) * chunk0);
            sub1.frames.assign(set1.frames.begin() + s * chunk1,
                               set1.frames.begin() + (s + 1) * chunk1);
            const double pqs = empirical_error_probability(sub0, sub1, qrule, 1).p_err;
            const double pcs = empirical_error_probability(sub0, sub1, crule, 1).p_err;
            ga.push_back(binary_entropy(c) - binary_entropy(pqs));
            ge.push_back(binary_entropy(pcs) - binary_entropy(pqs));
        }
        r.sigma_gain_a = std::sqrt(detail::sample_variance(ga));
        r.sigma_gain_emp = std::sqrt(detail::sample_variance(ge));
    }
    return r;
}

/// One sweep cell: empirical gain report plus the model-predicted error
/// probabilities for the same parameters.
struct SweepRow {
    double tau0 = 0.0;
    double n_photons = 0.0;
    GainReport report;
    double p_err_quantum_theory = 0.5;
    double p_err_classical_pc_theory = 0.5;
};

/// Gain reports over a (tau0, N) grid with per-cell theory predictions.
inline std::vector<SweepRow> sweep(const ExperimentConfig& base, const std::vector<double>& tau0_grid,
                                   const std::vector<double>& n_list) {
    if (tau0_grid.empty() || n_list.empty()) throw ValidationError("sweep: grids must be non-empty");
    std::vector<SweepRow> rows;
    for (double n : n_list) {
        for (double tau0 : tau0_grid) {
            ExperimentConfig cfg = base;
            cfg.pair.tau0 = tau0;
            cfg.pair.mean_signal_photons = n;
            // decorrelate cells while keeping the whole sweep reproducible
            cfg.seed = base.seed ^ (std::bit_cast<std::uint64_t>(tau0) * 0x9E3779B97F4A7C15ull) ^
                       std::bit_cast<std::uint64_t>(n);
            SweepRow row;
            row.tau0 = tau0;
            row.n_photons = n;
            row.report = run_experiment(cfg);
            const TheoryPrediction t = predict_errors(cfg.pair);
            row.p_err_quantum_theory = t.p_err_quantum;
            row.p_err_classical_pc_theory = t.p_err_classical_pc;
            rows.push_back(row);
        }
    }
    return rows;
}

/// Canonical gain table CSV: one row per sweep cell.
inline void write_gain_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "tau0,N,p_err_q,p_err_cla_pc,c_bound,g_a,g_a_sigma,g_emp,g_emp_sigma\n";
    char buf[512];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      r.tau0, r.n_photons, r.report.p_err_quantum, r.report.p_err_classical_pc,
                      r.report.c_bound, r.report.gain_a, r.report.sigma_gain_a, r.report.gain_emp,
                      r.report.sigma_gain_emp);
        os << buf;
    }
}

/// Model-prediction table emitted alongside the empirical gain table.
inline void write_theory_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "tau0,N,p_err_q_theory,p_err_cla_pc_theory,c_bound\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", r.tau0, r.n_photons,
                      r.p_err_quantum_theory, r.p_err_classical_pc_theory, r.report.c_bound);
        os << buf;
    }
}

/// JSON mirror of the gain table with all report fields.
inline void write_gain_json(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "[\n";
    char buf[1024];
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        std::snprintf(
            buf, sizeof buf,
            "  {\"tau0\": %.17g, \"N\": %.17g, \"p_err_q\": %.17g, \"p_err_cla_pc\": %.17g, "
            "\"c_bound\": %.17g, \"h_q\": %.17g, \"h_cla_pc\": %.17g, \"h_bound\": %.17g, "
            "\"g_a\": %.17g, \"g_a_sigma\": %.17g, \"g_emp\": %.17g, \"g_emp_sigma\": %.17g, "
            "\"p_err_q_theory\": %.17g, \"p_err_cla_pc_theory\": %.17g}%s\n",
            r.tau0, r.n_photons, r.report.p_err_quantum, r.report.p_err_classical_pc,
            r.report.c_bound, r.report.h_quantum, r.report.h_classical_pc, r.report.h_bound,
            r.report.gain_a, r.report.sigma_gain_a, r.report.gain_emp, r.report.sigma_gain_emp,
            r.p_err_quantum_theory, r.p_err_classical_pc_theory,
            i + 1 < rows.size() ? "," : "");
        os << buf;
    }
    os << "]\n";
}

/// A stored bit pattern to read back through the simulated channel.
struct MemoryImage {
    std::vector<int> bits;

    void validate() const {
        if (bits.empty()) throw ValidationError("MemoryImage: empty");
        for (int b : bits)
            if (b != 0 && b != 1) throw ValidationError("MemoryImage: bits must be 0 or 1");
    }
};

struct ReadResult {
    std::vector<int> decoded;
    double ber = 0.0;
    double ber_ci_low = 0.0;   // 95% Wilson interval
    double ber_ci_high = 0.0;
    double info_per_cell = 0.0;  // 1 - H(ber)
};

/// Read every cell of the image with one simulated frame each and report the
/// bit error rate with a binomial confidence interval.
inline ReadResult read_memory(const MemoryImage& image, const ExperimentConfig& cfg) {
    image.validate();
    cfg.validate();
    const SimConfig sim = cfg.sim_config();
    const DecisionRule rule = cfg.pair.tau0 == cfg.pair.tau1
                                  ? DecisionRule::gaussian(gaussian_likelihood_model(cfg.pair, 0),
                                                           gaussian_likelihood_model(cfg.pair, 1))
                                  : detail::quantum_rule(cfg);
    ReadResult r;
    r.decoded.reserve(image.bits.size());
    std::int64_t wrong = 0;
    for (std::size_t i = 0; i < image.bits.size(); ++i) {
        const FrameRecord f = simulate_frame(sim, image.bits[i], std::int64_t(i));
        const int d = rule.decide(f.n_s, f.n_i);
        r.decoded.push_back(d);
        wrong += d != image.bits[i];
    }
    const double n = double(image.bits.size());
    r.ber = double(wrong) / n;
    // Wilson score interval at 95%
    const double z = 1.959963984540054;
    const double z2 = z * z;
    const double center = (r.ber + z2 / (2 * n)) / (1 + z2 / n);
    const double half = z * std::sqrt(r.ber * (1 - r.ber) / n + z2 / (4 * n * n)) / (1 + z2 / n);
    r.ber_ci_low = std::max(0.0, center - half);
    r.ber_ci_high = std::min(1.0, center + half);
    r.info_per_cell = 1.0 - binary_entropy(r.ber);
    return r;
}

}  // namespace qread
