#pragma once

#include <stdexcept>
#include <string>

namespace qread {

/// Discrimination problem with no defined decision threshold
/// (tau0 == tau1, or tau0 == 0 where a log-ratio is required).
struct DegenerateChannels : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Both hypothesis likelihoods evaluated to zero (no log-space fallback left).
struct ModelEvaluationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A configured cost bound (e.g. exact-pair sampling energy) was exceeded.
struct RuntimeGuard : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Idler arm has non-positive mean counts; gamma is undefined.
struct EmptyIdler : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A correction denominator (straylight-subtracted mean) is non-positive.
struct DivisionDomain : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Frame data lacks truth labels required by the requested estimator.
struct UnlabeledData : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Requested a large-N approximation outside its documented validity range.
struct InvalidRegime : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Bad user-supplied configuration or flag value.
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

}  // namespace qread
