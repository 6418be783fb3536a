#pragma once

#include "pomc/hmm.hpp"
#include "pomc/model.hpp"
#include "pomc/params.hpp"
#include "pomc/paths.hpp"
#include "pomc/rng.hpp"
#include "pomc/stats.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace pomc::ergodicity {

/// First return times to the atom {0} of the HMM state chain.
struct ReturnTimeSample {
    std::vector<std::int64_t> times;  ///< uncensored return times, each >= 1
    std::size_t censored_count = 0;   ///< excursions that reached the cap
    std::int64_t cap = 0;

    std::size_t excursions() const noexcept { return times.size() + censored_count; }
    /// True when more than half of the excursions hit the cap.
    bool heavily_censored() const noexcept { return 2 * censored_count > excursions(); }
};

inline constexpr std::int64_t kDefaultCap = 1'000'000;

/// Runs n_samples independent excursions from X_0 = 0, each until X returns to 0
/// or `cap` steps elapse. Excursion i draws from substream first_excursion + i of
/// the excursion stream, so consecutive calls with shifted first_excursion
/// concatenate to a single larger sample.
ReturnTimeSample return_times(const ThetaHmm& theta, const SymmetricPareto& noise, std::size_t n_samples,
                              std::int64_t cap, const RngStream& rng, std::size_t first_excursion = 0,
                              std::size_t workers = 1);

struct SurvivalPoint {
    std::int64_t t;
    double log_survival;  ///< ln P(tau > t), empirical
};

struct TailReport {
    std::vector<SurvivalPoint> log_survival;
    /// Slope of ln P(tau > t) under the geometric fit, ln(1 - p) with p = 1 / mean(tau).
    double geometric_fit_slope = 0.0;
    /// ln(h_early / h_late): log ratio of the discrete hazard before and after the
    /// median return time. Zero for a geometric law, positive when the tail flattens.
    double curvature_stat = 0.0;
    double curvature_se = 0.0;
    double ci_lo = 0.0;  ///< 95% interval, curvature_stat -/+ 1.96 se
    double ci_hi = 0.0;
    double z = 0.0;
    /// One-sided test at level 5%: z > 1.645.
    bool rejects_geometric = false;
    std::int64_t split_time = 0;
    std::size_t uncensored = 0;
};

inline constexpr double kOneSidedZ = 1.6448536269514722;
inline constexpr double kTwoSidedZ = 1.959963984540054;

/// Needs at least 100 uncensored times and at least one time beyond the median.
TailReport tail_diagnostic(const ReturnTimeSample& sample);

/// Ergodic average of X_k^beta over n steps after `burn`, with a 30-batch
/// batch-means standard error. Refuses beta outside [1, alpha - 1).
MeanEstimate moment_estimate(const ThetaHmm& theta, const hmm::NoisePair& noise, double beta, std::size_t n,
                             std::size_t burn, const RngStream& rng);

/// The n states following `burn` steps of a single trajectory started at x0
/// (default: 0 for the HMM, the conditioning state otherwise).
StatePath burnin_sample_stationary(const ModelSpec& model, const ParamPoint& theta, std::size_t n, std::size_t burn,
                                   const RngStream& rng, const std::optional<State>& x0 = std::nullopt);

}  // namespace pomc::ergodicity
