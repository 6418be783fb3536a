#include "pomc/ergodicity.hpp"

#include "pomc/densities.hpp"
#include "pomc/error.hpp"
#include "pomc/odm.hpp"
#include "pomc/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace pomc::ergodicity {

ReturnTimeSample return_times(const ThetaHmm& theta, const SymmetricPareto& noise, std::size_t n_samples,
                              std::int64_t cap, const RngStream& rng, std::size_t first_excursion,
                              std::size_t workers) {
    require(cap >= 10, ErrorKind::InvalidParameter, "return-time cap must be at least 10");
    validate(ParamPoint{theta});
    validate(NoiseSpec{noise});
    const RngStream base = rng.substream(StreamPurpose::Excursion);
    std::vector<std::int64_t> raw(n_samples);
    parallel_for(n_samples, workers, [&](std::size_t i) {
        RngStream stream = base.substream(first_excursion + i);
        double x = 0.0;
        std::int64_t t = 0;
        while (t < cap) {
            ++t;
            x = std::max(0.0, x + sample(NoiseSpec{noise}, stream) - theta.m);
            if (x == 0.0) break;
        }
        raw[i] = x == 0.0 ? t : -1;
    });
    ReturnTimeSample out;
    out.cap = cap;
    for (std::int64_t t : raw) {
        if (t < 0) ++out.censored_count;
        else out.times.push_back(t);
    }
    return out;
}

TailReport tail_diagnostic(const ReturnTimeSample& sample) {
    require(sample.times.size() >= 100, ErrorKind::InsufficientData,
            "tail diagnostic needs at least 100 uncensored return times");
    std::vector<std::int64_t> times = sample.times;
    std::sort(times.begin(), times.end());
    require(times.front() >= 1, ErrorKind::InvalidParameter, "return times must be positive");
    const std::size_t n = times.size();

    TailReport report;
    report.uncensored = n;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && times[j] == times[i]) ++j;
        if (j < n) {
            report.log_survival.push_back(
                {times[i], std::log(static_cast<double>(n - j) / static_cast<double>(n))});
        }
        i = j;
    }

    double total = 0.0;
    for (std::int64_t t : times) total += static_cast<double>(t);
    const double p_hat = static_cast<double>(n) / total;
    report.geometric_fit_slope = p_hat < 1.0 ? std::log1p(-p_hat) : -std::numeric_limits<double>::infinity();

    const std::int64_t split = times[(n - 1) / 2];
    double d1 = 0.0;
    double r1 = 0.0;
    double d2 = 0.0;
    double r2 = 0.0;
    for (std::int64_t t : times) {
        if (t <= split) {
            d1 += 1.0;
            r1 += static_cast<double>(t);
        } else {
            r1 += static_cast<double>(split);
            d2 += 1.0;
            r2 += static_cast<double>(t - split);
        }
    }
    require(d2 >= 1.0, ErrorKind::InsufficientData, "no return times beyond the median; the tail is empty");
    const double h1 = d1 / r1;
    const double h2 = d2 / r2;
    report.split_time = split;
    report.curvature_stat = std::log(h1 / h2);
    report.curvature_se = std::sqrt(std::max(0.0, 1.0 - h1) / d1 + std::max(0.0, 1.0 - h2) / d2);
    report.ci_lo = report.curvature_stat - kTwoSidedZ * report.curvature_se;
    report.ci_hi = report.curvature_stat + kTwoSidedZ * report.curvature_se;
    if (report.curvature_se > 0.0) {
        report.z = report.curvature_stat / report.curvature_se;
    } else {
        // Both hazards are exactly one or zero; no spread to judge against.
        report.z = report.curvature_stat > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    report.rejects_geometric = report.z > kOneSidedZ;
    return report;
}

MeanEstimate moment_estimate(const ThetaHmm& theta, const hmm::NoisePair& noise, double beta, std::size_t n,
                             std::size_t burn, const RngStream& rng) {
    const double alpha = noise.state.alpha;
    require(std::isfinite(beta) && beta >= 1.0 && beta < alpha - 1.0, ErrorKind::InvalidParameter,
            "moment order beta must lie in [1, alpha - 1); the stationary moment may be infinite otherwise");
    require(n >= 30, ErrorKind::InvalidParameter, "moment estimate needs n >= 30 for 30 batches");
    const auto path = hmm::simulate_hmm(theta, noise, 0.0, burn + n, rng);
    std::vector<double> powers(n);
    for (std::size_t k = 0; k < n; ++k) powers[k] = std::pow(path.states.values[burn + k], beta);
    return batch_means(powers, 30);
}

StatePath burnin_sample_stationary(const ModelSpec& model, const ParamPoint& theta, std::size_t n, std::size_t burn,
                                   const RngStream& rng, const std::optional<State>& x0) {
    require(burn >= 1, ErrorKind::InvalidParameter, "burn-in must be at least 1");
    if (!x0) return simulate_stationary(model, theta, n, burn, rng).states;
    require(n >= 1, ErrorKind::InvalidParameter, "path length must be at least 1");
    StatePath out;
    if (model.family == Family::Hmm1) {
        require(x0->size() == 1 && (*x0)[0] >= 0.0, ErrorKind::InvalidParameter, "HMM start must be one value >= 0");
        const auto path = hmm::simulate_hmm(std::get<ThetaHmm>(theta), model.noise, (*x0)[0], burn + n, rng);
        out.dim = 1;
        out.values.assign(path.states.values.begin() + static_cast<std::ptrdiff_t>(burn), path.states.values.end());
        return out;
    }
    const auto path = odm::simulate_odm(model.odm, theta, *x0, burn + n, rng);
    const std::size_t d = path.states.dim;
    out.dim = d;
    out.values.assign(path.states.values.begin() + static_cast<std::ptrdiff_t>(burn * d),
                      path.states.values.begin() + static_cast<std::ptrdiff_t>((burn + n) * d));
    return out;
}

}  // namespace pomc::ergodicity
