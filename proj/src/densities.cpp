#include "pomc/densities.hpp"

#include "pomc/error.hpp"

#include <algorithm>
#include <numbers>
#include <random>
#include <string>

namespace pomc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_pareto(double alpha, double scale) {
    require(alpha > 2.0, ErrorKind::InvalidParameter,
            "symmetric Pareto requires alpha > 2, got " + std::to_string(alpha));
    require(scale > 0.0, ErrorKind::InvalidParameter,
            "symmetric Pareto requires scale > 0, got " + std::to_string(scale));
}

void check_sigma(double sigma) {
    require(sigma > 0.0, ErrorKind::InvalidParameter,
            "Gaussian requires sigma > 0, got " + std::to_string(sigma));
}

void check_nb(double r, double p) {
    require(r > 0.0, ErrorKind::InvalidParameter, "negative binomial requires r > 0");
    require(p > 0.0 && p < 1.0, ErrorKind::InvalidParameter, "negative binomial requires 0 < p < 1");
}

void check_mixture(std::span<const double> x, std::span<const double> gamma) {
    require(x.size() == gamma.size() && !x.empty(), ErrorKind::DimensionMismatch,
            "mixture variances and weights must have the same nonzero length");
    double total = 0.0;
    for (std::size_t l = 0; l < x.size(); ++l) {
        require(x[l] > 0.0, ErrorKind::InvalidParameter, "mixture variances must be positive");
        require(gamma[l] >= 0.0, ErrorKind::InvalidParameter, "mixture weights must be nonnegative");
        total += gamma[l];
    }
    require(std::abs(total - 1.0) <= kSimplexTolerance, ErrorKind::InvalidParameter,
            "mixture weights must sum to 1");
}

}  // namespace

LogDensity::LogDensity(double value) : value_(value) {
    require(!std::isnan(value), ErrorKind::NumericFailure, "log density evaluated to NaN");
}

void validate(const NoiseSpec& noise) {
    std::visit(
        [](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, SymmetricPareto>) {
                check_pareto(n.alpha, n.scale);
            } else {
                check_sigma(n.sigma);
            }
        },
        noise);
}

LogDensity pareto_sym_logpdf(double u, double alpha, double scale) {
    check_pareto(alpha, scale);
    return LogDensity(std::log(alpha / (2.0 * scale)) - (alpha + 1.0) * std::log1p(std::abs(u) / scale));
}

double pareto_sym_cdf(double u, double alpha, double scale) {
    check_pareto(alpha, scale);
    const double tail = 0.5 * std::exp(-alpha * std::log1p(std::abs(u) / scale));
    return u >= 0.0 ? 1.0 - tail : tail;
}

LogDensity gauss_logpdf(double v, double sigma) {
    check_sigma(sigma);
    const double z = v / sigma;
    return LogDensity(-0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi));
}

LogDensity nb_logpmf(std::int64_t k, double r, double p) {
    check_nb(r, p);
    if (k < 0) {
        return LogDensity::zero();
    }
    const auto kd = static_cast<double>(k);
    return LogDensity(std::lgamma(kd + r) - std::lgamma(kd + 1.0) - std::lgamma(r) + r * std::log(p) +
                      kd * std::log1p(-p));
}

LogDensity mixture_gauss_logpdf(double y, std::span<const double> x, std::span<const double> gamma) {
    check_mixture(x, gamma);
    std::vector<double> terms(x.size());
    for (std::size_t l = 0; l < x.size(); ++l) {
        terms[l] = gamma[l] > 0.0
                       ? std::log(gamma[l]) - 0.5 * y * y / x[l] - 0.5 * std::log(2.0 * std::numbers::pi * x[l])
                       : kNegInf;
    }
    return LogDensity(log_sum_exp(terms));
}

LogDensity logpdf(const NoiseSpec& noise, double u) {
    return std::visit(
        [u](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, SymmetricPareto>) {
                return pareto_sym_logpdf(u, n.alpha, n.scale);
            } else {
                return gauss_logpdf(u, n.sigma);
            }
        },
        noise);
}

double sample(const NoiseSpec& noise, RngStream& rng) {
    return std::visit(
        [&rng](const auto& n) -> double {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, SymmetricPareto>) {
                check_pareto(n.alpha, n.scale);
                // Inverse CDF; each half has tail 0.5 * (1 + |u|/s)^-alpha.
                const double v = rng.uniform();
                const double tail = v < 0.5 ? 2.0 * v : 2.0 * (1.0 - v);
                const double magnitude = n.scale * std::expm1(-std::log(tail) / n.alpha);
                return v < 0.5 ? -magnitude : magnitude;
            } else {
                check_sigma(n.sigma);
                std::normal_distribution<double> dist(0.0, n.sigma);
                return dist(rng);
            }
        },
        noise);
}

std::int64_t sample(const NegativeBinomial& nb, RngStream& rng) {
    check_nb(nb.r, nb.p);
    // Gamma-Poisson mixture: lambda ~ Gamma(r, (1-p)/p), K | lambda ~ Poisson(lambda).
    std::gamma_distribution<double> gamma(nb.r, (1.0 - nb.p) / nb.p);
    const double lambda = gamma(rng);
    if (lambda <= 0.0) {
        return 0;
    }
    std::poisson_distribution<std::int64_t> poisson(lambda);
    return poisson(rng);
}

double sample(const GaussianMixture& mixture, RngStream& indicator_rng, RngStream& gauss_rng) {
    check_mixture(mixture.variances, mixture.weights);
    const double v = indicator_rng.uniform();
    std::size_t component = mixture.weights.size() - 1;
    double cumulative = 0.0;
    for (std::size_t l = 0; l < mixture.weights.size(); ++l) {
        cumulative += mixture.weights[l];
        if (v < cumulative) {
            component = l;
            break;
        }
    }
    while (mixture.weights[component] == 0.0 && component > 0) {
        --component;
    }
    std::normal_distribution<double> dist(0.0, std::sqrt(mixture.variances[component]));
    return dist(gauss_rng);
}

double sample(const GaussianMixture& mixture, RngStream& rng) { return sample(mixture, rng, rng); }

double log_sum_exp(std::span<const double> values) {
    if (values.empty()) {
        return kNegInf;
    }
    const double top = *std::max_element(values.begin(), values.end());
    if (top == kNegInf) {
        return kNegInf;
    }
    double total = 0.0;
    for (double v : values) {
        total += std::exp(v - top);
    }
    return top + std::log(total);
}

}  // namespace pomc
