#pragma once

#include "pomc/rng.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <variant>
#include <vector>

namespace pomc {

/// A density value on the log scale. -inf encodes an exact zero; NaN is
/// rejected at construction.
class LogDensity {
public:
    explicit LogDensity(double value);

    static LogDensity zero() { return LogDensity(-std::numeric_limits<double>::infinity()); }

    double value() const noexcept { return value_; }
    double density() const noexcept { return std::exp(value_); }
    bool is_zero() const noexcept { return value_ == -std::numeric_limits<double>::infinity(); }

    friend bool operator==(LogDensity, LogDensity) = default;

private:
    double value_;
};

/// Symmetric Pareto density r(u) = alpha/(2s) * (1 + |u|/s)^-(alpha+1).
struct SymmetricPareto {
    double alpha = 3.5;
    double scale = 1.0;
};

/// Centered Gaussian N(0, sigma^2).
struct Gaussian {
    double sigma = 1.0;
};

using NoiseSpec = std::variant<SymmetricPareto, Gaussian>;

/// pmf Gamma(k+r)/(k! Gamma(r)) p^r (1-p)^k on k = 0, 1, ...
struct NegativeBinomial {
    double r;
    double p;
};

/// Mixture sum_l gamma_l N(0, x_l).
struct GaussianMixture {
    std::vector<double> variances;
    std::vector<double> weights;
};

void validate(const NoiseSpec& noise);

LogDensity pareto_sym_logpdf(double u, double alpha, double scale);
double pareto_sym_cdf(double u, double alpha, double scale);
LogDensity gauss_logpdf(double v, double sigma);
LogDensity nb_logpmf(std::int64_t k, double r, double p);
LogDensity mixture_gauss_logpdf(double y, std::span<const double> x, std::span<const double> gamma);

LogDensity logpdf(const NoiseSpec& noise, double u);

double sample(const NoiseSpec& noise, RngStream& rng);
std::int64_t sample(const NegativeBinomial& nb, RngStream& rng);
/// Draws the component indicator from `indicator_rng` and the Gaussian from
/// `gauss_rng`.
double sample(const GaussianMixture& mixture, RngStream& indicator_rng, RngStream& gauss_rng);
double sample(const GaussianMixture& mixture, RngStream& rng);

/// log(sum exp(v)); -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> values);

/// Tolerance on |sum(gamma) - 1| for simplex vectors.
inline constexpr double kSimplexTolerance = 1e-12;

}  // namespace pomc
