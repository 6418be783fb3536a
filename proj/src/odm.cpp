#include "pomc/odm.hpp"

#include "pomc/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace pomc::odm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool is_count(double y) { return y >= 0.0 && std::floor(y) == y && std::isfinite(y); }

void check_family(const OdmModel& model, const ParamPoint& theta) {
    const bool ok = (model.kind == OdmKind::NbinGarch && std::holds_alternative<ThetaNbin>(theta)) ||
                    (model.kind == OdmKind::NmGarch && std::holds_alternative<ThetaNm>(theta));
    require(ok, ErrorKind::InvalidParameter, "parameter point does not match the observation-driven model kind");
}

}  // namespace

OdmKernel::OdmKernel(const OdmModel& model, const ParamPoint& theta) : model_(model), dim_(1) {
    check_family(model, theta);
    validate(theta);
    if (model.kind == OdmKind::NbinGarch) {
        nbin_ = std::get<ThetaNbin>(theta);
        lgamma_r_ = std::lgamma(nbin_.r);
        return;
    }
    nm_ = std::get<ThetaNm>(theta);
    dim_ = nm_.dim();
    require(model.d == dim_, ErrorKind::DimensionMismatch,
            "NM model has d = " + std::to_string(model.d) + " but theta has d = " + std::to_string(dim_));
    log_gamma_.resize(dim_);
    for (std::size_t l = 0; l < dim_; ++l) {
        log_gamma_[l] = nm_.gamma[l] > 0.0 ? std::log(nm_.gamma[l]) : kNegInf;
    }
}

void OdmKernel::check_state(std::span<const double> x) const {
    require(x.size() == dim_, ErrorKind::DimensionMismatch,
            "state has length " + std::to_string(x.size()) + ", expected " + std::to_string(dim_));
    for (double v : x) {
        require(v > 0.0 && std::isfinite(v), ErrorKind::InvalidState, "state entries must be positive and finite");
    }
}

void OdmKernel::step(std::span<double> x, double y) const noexcept {
    if (model_.kind == OdmKind::NbinGarch) {
        x[0] = nbin_.omega + nbin_.a * x[0] + nbin_.b * y;
        return;
    }
    const std::size_t d = dim_;
    const double y2 = y * y;
    std::array<double, 8> small{};
    std::vector<double> large;
    double* next = small.data();
    if (d > small.size()) {
        large.resize(d);
        next = large.data();
    }
    for (std::size_t i = 0; i < d; ++i) {
        double acc = nm_.omega[i] + y2 * nm_.b[i];
        for (std::size_t j = 0; j < d; ++j) acc += nm_.A[i * d + j] * x[j];
        next[i] = acc;
    }
    std::copy(next, next + d, x.begin());
}

double OdmKernel::nb_success_probability(double x) const noexcept {
    return model_.nb == NbParametrization::Mean ? 1.0 / (1.0 + x) : x / (1.0 + x);
}

double OdmKernel::log_emission(std::span<const double> x, double y) const noexcept {
    if (model_.kind == OdmKind::NbinGarch) {
        if (!is_count(y)) return kNegInf;
        const double log1p_x = std::log1p(x[0]);
        const double log_x = std::log(x[0]);
        double log_p = -log1p_x;
        double log_q = log_x - log1p_x;
        if (model_.nb == NbParametrization::Literal) std::swap(log_p, log_q);
        return std::lgamma(y + nbin_.r) - std::lgamma(y + 1.0) - lgamma_r_ + nbin_.r * log_p + y * log_q;
    }
    double top = kNegInf;
    std::array<double, 8> small{};
    std::vector<double> large;
    double* terms = small.data();
    if (dim_ > small.size()) {
        large.resize(dim_);
        terms = large.data();
    }
    for (std::size_t l = 0; l < dim_; ++l) {
        terms[l] = log_gamma_[l] - 0.5 * y * y / x[l] - 0.5 * std::log(2.0 * std::numbers::pi * x[l]);
        top = std::max(top, terms[l]);
    }
    if (top == kNegInf) return kNegInf;
    double total = 0.0;
    for (std::size_t l = 0; l < dim_; ++l) total += std::exp(terms[l] - top);
    return top + std::log(total);
}

double OdmKernel::sample_observation(std::span<const double> x, RngStream& indicator_rng,
                                     RngStream& noise_rng) const {
    if (model_.kind == OdmKind::NbinGarch) {
        return static_cast<double>(sample(NegativeBinomial{nbin_.r, nb_success_probability(x[0])}, noise_rng));
    }
    GaussianMixture mixture{std::vector<double>(x.begin(), x.end()), nm_.gamma};
    return sample(mixture, indicator_rng, noise_rng);
}

State psi_step(const OdmModel& model, const ParamPoint& theta, const State& x, double y) {
    const OdmKernel kernel(model, theta);
    require(x.size() == kernel.state_dim(), ErrorKind::DimensionMismatch, "state length does not match d");
    State out = x;
    kernel.step(out, y);
    return out;
}

State psi_iterate(const OdmModel& model, const ParamPoint& theta, const State& x, std::span<const double> y_path) {
    const OdmKernel kernel(model, theta);
    require(x.size() == kernel.state_dim(), ErrorKind::DimensionMismatch, "state length does not match d");
    State out = x;
    for (double y : y_path) kernel.step(out, y);
    return out;
}

LogDensity emission_logdensity(const OdmModel& model, const ParamPoint& theta, const State& x, double y) {
    const OdmKernel kernel(model, theta);
    kernel.check_state(x);
    return LogDensity(kernel.log_emission(x, y));
}

OdmPath simulate_odm(const OdmModel& model, const ParamPoint& theta, const State& x0, std::size_t n,
                     const RngStream& rng) {
    require(n >= 1, ErrorKind::InvalidParameter, "simulation length must be at least 1");
    const OdmKernel kernel(model, theta);
    kernel.check_state(x0);
    RngStream indicator_rng = rng.substream(StreamPurpose::Component);
    RngStream noise_rng = rng.substream(StreamPurpose::Observation);

    OdmPath path;
    path.states.dim = kernel.state_dim();
    path.states.values.reserve((n + 1) * kernel.state_dim());
    path.observations.reserve(n);
    State x = x0;
    path.states.push_back(x);
    for (std::size_t k = 0; k < n; ++k) {
        const double y = kernel.sample_observation(x, indicator_rng, noise_rng);
        path.observations.push_back(y);
        kernel.step(x, y);
        path.states.push_back(x);
    }
    return path;
}

std::vector<double> cond_loglik_terms(const OdmModel& model, const ParamPoint& theta, const State& x,
                                      std::span<const double> y_path) {
    const OdmKernel kernel(model, theta);
    kernel.check_state(x);
    std::vector<double> terms;
    terms.reserve(y_path.size());
    State state = x;
    for (double y : y_path) {
        terms.push_back(kernel.log_emission(state, y));
        kernel.step(state, y);
    }
    return terms;
}

double cond_loglik(const OdmModel& model, const ParamPoint& theta, const State& x, std::span<const double> y_path) {
    require(!y_path.empty(), ErrorKind::EmptyPath, "conditional log-likelihood needs at least one observation");
    const OdmKernel kernel(model, theta);
    kernel.check_state(x);
    State state = x;
    double total = 0.0;
    for (double y : y_path) {
        total += kernel.log_emission(state, y);
        kernel.step(state, y);
    }
    return total / static_cast<double>(y_path.size());
}

std::vector<double> forgetting_gap(const OdmModel& model, const ParamPoint& theta, std::span<const double> y_past,
                                   const State& x1, const State& x2) {
    const OdmKernel kernel(model, theta);
    kernel.check_state(x1);
    kernel.check_state(x2);
    // Both recursions are affine in x with the same y-dependent offset, so the
    // difference of the two orbits evolves by the linear part alone. Tracking it
    // directly avoids cancellation once the gap is tiny next to the states.
    const std::size_t d = kernel.state_dim();
    std::vector<double> linear(d * d, 0.0);
    if (model.kind == OdmKind::NbinGarch) {
        linear[0] = std::get<ThetaNbin>(theta).a;
    } else {
        linear = std::get<ThetaNm>(theta).A;
    }
    State delta(d);
    for (std::size_t i = 0; i < d; ++i) delta[i] = x1[i] - x2[i];
    State next(d);
    std::vector<double> gaps;
    gaps.reserve(y_past.size());
    for (std::size_t k = 0; k < y_past.size(); ++k) {
        double sq = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            double v = 0.0;
            for (std::size_t j = 0; j < d; ++j) v += linear[i * d + j] * delta[j];
            next[i] = v;
            sq += v * v;
        }
        delta.swap(next);
        gaps.push_back(std::sqrt(sq));
    }
    return gaps;
}

Stability stability_check(const OdmModel& model, const ParamPoint& theta) {
    const OdmKernel kernel(model, theta);
    if (model.kind == OdmKind::NbinGarch) {
        const auto& t = std::get<ThetaNbin>(theta);
        const double margin = 1.0 - (t.r * t.b + t.a);
        return {margin > 0.0, margin};
    }
    const auto& t = std::get<ThetaNm>(theta);
    const std::size_t d = t.dim();
    std::vector<double> companion(t.A);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) companion[i * d + j] += t.b[i] * t.gamma[j];
    const double margin = 1.0 - spectral_radius(companion, d);
    return {margin > 0.0, margin};
}

namespace {

// Returns NaN when the iteration did not settle within max_iterations.
double power_iteration(std::span<const double> m, std::size_t d, double shift, double tolerance,
                       std::size_t max_iterations) {
    std::vector<double> v(d, 1.0 / static_cast<double>(d));
    std::vector<double> w(d);
    double previous = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t it = 0; it < max_iterations; ++it) {
        double norm = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            double acc = shift * v[i];
            for (std::size_t j = 0; j < d; ++j) acc += m[i * d + j] * v[j];
            w[i] = acc;
            norm += acc;
        }
        if (norm == 0.0) return 0.0;  // v was annihilated: M is nilpotent on the orbit
        // v has unit 1-norm and both v and M are nonnegative, so norm = ||Mv||_1 / ||v||_1.
        const double estimate = norm;
        for (std::size_t i = 0; i < d; ++i) v[i] = w[i] / norm;
        if (std::abs(estimate - previous) <= tolerance * std::max(1.0, estimate)) return estimate;
        previous = estimate;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

double spectral_radius(std::span<const double> matrix, std::size_t d, SpectralOptions options) {
    require(d >= 1 && matrix.size() == d * d, ErrorKind::DimensionMismatch, "spectral_radius needs a square matrix");
    for (double v : matrix) {
        require(v >= 0.0 && std::isfinite(v), ErrorKind::InvalidParameter,
                "spectral_radius expects a finite nonnegative matrix");
    }
    const std::size_t half = std::max<std::size_t>(1, options.max_iterations / 2);
    const double plain = power_iteration(matrix, d, 0.0, options.tolerance, half);
    if (!std::isnan(plain)) return plain;
    const double shifted = power_iteration(matrix, d, 1.0, options.tolerance, half);
    if (!std::isnan(shifted)) return std::max(0.0, shifted - 1.0);
    fail(ErrorKind::NonConvergence,
         "power iteration did not converge within " + std::to_string(options.max_iterations) + " iterations");
}

}  // namespace pomc::odm
