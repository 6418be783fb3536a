#pragma once

#include "pomc/densities.hpp"
#include "pomc/params.hpp"
#include "pomc/paths.hpp"
#include "pomc/rng.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace pomc::odm {

enum class OdmKind { NbinGarch, NmGarch };

/// How NBIN maps the state X to the negative binomial success probability p
/// in the pmf Gamma(k+r)/(k! Gamma(r)) p^r (1-p)^k.
///
/// Mean: p = 1/(1+X), so E[Y | X] = rX, which is the regime in which rb + a < 1
/// is the stationarity condition. Literal: p = X/(1+X), E[Y | X] = r/X.
enum class NbParametrization { Mean, Literal };

struct OdmModel {
    OdmKind kind = OdmKind::NbinGarch;
    std::size_t d = 1;
    NbParametrization nb = NbParametrization::Mean;
};

inline OdmModel nbin_model(NbParametrization nb = NbParametrization::Mean) {
    return {OdmKind::NbinGarch, 1, nb};
}
inline OdmModel nm_model(std::size_t d) { return {OdmKind::NmGarch, d, NbParametrization::Mean}; }

/// A model bound to one validated parameter point. The evaluation routines
/// below construct one of these per call; hot loops should hold on to it.
class OdmKernel {
public:
    OdmKernel(const OdmModel& model, const ParamPoint& theta);

    std::size_t state_dim() const noexcept { return dim_; }
    const OdmModel& model() const noexcept { return model_; }

    /// Throws invalid-state (or dimension-mismatch) when x is outside the state space.
    void check_state(std::span<const double> x) const;

    /// x <- psi_y(x), in place.
    void step(std::span<double> x, double y) const noexcept;

    /// log g(x; y). -inf when y is outside the observation space.
    double log_emission(std::span<const double> x, double y) const noexcept;

    double sample_observation(std::span<const double> x, RngStream& indicator_rng, RngStream& noise_rng) const;

    /// Success probability of the NB emission at state x (NBIN only).
    double nb_success_probability(double x) const noexcept;

private:
    OdmModel model_;
    std::size_t dim_;
    ThetaNbin nbin_{};
    ThetaNm nm_{};
    double lgamma_r_ = 0.0;
    std::vector<double> log_gamma_;
};

State psi_step(const OdmModel& model, const ParamPoint& theta, const State& x, double y);

/// f_{y_1:p}(x) = psi_{y_p} o ... o psi_{y_1}(x); x itself for an empty path.
State psi_iterate(const OdmModel& model, const ParamPoint& theta, const State& x, std::span<const double> y_path);

LogDensity emission_logdensity(const OdmModel& model, const ParamPoint& theta, const State& x, double y);

struct OdmPath {
    StatePath states;              // X_1 .. X_{n+1}
    ObservationPath observations;  // Y_1 .. Y_n
};

/// X_1 = x0, Y_k ~ G(X_k; .), X_{k+1} = psi_{Y_k}(X_k).
OdmPath simulate_odm(const OdmModel& model, const ParamPoint& theta, const State& x0, std::size_t n,
                     const RngStream& rng);

/// Per-step terms ln g(f_{y_1:k-1}(x); y_k), k = 1..n.
std::vector<double> cond_loglik_terms(const OdmModel& model, const ParamPoint& theta, const State& x,
                                      std::span<const double> y_path);

/// n^-1 sum_k ln g(f_{y_1:k-1}(x); y_k).
double cond_loglik(const OdmModel& model, const ParamPoint& theta, const State& x, std::span<const double> y_path);

/// Euclidean distance between f_{y_1:k}(x1) and f_{y_1:k}(x2) for k = 1..m.
/// Observations must be valid for the model; only their count matters, since
/// the y terms cancel between the two orbits.
std::vector<double> forgetting_gap(const OdmModel& model, const ParamPoint& theta, std::span<const double> y_past,
                                   const State& x1, const State& x2);

struct Stability {
    bool stable;
    double margin;
};

/// NBIN: 1 - (rb + a). NM: 1 - rho(A + b gamma^T).
Stability stability_check(const OdmModel& model, const ParamPoint& theta);

struct SpectralOptions {
    double tolerance = 1e-10;
    std::size_t max_iterations = 200000;
};

/// Perron root of a nonnegative d x d row-major matrix by power iteration,
/// retrying on M + I when the plain iteration oscillates (periodic or
/// reducible matrices). Throws non-convergence after max_iterations.
double spectral_radius(std::span<const double> matrix, std::size_t d, SpectralOptions options = {});

}  // namespace pomc::odm
