#pragma once

#include "pomc/hmm.hpp"
#include "pomc/odm.hpp"
#include "pomc/params.hpp"
#include "pomc/paths.hpp"
#include "pomc/rng.hpp"

#include <span>

namespace pomc {

/// Everything about a model except the unknown parameter: the family, known
/// hyperparameters, and how the likelihood is evaluated.
struct ModelSpec {
    Family family = Family::Nbin;
    odm::OdmModel odm{};
    hmm::NoisePair noise{};
    hmm::GridSpec grid{};
    hmm::InitialLaw xi = hmm::InitialLaw::dirac(0.0);
    /// Conditioning state x of the observation-driven likelihood; empty means all ones.
    State x_init{};

    std::size_t dim() const noexcept { return family == Family::Nm ? odm.d : 1; }
    State conditioning_state() const { return x_init.empty() ? State(dim(), 1.0) : x_init; }
};

ModelSpec hmm_spec(const hmm::NoisePair& noise = {}, const hmm::GridSpec& grid = {},
                   const hmm::InitialLaw& xi = hmm::InitialLaw::dirac(0.0));
ModelSpec nbin_spec(odm::NbParametrization nb = odm::NbParametrization::Mean);
ModelSpec nm_spec(std::size_t d);

/// Normalized log-likelihood: the grid P-block likelihood for the HMM, the
/// conditional likelihood given X_1 = x for observation-driven models.
double log_likelihood(const ModelSpec& model, const ParamPoint& theta, std::span<const double> data);

struct SimulatedPath {
    StatePath states;
    ObservationPath observations;
};

/// Runs the chain for `burn` steps from a fixed start (0 for the HMM, the
/// conditioning state otherwise) and keeps the next n states and observations.
SimulatedPath simulate_stationary(const ModelSpec& model, const ParamPoint& theta, std::size_t n, std::size_t burn,
                                  const RngStream& rng);

}  // namespace pomc
