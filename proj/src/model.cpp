#include "pomc/model.hpp"

#include "pomc/error.hpp"

namespace pomc {

ModelSpec hmm_spec(const hmm::NoisePair& noise, const hmm::GridSpec& grid, const hmm::InitialLaw& xi) {
    ModelSpec spec;
    spec.family = Family::Hmm1;
    spec.noise = noise;
    spec.grid = grid;
    spec.xi = xi;
    return spec;
}

ModelSpec nbin_spec(odm::NbParametrization nb) {
    ModelSpec spec;
    spec.family = Family::Nbin;
    spec.odm = odm::nbin_model(nb);
    return spec;
}

ModelSpec nm_spec(std::size_t d) {
    ModelSpec spec;
    spec.family = Family::Nm;
    spec.odm = odm::nm_model(d);
    return spec;
}

double log_likelihood(const ModelSpec& model, const ParamPoint& theta, std::span<const double> data) {
    require(family_of(theta) == model.family, ErrorKind::InvalidParameter,
            "parameter family does not match the model");
    if (model.family == Family::Hmm1) {
        return hmm::loglik_grid(std::get<ThetaHmm>(theta), model.noise, model.grid, model.xi, data);
    }
    return odm::cond_loglik(model.odm, theta, model.conditioning_state(), data);
}

SimulatedPath simulate_stationary(const ModelSpec& model, const ParamPoint& theta, std::size_t n, std::size_t burn,
                                  const RngStream& rng) {
    require(n >= 1, ErrorKind::InvalidParameter, "path length must be at least 1");
    SimulatedPath out;
    if (model.family == Family::Hmm1) {
        auto path = hmm::simulate_hmm(std::get<ThetaHmm>(theta), model.noise, 0.0, burn + n, rng);
        out.states.dim = 1;
        out.states.values.assign(path.states.values.begin() + static_cast<std::ptrdiff_t>(burn),
                                 path.states.values.end());
        out.observations.assign(path.observations.begin() + static_cast<std::ptrdiff_t>(burn),
                                path.observations.end());
        return out;
    }
    auto path = odm::simulate_odm(model.odm, theta, model.conditioning_state(), burn + n, rng);
    const std::size_t d = path.states.dim;
    out.states.dim = d;
    // States X_{burn+1} .. X_{burn+n} pair with observations Y_{burn+1} .. Y_{burn+n}.
    out.states.values.assign(path.states.values.begin() + static_cast<std::ptrdiff_t>(burn * d),
                             path.states.values.begin() + static_cast<std::ptrdiff_t>((burn + n) * d));
    out.observations.assign(path.observations.begin() + static_cast<std::ptrdiff_t>(burn), path.observations.end());
    return out;
}

}  // namespace pomc
