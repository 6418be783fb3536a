#pragma once

// Reference computations shared by the unit tests and the acceptance suite.
// They rebuild everything from the density functions and never call the
// filter code under test.

#include "pomc/densities.hpp"
#include "pomc/hmm.hpp"

#include <cmath>
#include <vector>

namespace pomc::test {

struct BatchFilter {
    std::vector<double> weights;  ///< normalized filter after the last observation
    double log_mass = 0.0;        ///< ln xi P<y_0:k> 1 on the grid
};

/// Definition-style evaluation of the grid filter: the unnormalized measure
/// xi diag(g_0) K diag(g_1) ... K diag(g_k) is formed as a single product in
/// long double, then normalized once at the end.
inline BatchFilter batch_filter(const ThetaHmm& theta, const hmm::NoisePair& noise, const hmm::Grid& grid,
                                const std::vector<double>& xi, const std::vector<double>& y) {
    const auto nodes = grid.nodes();
    const auto mu = grid.mu_weights();
    const std::size_t s = grid.size();
    auto g = [&](std::size_t j, double yk) {
        return static_cast<long double>(hmm::g_logdensity(theta, noise.observation, nodes[j], yk).density());
    };
    auto q = [&](std::size_t i, std::size_t j) {
        return static_cast<long double>(hmm::q_logdensity(theta, noise.state, nodes[i], nodes[j]).density()) *
               static_cast<long double>(mu[j]);
    };
    std::vector<long double> nu(s);
    for (std::size_t j = 0; j < s; ++j) nu[j] = static_cast<long double>(xi[j]) * g(j, y[0]);
    for (std::size_t k = 1; k < y.size(); ++k) {
        std::vector<long double> next(s, 0.0L);
        for (std::size_t j = 0; j < s; ++j) {
            long double acc = 0.0L;
            for (std::size_t i = 0; i < s; ++i) acc += nu[i] * q(i, j);
            next[j] = acc * g(j, y[k]);
        }
        nu.swap(next);
    }
    long double total = 0.0L;
    for (auto v : nu) total += v;
    BatchFilter out;
    out.log_mass = static_cast<double>(std::log(total));
    for (auto v : nu) out.weights.push_back(static_cast<double>(v / total));
    return out;
}

/// Sum over every grid path x_0..x_k of xi(x_0) g(x_0; y_0) prod q mu g, with
/// the filter read off the endpoint. Exponential in k; for k <= 3 on small grids.
inline BatchFilter path_enumeration_filter(const ThetaHmm& theta, const hmm::NoisePair& noise, const hmm::Grid& grid,
                                           const std::vector<double>& xi, const std::vector<double>& y) {
    const auto nodes = grid.nodes();
    const auto mu = grid.mu_weights();
    const std::size_t s = grid.size();
    const std::size_t k = y.size();
    std::vector<long double> endpoint(s, 0.0L);
    std::vector<std::size_t> path(k, 0);
    for (;;) {
        long double w = static_cast<long double>(xi[path[0]]) *
                        hmm::g_logdensity(theta, noise.observation, nodes[path[0]], y[0]).density();
        for (std::size_t t = 1; t < k; ++t) {
            w *= hmm::q_logdensity(theta, noise.state, nodes[path[t - 1]], nodes[path[t]]).density() * mu[path[t]];
            w *= hmm::g_logdensity(theta, noise.observation, nodes[path[t]], y[t]).density();
        }
        endpoint[path[k - 1]] += w;
        std::size_t pos = 0;
        while (pos < k && ++path[pos] == s) path[pos++] = 0;
        if (pos == k) break;
    }
    long double total = 0.0L;
    for (auto v : endpoint) total += v;
    BatchFilter out;
    out.log_mass = static_cast<double>(std::log(total));
    for (auto v : endpoint) out.weights.push_back(static_cast<double>(v / total));
    return out;
}

/// n^-1 sum ln h(y_k): the exact likelihood when a = 0.
inline double iid_gaussian_loglik(const std::vector<double>& y, double sigma) {
    double total = 0.0;
    for (double v : y) total += gauss_logpdf(v, sigma).value();
    return total / static_cast<double>(y.size());
}

}  // namespace pomc::test
