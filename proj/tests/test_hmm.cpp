#include "pomc/hmm.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

using namespace pomc;
using namespace pomc::hmm;
using pomc::test::error_kind;
using pomc::test::integrate;

namespace {

const ThetaHmm kTheta{1.0, 0.8};
const NoisePair kNoise{};

double weight_sum(const FilterState& s) {
    double total = 0.0;
    for (double lw : s.log_weights) total += std::exp(lw);
    return total;
}

std::vector<double> simulated_y(std::size_t n, std::uint64_t seed, const ThetaHmm& theta = kTheta) {
    return simulate_hmm(theta, kNoise, 0.0, n, RngStream(seed, 0)).observations;
}

}  // namespace

TEST_CASE("q_logdensity") {
    const SymmetricPareto r{3.5, 1.0};
    CHECK(q_logdensity(kTheta, r, kTheta.m, 0.0).value() == doctest::Approx(std::log(0.5)).epsilon(1e-14));
    for (double x : {0.0, 0.5, 2.0})
        for (double xp : {0.1, 1.0, 6.0}) {
            CHECK(q_logdensity(kTheta, r, x, xp).value() == pareto_sym_logpdf(xp - x + kTheta.m, 3.5, 1.0).value());
        }
    SUBCASE("integrates to one against mu") {
        for (double m : {0.5, 1.0, 2.0}) {
            const ThetaHmm th{m, 0.8};
            for (double x : {0.0, m, 3 * m}) {
                const double atom = q_logdensity(th, r, x, 0.0).density();
                auto f = [&](double xp) { return q_logdensity(th, r, x, xp).density(); };
                const double inf = std::numeric_limits<double>::infinity();
                const double kink = std::max(x - m, 0.0);
                const double cont = (kink > 0 ? integrate(f, 0.0, kink) : 0.0) + integrate(f, kink, inf);
                CHECK(std::abs(atom + cont - 1.0) < 1e-6);
            }
        }
    }
    CHECK(error_kind([&] { q_logdensity(kTheta, r, -0.1, 1.0); }) == ErrorKind::InvalidState);
    CHECK(error_kind([&] { q_logdensity(kTheta, r, 1.0, -0.1); }) == ErrorKind::InvalidState);
    CHECK(error_kind([&] { q_logdensity(ThetaHmm{0.0, 0.8}, r, 1.0, 1.0); }) == ErrorKind::InvalidParameter);
}

TEST_CASE("g_logdensity") {
    const Gaussian h{1.3};
    const ThetaHmm flat{1.0, 0.0};
    for (double y : {-1.0, 0.5})
        for (double x : {0.0, 2.0, 9.0}) {
            CHECK(g_logdensity(flat, h, x, y).value() == g_logdensity(flat, h, 0.0, y).value());
        }
    const double peak = -0.5 * std::log(2 * std::numbers::pi * 1.3 * 1.3);
    for (double x : {0.0, 1.0, 4.0}) {
        CHECK(g_logdensity(kTheta, h, x, kTheta.a * x).value() == doctest::Approx(peak).epsilon(1e-14));
        for (double y : {-3.0, 0.0, 2.0}) CHECK(g_logdensity(kTheta, h, x, y).value() <= peak);
    }
    CHECK(error_kind([&] { g_logdensity(kTheta, h, -1.0, 0.0); }) == ErrorKind::InvalidState);
}

TEST_CASE("simulate_hmm") {
    SUBCASE("X_1 = 0 exactly when U_1 <= m") {
        for (std::uint64_t seed = 0; seed < 200; ++seed) {
            const RngStream rng(seed, 4);
            const auto path = simulate_hmm(kTheta, kNoise, 0.0, 2, rng);
            auto u_stream = rng.substream(StreamPurpose::State);
            const double u1 = sample(NoiseSpec{kNoise.state}, u_stream);
            CHECK((path.states[1][0] == 0.0) == (u1 <= kTheta.m));
        }
    }
    SUBCASE("a = 0 gives i.i.d. Gaussian observations independent of X") {
        const auto path = simulate_hmm(ThetaHmm{1.0, 0.0}, kNoise, 0.0, 100000, RngStream(2, 0));
        const auto& y = path.observations;
        const double n = static_cast<double>(y.size());
        const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
        double var = 0.0, lag = 0.0, cross = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k) {
            var += (y[k] - mean) * (y[k] - mean);
            if (k) lag += (y[k] - mean) * (y[k - 1] - mean);
            cross += (y[k] - mean) * path.states.values[k];
        }
        CHECK(std::abs(mean) < 0.02);
        CHECK(var / n == doctest::Approx(1.0).epsilon(0.02));
        CHECK(std::abs(lag / var) < 0.02);
        CHECK(std::abs(cross / n) < 0.05);
    }
    SUBCASE("fraction of zeros lies in (0,1) and grows with m") {
        auto zero_fraction = [](double m) {
            const auto path = simulate_hmm(ThetaHmm{m, 0.8}, kNoise, 0.0, 100000, RngStream(3, 0));
            const auto zeros = std::count(path.states.values.begin(), path.states.values.end(), 0.0);
            return static_cast<double>(zeros) / static_cast<double>(path.states.values.size());
        };
        const double f1 = zero_fraction(1.0);
        const double f3 = zero_fraction(3.0);
        CHECK(f1 > 0.0);
        CHECK(f3 < 1.0);
        CHECK(f1 < f3);
    }
    SUBCASE("shape and determinism") {
        const auto a = simulate_hmm(kTheta, kNoise, 2.0, 50, RngStream(5, 5));
        const auto b = simulate_hmm(kTheta, kNoise, 2.0, 50, RngStream(5, 5));
        CHECK(a.states.size() == 50);
        CHECK(a.observations.size() == 50);
        CHECK(a.states[0][0] == 2.0);
        CHECK(a.observations == b.observations);
        CHECK(a.states.values == b.states.values);
        for (double x : a.states.values) CHECK(x >= 0.0);
    }
}

TEST_CASE("grid and filter_init") {
    const Grid grid(GridSpec{40.0, 400, Spacing::Geometric, 30.0});
    CHECK(grid.size() == 401);
    CHECK(grid.nodes()[0] == 0.0);
    CHECK(grid.mu_weights()[0] == 1.0);
    const auto mu = grid.mu_weights();
    CHECK(std::accumulate(mu.begin() + 1, mu.end(), 0.0) == doctest::Approx(40.0).epsilon(1e-12));
    const double first = mu[1], last = mu[400];
    CHECK(last / first == doctest::Approx(30.0).epsilon(1e-9));

    const auto dirac = filter_init(grid, InitialLaw::dirac(0.0));
    CHECK(dirac.log_weights[0] == 0.0);
    for (std::size_t i = 1; i < grid.size(); ++i) CHECK(dirac.log_weights[i] == -std::numeric_limits<double>::infinity());
    CHECK(dirac.log_normalizer_accum == 0.0);

    const auto uni = filter_init(grid, InitialLaw::uniform(40.0));
    CHECK(weight_sum(uni) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(std::exp(uni.log_weights[i]) == doctest::Approx(mu[i] / 41.0).epsilon(1e-12));
    }
    const auto part = filter_init(grid, InitialLaw::uniform(5.0));
    CHECK(weight_sum(part) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::exp(part.log_weights[0]) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    CHECK(std::exp(part.log_weights[grid.nearest(20.0)]) == 0.0);

    CHECK(error_kind([&] { filter_init(grid, InitialLaw::dirac(41.0)); }) == ErrorKind::InvalidState);
}

TEST_CASE("filter_step") {
    SUBCASE("single-node grid") {
        const Grid atom(GridSpec{1.0, 0, Spacing::Uniform, 1.0});
        REQUIRE(atom.size() == 1);
        auto state = filter_init(atom, InitialLaw::dirac(0.0));
        const double y = 0.7;
        const auto next = filter_step(kTheta, kNoise, atom, state, 0.0, y);
        const double expected = q_logdensity(kTheta, kNoise.state, 0.0, 0.0).value() + std::log(1.0) +
                                g_logdensity(kTheta, kNoise.observation, 0.0, y).value();
        CHECK(next.log_normalizer_accum == doctest::Approx(expected).epsilon(1e-14));
        CHECK(next.log_weights[0] == 0.0);
    }
    SUBCASE("weights stay normalized") {
        const Grid grid(GridSpec{40.0, 400, Spacing::Geometric, 30.0});
        const auto y = simulated_y(60, 9);
        auto state = filter_correct(kTheta, kNoise, grid, filter_init(grid, InitialLaw::dirac(0.0)), y[0]);
        for (std::size_t k = 1; k < y.size(); ++k) {
            state = filter_step(kTheta, kNoise, grid, state, y[k - 1], y[k]);
            CHECK(std::abs(weight_sum(state) - 1.0) < 1e-10);
            for (double lw : state.log_weights) REQUIRE(lw > -std::numeric_limits<double>::infinity());
        }
    }
    SUBCASE("recursion equals batch and path enumeration") {
        const Grid grid(GridSpec{12.0, 7, Spacing::Geometric, 5.0});
        const std::vector<double> y{0.4, 1.9, -0.3, 2.5, 0.8};
        const std::vector<double> xi(grid.size(), 1.0 / static_cast<double>(grid.size()));
        FilterState state;
        for (double w : xi) state.log_weights.push_back(std::log(w));
        state = filter_correct(kTheta, kNoise, grid, state, y[0]);
        for (std::size_t k = 1; k < y.size(); ++k) {
            state = filter_step(kTheta, kNoise, grid, state, y[k - 1], y[k]);
            const std::vector<double> prefix(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(k + 1));
            const auto batch = test::batch_filter(kTheta, kNoise, grid, xi, prefix);
            CHECK(std::abs(batch.log_mass - state.log_normalizer_accum) < 1e-10);
            for (std::size_t j = 0; j < grid.size(); ++j) {
                CHECK(std::abs(batch.weights[j] - std::exp(state.log_weights[j])) < 1e-10);
            }
            if (k <= 3) {
                const auto paths = test::path_enumeration_filter(kTheta, kNoise, grid, xi, prefix);
                CHECK(std::abs(paths.log_mass - state.log_normalizer_accum) < 1e-10);
                for (std::size_t j = 0; j < grid.size(); ++j) {
                    CHECK(std::abs(paths.weights[j] - std::exp(state.log_weights[j])) < 1e-10);
                }
            }
        }
    }
}

TEST_CASE("loglik_grid") {
    const GridSpec spec = default_grid(2.0);
    SUBCASE("n = 1 at a point mass") {
        for (double y : {-1.0, 0.3, 2.0}) {
            const std::vector<double> one{y};
            CHECK(loglik_grid(kTheta, kNoise, spec, InitialLaw::dirac(0.0), one) ==
                  doctest::Approx(g_logdensity(kTheta, kNoise.observation, 0.0, y).value()).epsilon(1e-14));
        }
    }
    SUBCASE("matches brute force for n = 2, 3") {
        const auto y = simulated_y(3, 21);
        for (std::size_t n : {1u, 2u, 3u}) {
            const std::vector<double> yn(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n));
            for (const auto& xi : {InitialLaw::dirac(0.0), InitialLaw::uniform(5.0)}) {
                const double grid_value = loglik_grid(kTheta, kNoise, spec, xi, yn);
                const double exact = loglik_bruteforce(kTheta, kNoise, xi, yn);
                CHECK(std::abs(grid_value - exact) < 1e-3);
            }
        }
    }
    SUBCASE("refinement deltas shrink") {
        const auto y = simulated_y(50, 22);
        std::vector<double> values;
        for (std::size_t cells : {100u, 200u, 400u, 800u}) {
            GridSpec s = spec;
            s.n_cells = cells;
            values.push_back(loglik_grid(kTheta, kNoise, s, InitialLaw::dirac(0.0), y));
        }
        for (std::size_t i = 2; i < values.size(); ++i) {
            CHECK(std::abs(values[i] - values[i - 1]) < std::abs(values[i - 1] - values[i - 2]));
        }
    }
    SUBCASE("rows near the bulk of the chain keep their mass") {
        const GridModel model(kTheta, kNoise, Grid(spec));
        const auto nodes = model.grid().nodes();
        const auto t = model.transition();
        const std::size_t s = nodes.size();
        for (std::size_t i = 0; i < s && nodes[i] <= 2 * kTheta.m; ++i) {
            const double mass = std::accumulate(t.begin() + i * s, t.begin() + (i + 1) * s, 0.0);
            CHECK(std::abs(1.0 - mass) < 1e-3);
        }
        CHECK(model.truncation_mass() <= 1.0);
    }
    const std::vector<double> empty;
    CHECK(error_kind([&] { loglik_grid(kTheta, kNoise, spec, InitialLaw::dirac(0.0), empty); }) ==
          ErrorKind::EmptyPath);
}

TEST_CASE("loglik_bruteforce") {
    const auto y = simulated_y(3, 31);
    SUBCASE("n = 1 closed form") {
        const std::vector<double> one{y[0]};
        CHECK(loglik_bruteforce(kTheta, kNoise, InitialLaw::dirac(1.5), one) ==
              doctest::Approx(g_logdensity(kTheta, kNoise.observation, 1.5, y[0]).value()).epsilon(1e-14));
    }
    SUBCASE("integration order does not matter for n = 2") {
        const std::vector<double> two{y[0], y[1]};
        QuadratureSpec forward;
        QuadratureSpec reverse;
        reverse.reverse_order = true;
        const double a = loglik_bruteforce(kTheta, kNoise, InitialLaw::uniform(4.0), two, forward);
        const double b = loglik_bruteforce(kTheta, kNoise, InitialLaw::uniform(4.0), two, reverse);
        CHECK(std::abs(a - b) < 1e-10);
    }
    SUBCASE("stable under refinement") {
        for (std::size_t n : {2u, 3u}) {
            const std::vector<double> yn(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n));
            QuadratureSpec coarse;
            coarse.tolerance = 1e-8;
            QuadratureSpec fine;
            fine.tolerance = 5e-9;
            const double a = loglik_bruteforce(kTheta, kNoise, InitialLaw::dirac(0.0), yn, coarse);
            const double b = loglik_bruteforce(kTheta, kNoise, InitialLaw::dirac(0.0), yn, fine);
            CHECK(std::abs(a - b) < 1e-6);
        }
    }
    const std::vector<double> four{0, 0, 0, 0};
    CHECK(error_kind([&] { loglik_bruteforce(kTheta, kNoise, InitialLaw::dirac(0.0), four); }) ==
          ErrorKind::InvalidParameter);
}

TEST_CASE("particle_filter_loglik") {
    SUBCASE("a = 0 is exact") {
        const ThetaHmm flat{1.0, 0.0};
        const auto y = simulated_y(50, 41, flat);
        const double exact = test::iid_gaussian_loglik(y, 1.0);
        for (std::size_t n : {100u, 1000u}) {
            const auto pf = particle_filter_loglik(flat, kNoise, InitialLaw::dirac(0.0), y, n, RngStream(1, n));
            CHECK(std::abs(pf.loglik - exact) < 1e-10);
        }
    }
    SUBCASE("determinism and diagnostics") {
        const auto y = simulated_y(40, 42);
        const auto a = particle_filter_loglik(kTheta, kNoise, InitialLaw::dirac(0.0), y, 2000, RngStream(7, 0));
        const auto b = particle_filter_loglik(kTheta, kNoise, InitialLaw::dirac(0.0), y, 2000, RngStream(7, 0));
        CHECK(a.loglik == b.loglik);
        CHECK(a.standard_error == b.standard_error);
        CHECK(a.ess.size() == y.size());
        CHECK(a.islands == 2);
        CHECK(a.min_ess > 10.0);
        CHECK_FALSE(a.degenerate);
    }
    SUBCASE("standard error halves when N quadruples") {
        const auto y = simulated_y(20, 43);
        auto spread = [&](std::size_t n) {
            std::vector<double> est;
            for (std::uint64_t run = 0; run < 200; ++run) {
                est.push_back(
                    particle_filter_loglik(kTheta, kNoise, InitialLaw::dirac(0.0), y, n, RngStream(100 + run, n)).loglik);
            }
            const double mean = std::accumulate(est.begin(), est.end(), 0.0) / est.size();
            double ss = 0.0;
            for (double e : est) ss += (e - mean) * (e - mean);
            return std::sqrt(ss / (est.size() - 1));
        };
        const double ratio = spread(400) / spread(100);
        CHECK(ratio >= 0.4);
        CHECK(ratio <= 0.6);
    }
    SUBCASE("reported standard error tracks the run-to-run spread") {
        const auto y = simulated_y(20, 44);
        std::vector<double> est;
        double reported = 0.0;
        for (std::uint64_t run = 0; run < 100; ++run) {
            const auto pf = particle_filter_loglik(kTheta, kNoise, InitialLaw::dirac(0.0), y, 2000, RngStream(500 + run, 0));
            est.push_back(pf.loglik);
            reported += pf.standard_error / 100.0;
        }
        const double mean = std::accumulate(est.begin(), est.end(), 0.0) / est.size();
        double ss = 0.0;
        for (double e : est) ss += (e - mean) * (e - mean);
        const double empirical = std::sqrt(ss / (est.size() - 1));
        CHECK(reported / empirical > 0.5);
        CHECK(reported / empirical < 2.0);
    }
    const std::vector<double> y{0.1, 0.2};
    CHECK(error_kind([&] { particle_filter_loglik(kTheta, kNoise, InitialLaw::dirac(0.0), y, 99, RngStream(1, 1)); }) ==
          ErrorKind::InvalidParameter);
}

TEST_CASE("filter_tv_gap") {
    const GridSpec spec = default_grid(2.0);
    const auto y = simulated_y(500, 51);
    const auto same = filter_tv_gap(kTheta, kNoise, spec, InitialLaw::dirac(0.0), InitialLaw::dirac(0.0), y);
    for (double g : same) CHECK(g == 0.0);
    const auto gaps = filter_tv_gap(kTheta, kNoise, spec, InitialLaw::dirac(0.0), InitialLaw::uniform(10.0), y);
    REQUIRE(gaps.size() == y.size());
    for (double g : gaps) {
        CHECK(g >= 0.0);
        CHECK(g <= 1.0 + 1e-12);
    }
    CHECK(gaps.back() < 1e-3);
}
