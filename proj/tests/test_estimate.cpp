#include "pomc/estimate.hpp"
#include "pomc/model.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace pomc;
using namespace pomc::estimate;
using pomc::test::error_kind;

namespace {

const ThetaNbin kNbin{1.0, 0.3, 0.1, 4.0};

ThetaNm nm2() { return ThetaNm{{0.3, 0.7}, {0.2, 1.0}, {0.0, 0.0, 0.0, 0.0}, {0.6, 0.2}}; }

ThetaNm swapped(const ThetaNm& t) {
    return ThetaNm{{t.gamma[1], t.gamma[0]}, {t.omega[1], t.omega[0]}, {t.A[3], t.A[2], t.A[1], t.A[0]}, {t.b[1], t.b[0]}};
}

std::vector<double> nbin_data(const ThetaNbin& theta, std::size_t n, std::uint64_t seed) {
    return simulate_stationary(nbin_spec(), theta, n, 500, RngStream(seed, 0)).observations;
}

}  // namespace

TEST_CASE("ThetaBox construction") {
    const ThetaBox box = ThetaBox::around(kNbin, {{"a", {0.1, 0.5}}, {"b", {0.0, 0.1}}});
    CHECK(box.free_axes() == std::vector<std::size_t>{1, 2});
    CHECK(box.contains(kNbin));
    CHECK_FALSE(box.contains(ThetaNbin{1.0, 0.6, 0.1, 4.0}));
    CHECK(box.bound("omega").lo == 1.0);

    CHECK(error_kind([] { ThetaBox::around(kNbin, {{"a", {0.1, 0.7}}}); }) == ErrorKind::Instability);
    CHECK(error_kind([] { ThetaBox::around(kNbin, {{"a", {0.5, 0.1}}}); }) == ErrorKind::InvalidParameter);
    CHECK(error_kind([] { ThetaBox::around(kNbin, {{"zeta", {0.1, 0.2}}}); }) == ErrorKind::InvalidParameter);
    CHECK(error_kind([] { ThetaBox::around(kNbin, {}); }) == ErrorKind::InvalidParameter);
    CHECK(error_kind([] { ThetaBox(Family::Nbin, 1, {{1, 1}, {0.1, 0.2}}); }) == ErrorKind::DimensionMismatch);
    CHECK(error_kind([] { ThetaBox::around(ThetaHmm{1.0, 0.8}, {{"m", {0.0, 2.0}}}); }) ==
          ErrorKind::InvalidParameter);

    const ThetaBox nm_box = ThetaBox::around(nm2(), {{"gamma1", {0.1, 0.5}}, {"b1", {0.2, 1.0}}});
    CHECK(nm_box.contains(nm2()));
    // rho(A + b gamma^T) = gamma . b reaches 1.8 at b1 = 3, gamma1 = 0.5.
    CHECK(error_kind([] { ThetaBox::around(nm2(), {{"gamma1", {0.1, 0.5}}, {"b1", {0.2, 3.0}}}); }) ==
          ErrorKind::Instability);
}

TEST_CASE("class_distance") {
    const auto identity = identity_class();
    CHECK(class_distance(kNbin, kNbin, identity) == 0.0);
    const ThetaNbin off{1.0, 0.33, 0.1, 4.0};
    CHECK(class_distance(off, kNbin, identity) == doctest::Approx(0.1).epsilon(1e-12));
    // the 1e-2 floor applies to coordinates near zero
    const ThetaNbin zero_b{1.0, 0.3, 0.0, 4.0};
    CHECK(class_distance(ThetaNbin{1.0, 0.3, 0.002, 4.0}, zero_b, identity) == doctest::Approx(0.2).epsilon(1e-12));

    const auto perm = permutation_class(2);
    CHECK(perm.generators.size() == 2);
    CHECK(class_distance(nm2(), nm2(), perm) == 0.0);
    CHECK(class_distance(swapped(nm2()), nm2(), perm) == 0.0);
    CHECK(class_distance(swapped(nm2()), nm2(), identity) > 0.5);

    ThetaNm near = nm2();
    near.b[0] = 0.66;
    near.omega[1] = 1.05;
    const double d0 = class_distance(near, nm2(), perm);
    CHECK(d0 == doctest::Approx(0.1).epsilon(1e-12));
    for (const auto& g : perm.generators) {
        CHECK(class_distance(g.apply(near), nm2(), perm) == doctest::Approx(d0).epsilon(1e-14));
        CHECK(class_distance(near, g.apply(nm2()), perm) == doctest::Approx(d0).epsilon(1e-14));
    }
    CHECK(permutation_class(3).generators.size() == 6);
    CHECK(orbit_coordinate_names(Family::Nm, 2) ==
          std::vector<std::string>{"gamma1", "gamma2", "omega1", "omega2", "A11", "A12", "A21", "A22", "b1", "b2"});
}

TEST_CASE("fit_mle") {
    SUBCASE("b = 0 is recovered") {
        const ThetaNbin truth{1.0, 0.3, 0.0, 4.0};
        const auto data = nbin_data(truth, 5000, 11);
        const ThetaBox box = ThetaBox::around(truth, {{"omega", {0.5, 2.0}}, {"a", {0.1, 0.5}}, {"b", {0.0, 0.1}}});
        FitConfig cfg;
        cfg.resolution = 9;
        const auto fit = fit_mle(nbin_spec(), data, box, cfg);
        const double b_hat = std::get<ThetaNbin>(fit.theta_hat).b;
        CHECK(b_hat >= 0.0);
        CHECK(b_hat <= 0.1 / 8.0);
        CHECK(box.contains(fit.theta_hat));
    }
    SUBCASE("argmax property and determinism") {
        const auto data = nbin_data(kNbin, 1000, 12);
        const ThetaBox box = ThetaBox::around(kNbin, {{"a", {0.15, 0.38}}, {"b", {0.06, 0.12}}, {"r", {3.0, 5.0}}});
        FitConfig cfg;
        cfg.resolution = 7;
        const auto fit = fit_mle(nbin_spec(), data, box, cfg);
        CHECK(fit.surface_samples.size() == 343);
        for (const auto& s : fit.surface_samples) CHECK(fit.loglik_at_hat >= s.value);
        CHECK(fit.loglik_at_hat >= log_likelihood(nbin_spec(), kNbin, data));
        CHECK(fit.loglik_at_hat == log_likelihood(nbin_spec(), fit.theta_hat, data));
        CHECK(fit.converged);

        cfg.workers = 3;
        const auto again = fit_mle(nbin_spec(), data, box, cfg);
        CHECK(again.theta_hat == fit.theta_hat);
        CHECK(again.loglik_at_hat == fit.loglik_at_hat);
    }
    SUBCASE("Halton scan above the point budget") {
        const auto data = nbin_data(kNbin, 300, 13);
        const ThetaBox box = ThetaBox::around(kNbin, {{"a", {0.15, 0.38}}, {"b", {0.06, 0.12}}, {"r", {3.0, 5.0}}});
        FitConfig cfg;
        cfg.resolution = 15;
        cfg.max_scan_points = 500;
        const auto fit = fit_mle(nbin_spec(), data, box, cfg);
        CHECK(fit.surface_samples.size() == 500);
        for (const auto& s : fit.surface_samples) CHECK(fit.loglik_at_hat >= s.value);
    }
    SUBCASE("HMM fit on a coarse grid") {
        const ThetaHmm truth{1.0, 0.8};
        hmm::GridSpec grid = hmm::default_grid(2.0);
        grid.n_cells = 100;
        const auto model = hmm_spec({}, grid);
        const auto data = simulate_stationary(model, truth, 300, 200, RngStream(14, 0)).observations;
        const ThetaBox box = ThetaBox::around(truth, {{"m", {0.5, 2.0}}, {"a", {0.2, 1.4}}});
        FitConfig cfg;
        cfg.resolution = 5;
        const auto fit = fit_mle(model, data, box, cfg);
        CHECK(fit.loglik_at_hat >= log_likelihood(model, truth, data));
        CHECK(box.contains(fit.theta_hat));
    }
    const std::vector<double> short_data(10, 1.0);
    const ThetaBox box = ThetaBox::around(kNbin, {{"a", {0.1, 0.5}}});
    CHECK(error_kind([&] { fit_mle(nbin_spec(), short_data, box, {}); }) == ErrorKind::InsufficientData);
}

TEST_CASE("kl_profile") {
    KlConfig cfg;
    cfg.n = 20000;
    cfg.truncation = 100;
    SUBCASE("NBIN") {
        std::vector<ParamPoint> grid;
        for (double a : {0.1, 0.2, 0.3, 0.4, 0.5}) grid.push_back(ThetaNbin{1.0, a, 0.1, 4.0});
        const auto profile = kl_profile(nbin_spec(), kNbin, grid, cfg, RngStream(21, 0));
        REQUIRE(profile.size() == 5);
        CHECK(profile[2].estimate == 0.0);
        CHECK(profile[2].standard_error == 0.0);
        for (const auto& e : profile) CHECK(e.estimate + 2 * e.standard_error >= 0.0);
        CHECK(argmax_check(profile, kNbin, identity_class(), 0.1));
        const auto again = kl_profile(nbin_spec(), kNbin, grid, cfg, RngStream(21, 0));
        for (std::size_t i = 0; i < profile.size(); ++i) CHECK(again[i].estimate == profile[i].estimate);
    }
    SUBCASE("HMM") {
        hmm::GridSpec g = hmm::default_grid(2.0);
        g.n_cells = 100;
        const auto model = hmm_spec({}, g);
        const ThetaHmm star{1.0, 0.8};
        cfg.n = 2000;
        cfg.truncation = 50;
        const std::vector<ParamPoint> grid{ThetaHmm{1.0, 0.4}, star, ThetaHmm{1.0, 1.2}};
        const auto profile = kl_profile(model, star, grid, cfg, RngStream(22, 0));
        CHECK(profile[1].estimate == 0.0);
        for (const auto& e : profile) CHECK(e.estimate + 2 * e.standard_error >= 0.0);
    }
    const std::vector<ParamPoint> unstable{ThetaNbin{1.0, 0.7, 0.1, 4.0}};
    CHECK(error_kind([&] { kl_profile(nbin_spec(), kNbin, unstable, cfg, RngStream(1, 1)); }) ==
          ErrorKind::Instability);
}

TEST_CASE("argmax_check") {
    const std::vector<ProfileEntry> single{{kNbin, 0.0, 0.0, 0.0}};
    CHECK(argmax_check(single, kNbin, identity_class(), 0.0));
    const std::vector<ProfileEntry> off{{kNbin, 0.0, 0.0, 0.0}, {ThetaNbin{1.0, 0.4, 0.1, 4.0}, -0.1, 0.0, 0.0}};
    CHECK_FALSE(argmax_check(off, kNbin, identity_class(), 0.05));
    CHECK(argmax_check(off, kNbin, identity_class(), 0.1));
    const std::vector<ProfileEntry> swap{{swapped(nm2()), 0.0, 0.0, 0.0}, {nm2(), 0.5, 0.0, 0.0}};
    CHECK(argmax_check(swap, nm2(), permutation_class(2), 0.0));
    CHECK_FALSE(argmax_check(swap, nm2(), identity_class(), 0.0));
}

TEST_CASE("consistency_curve") {
    const ThetaBox box = ThetaBox::around(kNbin, {{"a", {0.1, 0.5}}, {"b", {0.05, 0.12}}});
    ConsistencyConfig cfg;
    cfg.n_list = {100, 400};
    cfg.replicates = 3;
    cfg.burn = 200;
    cfg.fit.resolution = 7;
    const auto a = consistency_curve(nbin_spec(), kNbin, box, identity_class(), cfg, RngStream(31, 0));
    cfg.workers = 2;
    const auto b = consistency_curve(nbin_spec(), kNbin, box, identity_class(), cfg, RngStream(31, 0));
    REQUIRE(a.rows.size() == 2);
    REQUIRE(a.replicates.size() == 6);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(std::isfinite(a.rows[i].mean_delta));
        CHECK(a.rows[i].mean_delta >= 0.0);
        CHECK(a.rows[i].q10 <= a.rows[i].q50);
        CHECK(a.rows[i].q50 <= a.rows[i].q90);
        CHECK(a.rows[i].mean_delta == b.rows[i].mean_delta);
        CHECK(a.rows[i].failures == 0);
    }
    for (std::size_t i = 0; i < a.replicates.size(); ++i) CHECK(a.replicates[i].theta_hat == b.replicates[i].theta_hat);

    cfg.replicates = 2;
    CHECK(error_kind([&] { consistency_curve(nbin_spec(), kNbin, box, identity_class(), cfg, RngStream(1, 0)); }) ==
          ErrorKind::InvalidParameter);
    cfg.replicates = 3;
    cfg.n_list = {400, 100};
    CHECK(error_kind([&] { consistency_curve(nbin_spec(), kNbin, box, identity_class(), cfg, RngStream(1, 0)); }) ==
          ErrorKind::InvalidParameter);
}
