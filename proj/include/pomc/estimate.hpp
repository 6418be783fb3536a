#pragma once

#include "pomc/model.hpp"
#include "pomc/params.hpp"
#include "pomc/rng.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace pomc::estimate {

struct Interval {
    double lo;
    double hi;
};

/// Compact parameter box over the flat coordinates of `flatten`. A coordinate
/// with lo == hi is held fixed. Construction checks the family's stability
/// constraint on the whole box: rb + a < 1 at the NBIN upper corner, and
/// rho(A + b gamma^T) < 1 for NM at the upper A, b corner over a sweep of gamma.
class ThetaBox {
public:
    ThetaBox(Family family, std::size_t d, std::vector<Interval> bounds);

    /// Box with every coordinate fixed at theta's value except the named ones.
    static ThetaBox around(const ParamPoint& theta, const std::vector<std::pair<std::string, Interval>>& free);

    Family family() const noexcept { return family_; }
    std::size_t dim() const noexcept { return d_; }
    const std::vector<Interval>& bounds() const noexcept { return bounds_; }
    const std::vector<std::string>& names() const noexcept { return names_; }
    std::vector<std::size_t> free_axes() const;
    bool contains(const ParamPoint& theta) const;
    const Interval& bound(const std::string& name) const;

private:
    Family family_;
    std::size_t d_;
    std::vector<Interval> bounds_;
    std::vector<std::string> names_;
};

/// A map theta -> theta' with theta' in [theta].
struct Generator {
    std::string name;
    std::function<ParamPoint(const ParamPoint&)> apply;
};

/// Generators of the equivalence class used for distances. The generator list
/// is closed under composition (it lists the whole group), so the orbit of a
/// point is the set of its images.
struct EquivClassSpec {
    std::vector<Generator> generators;
    /// Denominator floor of the per-coordinate relative error.
    double relative_floor = 1e-2;
};

/// Identity only: no symmetry is known for the HMM example or NBIN.
EquivClassSpec identity_class();
/// All d! relabelings of the mixture components, acting jointly on gamma,
/// omega, rows and columns of A, and b. Each leaves the mixture density and the
/// state recursion unchanged up to the same relabeling of the state.
EquivClassSpec permutation_class(std::size_t d);
EquivClassSpec default_class(Family family, std::size_t d);

/// Symmetric coordinates used for distances: like `flatten`, but NM keeps all
/// d mixture weights so that component permutations act as coordinate permutations.
std::vector<double> orbit_coordinates(const ParamPoint& theta);
std::vector<std::string> orbit_coordinate_names(Family family, std::size_t d);

std::vector<ParamPoint> orbit(const ParamPoint& theta, const EquivClassSpec& spec);

/// min over the orbit of theta_hat of max_i |theta_hat_i - theta_star_i| / max(|theta_star_i|, floor).
double class_distance(const ParamPoint& theta_hat, const ParamPoint& theta_star, const EquivClassSpec& spec);

struct FitConfig {
    std::size_t resolution = 15;
    std::size_t min_n = 50;
    /// Above this many grid points the scan switches to a Halton design of this size.
    std::size_t max_scan_points = 60000;
    std::size_t max_iterations = 2000;
    double ftol = 1e-10;
    double xtol = 1e-8;
    std::size_t workers = 1;
};

struct SurfaceSample {
    ParamPoint theta;
    double value;
};

struct FitResult {
    ParamPoint theta_hat;
    double loglik_at_hat = 0.0;
    std::vector<SurfaceSample> surface_samples;
    std::size_t refine_iterations = 0;
    bool converged = false;
};

/// Maximum likelihood over the box: a scan over the free axes followed by
/// Nelder-Mead from the best scan point, clipped to the box. Deterministic for
/// a given configuration; the worker count affects speed only.
FitResult fit_mle(const ModelSpec& model, std::span<const double> data, const ThetaBox& box, const FitConfig& cfg);

struct KlConfig {
    std::size_t n = 100000;
    /// Past truncation m; terms are also evaluated with m/2 to report sensitivity.
    std::size_t truncation = 200;
    std::size_t burn = 1000;
    std::size_t batches = 30;
    std::size_t workers = 1;
};

struct ProfileEntry {
    ParamPoint theta;
    double estimate = 0.0;
    double standard_error = 0.0;
    /// Estimate with truncation m minus estimate with m/2.
    double truncation_delta = 0.0;
};

/// Monte Carlo estimate of E[ln p^theta_star(Y | past) - ln p^{theta,theta_star}(Y | past)]
/// for each grid point, along one long path simulated under theta_star.
std::vector<ProfileEntry> kl_profile(const ModelSpec& model, const ParamPoint& theta_star,
                                     const std::vector<ParamPoint>& theta_grid, const KlConfig& cfg,
                                     const RngStream& rng);

/// True iff every minimizer of the profile estimate is within `tolerance` of the
/// orbit of theta_star, coordinate by coordinate on `orbit_coordinates`. Comparisons
/// allow a relative rounding slack of 1e-12.
bool argmax_check(const std::vector<ProfileEntry>& profile, const ParamPoint& theta_star, const EquivClassSpec& spec,
                  const std::vector<double>& tolerance);
bool argmax_check(const std::vector<ProfileEntry>& profile, const ParamPoint& theta_star, const EquivClassSpec& spec,
                  double tolerance);

struct ConsistencyConfig {
    std::vector<std::size_t> n_list;
    std::size_t replicates = 5;
    std::size_t burn = 1000;
    FitConfig fit{};
    std::size_t workers = 1;
};

struct ReplicateRecord {
    std::size_t n = 0;
    std::size_t replicate = 0;
    bool ok = false;
    ParamPoint theta_hat{};
    double loglik = 0.0;
    double delta = 0.0;
    std::string error;
};

struct CurveRow {
    std::size_t n = 0;
    double mean_delta = 0.0;
    double q10 = 0.0;
    double q50 = 0.0;
    double q90 = 0.0;
    std::size_t failures = 0;
};

struct ConsistencyResult {
    std::vector<CurveRow> rows;
    std::vector<ReplicateRecord> replicates;
};

/// For each n and replicate: simulate under theta_star, fit over the box, and
/// measure class_distance. Replicate j at length index i uses the substream
/// keyed (i, j), so tables are reproducible. Failed replicates are recorded.
ConsistencyResult consistency_curve(const ModelSpec& model, const ParamPoint& theta_star, const ThetaBox& box,
                                    const EquivClassSpec& spec, const ConsistencyConfig& cfg, const RngStream& rng);

}  // namespace pomc::estimate
