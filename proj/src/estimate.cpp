#include "pomc/estimate.hpp"

#include "pomc/error.hpp"
#include "pomc/odm.hpp"
#include "pomc/parallel.hpp"
#include "pomc/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace pomc::estimate {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double radical_inverse(std::size_t index, std::size_t base) {
    double result = 0.0;
    double f = 1.0 / static_cast<double>(base);
    while (index > 0) {
        result += f * static_cast<double>(index % base);
        index /= base;
        f /= static_cast<double>(base);
    }
    return result;
}

constexpr std::array<std::size_t, 24> kPrimes{2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37,
                                              41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89};

double halton(std::size_t index, std::size_t axis) { return radical_inverse(index + 1, kPrimes[axis % kPrimes.size()]); }

std::size_t index_of(const std::vector<std::string>& names, const std::string& name) {
    const auto it = std::find(names.begin(), names.end(), name);
    require(it != names.end(), ErrorKind::InvalidParameter, "unknown coordinate '" + name + "'");
    return static_cast<std::size_t>(it - names.begin());
}

void check_nm_box_stability(std::size_t d, const std::vector<Interval>& bounds) {
    // Perron root is monotone in the entries of A and b, so their upper corner
    // is the worst case; gamma is swept because it lives on the simplex.
    const std::size_t n_gamma = d - 1;
    const std::size_t a_offset = n_gamma + d;
    const std::size_t b_offset = a_offset + d * d;
    std::vector<double> upper_a(d * d);
    std::vector<double> upper_b(d);
    for (std::size_t i = 0; i < d * d; ++i) upper_a[i] = bounds[a_offset + i].hi;
    for (std::size_t i = 0; i < d; ++i) upper_b[i] = bounds[b_offset + i].hi;

    const std::size_t samples = n_gamma == 0 ? 1 : 257;
    std::size_t checked = 0;
    for (std::size_t s = 0; s < samples + (n_gamma == 0 ? 0 : 2); ++s) {
        std::vector<double> gamma(d);
        double rest = 1.0;
        for (std::size_t l = 0; l < n_gamma; ++l) {
            const Interval& iv = bounds[l];
            double u = 0.0;
            if (s == samples) u = 0.0;
            else if (s == samples + 1) u = 1.0;
            else u = halton(s, l);
            gamma[l] = iv.lo + u * (iv.hi - iv.lo);
            rest -= gamma[l];
        }
        if (rest < -kSimplexTolerance) continue;
        gamma[d - 1] = std::max(0.0, rest);
        std::vector<double> companion(upper_a);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) companion[i * d + j] += upper_b[i] * gamma[j];
        const double rho = odm::spectral_radius(companion, d);
        require(rho < 1.0, ErrorKind::Instability,
                "NM box violates rho(A + b gamma^T) < 1 (found " + std::to_string(rho) + ")");
        ++checked;
    }
    require(checked > 0, ErrorKind::InvalidParameter, "NM box contains no simplex point");
}

}  // namespace

// ---------------------------------------------------------------------------
// ThetaBox

ThetaBox::ThetaBox(Family family, std::size_t d, std::vector<Interval> bounds)
    : family_(family), d_(family == Family::Nm ? d : 1), bounds_(std::move(bounds)), names_(coordinate_names(family, d_)) {
    require(bounds_.size() == names_.size(), ErrorKind::DimensionMismatch,
            "box needs " + std::to_string(names_.size()) + " intervals");
    bool any_free = false;
    for (std::size_t i = 0; i < bounds_.size(); ++i) {
        const auto& iv = bounds_[i];
        require(std::isfinite(iv.lo) && std::isfinite(iv.hi) && iv.lo <= iv.hi, ErrorKind::InvalidParameter,
                "box interval for " + names_[i] + " must be finite with lo <= hi");
        any_free = any_free || iv.lo < iv.hi;
    }
    require(any_free, ErrorKind::InvalidParameter, "box has an empty interior: every coordinate is fixed");
    switch (family_) {
        case Family::Hmm1:
            require(bounds_[0].lo > 0.0, ErrorKind::InvalidParameter, "HMM box needs m > 0");
            break;
        case Family::Nbin: {
            require(bounds_[0].lo > 0.0 && bounds_[3].lo > 0.0, ErrorKind::InvalidParameter,
                    "NBIN box needs omega > 0 and r > 0");
            require(bounds_[1].lo >= 0.0 && bounds_[2].lo >= 0.0, ErrorKind::InvalidParameter,
                    "NBIN box needs a, b >= 0");
            const double corner = bounds_[3].hi * bounds_[2].hi + bounds_[1].hi;
            require(corner < 1.0, ErrorKind::Instability,
                    "NBIN box violates rb + a < 1 at its upper corner (" + std::to_string(corner) + ")");
            break;
        }
        case Family::Nm: {
            for (std::size_t i = 0; i < bounds_.size(); ++i) {
                const bool is_omega = i >= d_ - 1 && i < 2 * d_ - 1;
                require(is_omega ? bounds_[i].lo > 0.0 : bounds_[i].lo >= 0.0, ErrorKind::InvalidParameter,
                        "NM box bound for " + names_[i] + " is out of range");
            }
            check_nm_box_stability(d_, bounds_);
            break;
        }
    }
}

ThetaBox ThetaBox::around(const ParamPoint& theta, const std::vector<std::pair<std::string, Interval>>& free) {
    const Family family = family_of(theta);
    const std::size_t d = mixture_dim(theta);
    const auto names = coordinate_names(family, d);
    const auto coords = flatten(theta);
    std::vector<Interval> bounds;
    for (double c : coords) bounds.push_back({c, c});
    for (const auto& [name, iv] : free) bounds[index_of(names, name)] = iv;
    return ThetaBox(family, d, std::move(bounds));
}

std::vector<std::size_t> ThetaBox::free_axes() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bounds_.size(); ++i)
        if (bounds_[i].lo < bounds_[i].hi) out.push_back(i);
    return out;
}

bool ThetaBox::contains(const ParamPoint& theta) const {
    if (family_of(theta) != family_ || mixture_dim(theta) != d_) return false;
    const auto coords = flatten(theta);
    for (std::size_t i = 0; i < coords.size(); ++i) {
        if (coords[i] < bounds_[i].lo || coords[i] > bounds_[i].hi) return false;
    }
    return true;
}

const Interval& ThetaBox::bound(const std::string& name) const { return bounds_[index_of(names_, name)]; }

// ---------------------------------------------------------------------------
// Equivalence classes

EquivClassSpec identity_class() {
    EquivClassSpec spec;
    spec.generators.push_back({"identity", [](const ParamPoint& t) { return t; }});
    return spec;
}

EquivClassSpec permutation_class(std::size_t d) {
    EquivClassSpec spec;
    std::vector<std::size_t> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    do {
        std::string name = "perm";
        for (std::size_t p : perm) name += "-" + std::to_string(p + 1);
        spec.generators.push_back({name, [perm](const ParamPoint& t) -> ParamPoint {
                                       const auto* nm = std::get_if<ThetaNm>(&t);
                                       if (nm == nullptr || nm->dim() != perm.size()) return t;
                                       const std::size_t k = perm.size();
                                       ThetaNm out = *nm;
                                       for (std::size_t i = 0; i < k; ++i) {
                                           out.gamma[i] = nm->gamma[perm[i]];
                                           out.omega[i] = nm->omega[perm[i]];
                                           out.b[i] = nm->b[perm[i]];
                                           for (std::size_t j = 0; j < k; ++j)
                                               out.A[i * k + j] = nm->A[perm[i] * k + perm[j]];
                                       }
                                       return out;
                                   }});
    } while (std::next_permutation(perm.begin(), perm.end()));
    return spec;
}

EquivClassSpec default_class(Family family, std::size_t d) {
    return family == Family::Nm ? permutation_class(d) : identity_class();
}

std::vector<double> orbit_coordinates(const ParamPoint& theta) {
    if (const auto* nm = std::get_if<ThetaNm>(&theta)) {
        std::vector<double> out(nm->gamma);
        out.insert(out.end(), nm->omega.begin(), nm->omega.end());
        out.insert(out.end(), nm->A.begin(), nm->A.end());
        out.insert(out.end(), nm->b.begin(), nm->b.end());
        return out;
    }
    return flatten(theta);
}

std::vector<std::string> orbit_coordinate_names(Family family, std::size_t d) {
    auto names = coordinate_names(family, d);
    if (family == Family::Nm) names.insert(names.begin() + static_cast<std::ptrdiff_t>(d - 1), "gamma" + std::to_string(d));
    return names;
}

std::vector<ParamPoint> orbit(const ParamPoint& theta, const EquivClassSpec& spec) {
    std::vector<ParamPoint> out;
    out.reserve(spec.generators.size() + 1);
    out.push_back(theta);
    for (const auto& g : spec.generators) out.push_back(g.apply(theta));
    return out;
}

double class_distance(const ParamPoint& theta_hat, const ParamPoint& theta_star, const EquivClassSpec& spec) {
    require(family_of(theta_hat) == family_of(theta_star) && mixture_dim(theta_hat) == mixture_dim(theta_star),
            ErrorKind::InvalidParameter, "class_distance needs two points of the same model family");
    const auto star = orbit_coordinates(theta_star);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& candidate : orbit(theta_hat, spec)) {
        const auto c = orbit_coordinates(candidate);
        double worst = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            worst = std::max(worst, std::abs(c[i] - star[i]) / std::max(std::abs(star[i]), spec.relative_floor));
        }
        best = std::min(best, worst);
    }
    return best;
}

// ---------------------------------------------------------------------------
// Fitting

namespace {

class BoxObjective {
public:
    BoxObjective(const ModelSpec& model, std::span<const double> data, const ThetaBox& box)
        : model_(model), data_(data), box_(box), free_(box.free_axes()) {
        for (const auto& iv : box.bounds()) base_.push_back(iv.lo);
    }

    std::size_t dim() const noexcept { return free_.size(); }

    ParamPoint decode(const std::vector<double>& u) const {
        std::vector<double> coords = base_;
        for (std::size_t k = 0; k < free_.size(); ++k) {
            const auto& iv = box_.bounds()[free_[k]];
            const double t = std::clamp(u[k], 0.0, 1.0);
            coords[free_[k]] = t == 1.0 ? iv.hi : iv.lo + t * (iv.hi - iv.lo);
        }
        return unflatten(box_.family(), box_.dim(), coords);
    }

    double operator()(const ParamPoint& theta) const {
        try {
            validate(theta);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::InvalidParameter) return kNegInf;  // e.g. NM gamma off the simplex
            throw;
        }
        const double value = log_likelihood(model_, theta, data_);
        require(!std::isnan(value), ErrorKind::NumericFailure, "log-likelihood evaluated to NaN");
        return value;
    }

private:
    const ModelSpec& model_;
    std::span<const double> data_;
    const ThetaBox& box_;
    std::vector<std::size_t> free_;
    std::vector<double> base_;
};

std::vector<std::vector<double>> scan_design(std::size_t dim, const FitConfig& cfg) {
    const std::size_t res = std::max<std::size_t>(2, cfg.resolution);
    double total = 1.0;
    for (std::size_t k = 0; k < dim; ++k) total *= static_cast<double>(res);
    std::vector<std::vector<double>> design;
    if (total <= static_cast<double>(cfg.max_scan_points)) {
        const auto count = static_cast<std::size_t>(total);
        design.reserve(count);
        for (std::size_t idx = 0; idx < count; ++idx) {
            std::vector<double> u(dim);
            std::size_t rem = idx;
            for (std::size_t k = 0; k < dim; ++k) {
                u[k] = static_cast<double>(rem % res) / static_cast<double>(res - 1);
                rem /= res;
            }
            design.push_back(std::move(u));
        }
        return design;
    }
    design.reserve(cfg.max_scan_points);
    for (std::size_t idx = 0; idx < cfg.max_scan_points; ++idx) {
        std::vector<double> u(dim);
        for (std::size_t k = 0; k < dim; ++k) u[k] = halton(idx, k);
        design.push_back(std::move(u));
    }
    return design;
}

struct NelderMeadResult {
    std::vector<double> best;
    double best_value;
    std::size_t iterations;
    bool converged;
};

// Maximizes `f` on the unit cube starting from a simplex around `start`.
template <typename F>
NelderMeadResult nelder_mead(F&& f, std::vector<double> start, double start_value, double step, const FitConfig& cfg) {
    const std::size_t k = start.size();
    auto clip = [](std::vector<double> u) {
        for (double& v : u) v = std::clamp(v, 0.0, 1.0);
        return u;
    };
    std::vector<std::vector<double>> pts{start};
    std::vector<double> cost{-start_value};
    for (std::size_t i = 0; i < k; ++i) {
        auto v = start;
        v[i] += (v[i] + step <= 1.0) ? step : -step;
        v = clip(v);
        cost.push_back(-f(v));
        pts.push_back(std::move(v));
    }
    std::vector<std::size_t> order(k + 1);
    std::size_t it = 0;
    bool converged = false;
    for (; it < cfg.max_iterations; ++it) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cost[a] < cost[b]; });
        {
            std::vector<std::vector<double>> p2;
            std::vector<double> c2;
            for (std::size_t i : order) {
                p2.push_back(pts[i]);
                c2.push_back(cost[i]);
            }
            pts.swap(p2);
            cost.swap(c2);
        }
        double diameter = 0.0;
        for (std::size_t i = 1; i <= k; ++i)
            for (std::size_t j = 0; j < k; ++j) diameter = std::max(diameter, std::abs(pts[i][j] - pts[0][j]));
        const double spread = cost[k] - cost[0];
        if (std::isfinite(cost[k]) && spread <= cfg.ftol * std::max(1.0, std::abs(cost[0])) && diameter <= cfg.xtol) {
            converged = true;
            break;
        }
        std::vector<double> centroid(k, 0.0);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) centroid[j] += pts[i][j] / static_cast<double>(k);
        auto along = [&](double t) {
            std::vector<double> v(k);
            for (std::size_t j = 0; j < k; ++j) v[j] = centroid[j] + t * (pts[k][j] - centroid[j]);
            return clip(v);
        };
        auto reflected = along(-1.0);
        const double fr = -f(reflected);
        if (fr < cost[0]) {
            auto expanded = along(-2.0);
            const double fe = -f(expanded);
            if (fe < fr) {
                pts[k] = std::move(expanded);
                cost[k] = fe;
            } else {
                pts[k] = std::move(reflected);
                cost[k] = fr;
            }
            continue;
        }
        if (fr < cost[k - 1]) {
            pts[k] = std::move(reflected);
            cost[k] = fr;
            continue;
        }
        const bool outside = fr < cost[k];
        auto contracted = along(outside ? -0.5 : 0.5);
        const double fc = -f(contracted);
        if (fc < std::min(fr, cost[k])) {
            pts[k] = std::move(contracted);
            cost[k] = fc;
            continue;
        }
        for (std::size_t i = 1; i <= k; ++i) {
            for (std::size_t j = 0; j < k; ++j) pts[i][j] = pts[0][j] + 0.5 * (pts[i][j] - pts[0][j]);
            cost[i] = -f(pts[i]);
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(cost.begin(), cost.end()) - cost.begin());
    return {pts[best], -cost[best], it, converged};
}

}  // namespace

FitResult fit_mle(const ModelSpec& model, std::span<const double> data, const ThetaBox& box, const FitConfig& cfg) {
    require(data.size() >= cfg.min_n, ErrorKind::InsufficientData,
            "fit needs at least " + std::to_string(cfg.min_n) + " observations, got " + std::to_string(data.size()));
    require(box.family() == model.family, ErrorKind::InvalidParameter, "box family does not match the model");
    const BoxObjective objective(model, data, box);
    const std::size_t dim = objective.dim();
    const auto design = scan_design(dim, cfg);

    std::vector<double> values(design.size());
    std::vector<ParamPoint> thetas(design.size());
    parallel_for(design.size(), cfg.workers, [&](std::size_t i) {
        thetas[i] = objective.decode(design[i]);
        values[i] = objective(thetas[i]);
    });

    FitResult result;
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    require(values[best] > kNegInf, ErrorKind::NumericFailure, "no feasible point found in the scan");
    result.surface_samples.reserve(design.size());
    for (std::size_t i = 0; i < design.size(); ++i) result.surface_samples.push_back({thetas[i], values[i]});

    const double step = 1.0 / static_cast<double>(std::max<std::size_t>(2, cfg.resolution) - 1);
    auto f = [&](const std::vector<double>& u) { return objective(objective.decode(u)); };
    const auto nm = nelder_mead(f, design[best], values[best], step, cfg);

    result.theta_hat = objective.decode(nm.best);
    result.loglik_at_hat = nm.best_value;
    result.refine_iterations = nm.iterations;
    result.converged = nm.converged;
    return result;
}

// ---------------------------------------------------------------------------
// Kullback-Leibler profile

namespace {

// ln p^theta(Y_k | past) for k in [first, first + n), each evaluated by running
// psi over the `window` observations before k from the conditioning state.
std::vector<double> truncated_terms(const ModelSpec& model, const ParamPoint& theta, std::span<const double> y,
                                    std::size_t first, std::size_t n, std::size_t window) {
    const odm::OdmKernel kernel(model.odm, theta);
    const State start = model.conditioning_state();
    kernel.check_state(start);
    std::vector<double> terms(n);
    State x(start.size());
    for (std::size_t t = 0; t < n; ++t) {
        const std::size_t k = first + t;
        std::copy(start.begin(), start.end(), x.begin());
        for (std::size_t j = k - window; j < k; ++j) kernel.step(x, y[j]);
        terms[t] = kernel.log_emission(x, y[k]);
    }
    return terms;
}

}  // namespace

std::vector<ProfileEntry> kl_profile(const ModelSpec& model, const ParamPoint& theta_star,
                                     const std::vector<ParamPoint>& theta_grid, const KlConfig& cfg,
                                     const RngStream& rng) {
    require(cfg.n >= 1, ErrorKind::InvalidParameter, "KL profile needs n >= 1");
    require(cfg.truncation >= 2, ErrorKind::InvalidParameter, "KL profile needs truncation m >= 2");
    require(family_of(theta_star) == model.family, ErrorKind::InvalidParameter, "theta_star does not match the model");
    for (const auto& theta : theta_grid) {
        require(family_of(theta) == model.family, ErrorKind::InvalidParameter, "grid point does not match the model");
    }
    if (model.family != Family::Hmm1) {
        auto check = [&](const ParamPoint& theta) {
            require(odm::stability_check(model.odm, theta).stable, ErrorKind::Instability,
                    "KL profile point fails the stability condition");
        };
        check(theta_star);
        for (const auto& theta : theta_grid) check(theta);
    } else {
        validate(theta_star);
        for (const auto& theta : theta_grid) validate(theta);
    }

    const std::size_t m = cfg.truncation;
    const std::size_t half = m / 2;
    const auto path = simulate_stationary(model, theta_star, m + cfg.n, cfg.burn, rng.substream(StreamPurpose::Replicate));
    const auto& y = path.observations;

    // Per-term log predictive densities for truncation m (terms) and m/2 (terms_half),
    // aligned on the same target indices.
    struct Terms {
        std::vector<double> full;
        std::vector<double> half;
    };
    auto evaluate = [&](const ParamPoint& theta) {
        Terms out;
        if (model.family == Family::Hmm1) {
            const hmm::GridModel grid_model(std::get<ThetaHmm>(theta), model.noise, hmm::Grid(model.grid));
            const auto inc = grid_model.log_increments(model.xi, y);
            out.full.assign(inc.begin() + static_cast<std::ptrdiff_t>(m), inc.end());
            out.half.assign(inc.begin() + static_cast<std::ptrdiff_t>(half),
                            inc.begin() + static_cast<std::ptrdiff_t>(half + cfg.n));
        } else {
            out.full = truncated_terms(model, theta, y, m, cfg.n, m);
            out.half = truncated_terms(model, theta, y, m, cfg.n, half);
        }
        return out;
    };

    const Terms star = evaluate(theta_star);
    std::vector<ProfileEntry> profile(theta_grid.size());
    parallel_for(theta_grid.size(), cfg.workers, [&](std::size_t i) {
        const Terms terms = evaluate(theta_grid[i]);
        std::vector<double> diff(cfg.n);
        std::vector<double> diff_half(cfg.n);
        for (std::size_t t = 0; t < cfg.n; ++t) {
            diff[t] = star.full[t] - terms.full[t];
            diff_half[t] = star.half[t] - terms.half[t];
        }
        const auto est = batch_means(diff, cfg.batches);
        const auto est_half = batch_means(diff_half, cfg.batches);
        profile[i] = {theta_grid[i], est.mean, est.standard_error, est.mean - est_half.mean};
    });
    return profile;
}

bool argmax_check(const std::vector<ProfileEntry>& profile, const ParamPoint& theta_star, const EquivClassSpec& spec,
                  const std::vector<double>& tolerance) {
    require(!profile.empty(), ErrorKind::InsufficientData, "argmax_check needs a nonempty profile");
    double lowest = std::numeric_limits<double>::infinity();
    for (const auto& e : profile) lowest = std::min(lowest, e.estimate);
    const auto targets = orbit(theta_star, spec);
    for (const auto& e : profile) {
        if (e.estimate != lowest) continue;
        const auto c = orbit_coordinates(e.theta);
        require(tolerance.size() == c.size(), ErrorKind::DimensionMismatch,
                "argmax_check tolerance must have one entry per orbit coordinate");
        bool near = false;
        for (const auto& target : targets) {
            const auto t = orbit_coordinates(target);
            bool inside = true;
            for (std::size_t i = 0; i < c.size() && inside; ++i) {
                // The slack absorbs rounding when the tolerance is exactly a grid spacing.
                const double slack = 1e-12 * std::max({1.0, std::abs(c[i]), std::abs(t[i])});
                inside = std::abs(c[i] - t[i]) <= tolerance[i] + slack;
            }
            near = near || inside;
        }
        if (!near) return false;
    }
    return true;
}

bool argmax_check(const std::vector<ProfileEntry>& profile, const ParamPoint& theta_star, const EquivClassSpec& spec,
                  double tolerance) {
    return argmax_check(profile, theta_star, spec,
                        std::vector<double>(orbit_coordinates(theta_star).size(), tolerance));
}

// ---------------------------------------------------------------------------
// Consistency experiments

ConsistencyResult consistency_curve(const ModelSpec& model, const ParamPoint& theta_star, const ThetaBox& box,
                                    const EquivClassSpec& spec, const ConsistencyConfig& cfg, const RngStream& rng) {
    require(!cfg.n_list.empty(), ErrorKind::InvalidParameter, "consistency curve needs at least one length");
    require(std::is_sorted(cfg.n_list.begin(), cfg.n_list.end()) &&
                std::adjacent_find(cfg.n_list.begin(), cfg.n_list.end()) == cfg.n_list.end(),
            ErrorKind::InvalidParameter, "n_list must be strictly increasing");
    require(cfg.replicates >= 3, ErrorKind::InvalidParameter, "consistency curve needs at least 3 replicates");
    require(box.contains(theta_star), ErrorKind::InvalidParameter, "theta_star lies outside the box");

    const std::size_t tasks = cfg.n_list.size() * cfg.replicates;
    ConsistencyResult result;
    result.replicates.resize(tasks);
    FitConfig fit_cfg = cfg.fit;
    if (cfg.workers > 1) fit_cfg.workers = 1;

    parallel_for(tasks, cfg.workers, [&](std::size_t task) {
        const std::size_t i = task / cfg.replicates;
        const std::size_t j = task % cfg.replicates;
        ReplicateRecord& rec = result.replicates[task];
        rec.n = cfg.n_list[i];
        rec.replicate = j;
        try {
            const RngStream stream = rng.substream(i).substream(j);
            const auto path = simulate_stationary(model, theta_star, rec.n, cfg.burn, stream);
            const auto fit = fit_mle(model, path.observations, box, fit_cfg);
            rec.theta_hat = fit.theta_hat;
            rec.loglik = fit.loglik_at_hat;
            rec.delta = class_distance(fit.theta_hat, theta_star, spec);
            rec.ok = std::isfinite(rec.delta);
            if (!rec.ok) rec.error = "non-finite class distance";
        } catch (const Error& e) {
            rec.ok = false;
            rec.error = std::string(to_string(e.kind())) + ": " + e.what();
        }
    });

    for (std::size_t i = 0; i < cfg.n_list.size(); ++i) {
        CurveRow row;
        row.n = cfg.n_list[i];
        std::vector<double> deltas;
        for (std::size_t j = 0; j < cfg.replicates; ++j) {
            const auto& rec = result.replicates[i * cfg.replicates + j];
            if (rec.ok) deltas.push_back(rec.delta);
            else ++row.failures;
        }
        if (deltas.empty()) {
            row.mean_delta = row.q10 = row.q50 = row.q90 = std::numeric_limits<double>::quiet_NaN();
        } else {
            row.mean_delta = std::accumulate(deltas.begin(), deltas.end(), 0.0) / static_cast<double>(deltas.size());
            row.q10 = quantile(deltas, 0.1);
            row.q50 = quantile(deltas, 0.5);
            row.q90 = quantile(deltas, 0.9);
        }
        result.rows.push_back(row);
    }
    return result;
}

}  // namespace pomc::estimate
