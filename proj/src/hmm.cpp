#include "pomc/hmm.hpp"

#include "pomc/error.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace pomc::hmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Plain-double forms of r, F_r and h for inner loops; parameters are validated
// once by the callers.
struct Densities {
    double alpha;
    double scale;
    double log_r0;  // ln(alpha / (2 s))
    double a;
    double m;
    double sigma;
    double log_h0;  // -ln(sigma) - ln(2 pi)/2

    Densities(const ThetaHmm& theta, const NoisePair& noise)
        : alpha(noise.state.alpha),
          scale(noise.state.scale),
          log_r0(std::log(noise.state.alpha / (2.0 * noise.state.scale))),
          a(theta.a),
          m(theta.m),
          sigma(noise.observation.sigma),
          log_h0(-std::log(noise.observation.sigma) - 0.5 * std::log(2.0 * std::numbers::pi)) {}

    double r(double u) const { return std::exp(log_r0 - (alpha + 1.0) * std::log1p(std::abs(u) / scale)); }
    double cdf(double u) const {
        const double tail = 0.5 * std::exp(-alpha * std::log1p(std::abs(u) / scale));
        return u >= 0.0 ? 1.0 - tail : tail;
    }
    double log_g(double x, double y) const {
        const double z = (y - a * x) / sigma;
        return log_h0 - 0.5 * z * z;
    }
    double g(double x, double y) const { return std::exp(log_g(x, y)); }
};

void check_theta(const ThetaHmm& theta) { validate(ParamPoint(theta)); }

std::vector<double> grid_initial_weights(const Grid& grid, const InitialLaw& xi) {
    std::vector<double> w(grid.size(), 0.0);
    if (xi.kind == InitialLaw::Kind::Dirac) {
        require(xi.value >= 0.0, ErrorKind::InvalidState, "initial point must be nonnegative");
        require(xi.value <= grid.spec().x_max, ErrorKind::InvalidState, "initial point lies beyond the grid x_max");
        w[grid.nearest(xi.value)] = 1.0;
        return w;
    }
    require(xi.value > 0.0, ErrorKind::InvalidParameter, "uniform initial law needs a positive upper bound");
    const auto edges = grid.edges();
    w[0] = 1.0;
    for (std::size_t i = 1; i < w.size(); ++i) {
        w[i] = std::max(0.0, std::min(edges[i], xi.value) - edges[i - 1]);
    }
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& v : w) v /= total;
    return w;
}

}  // namespace

void validate(const NoisePair& noise) {
    pomc::validate(NoiseSpec(noise.state));
    pomc::validate(NoiseSpec(noise.observation));
}

GridSpec default_grid(double m_upper) {
    GridSpec spec;
    spec.x_max = 20.0 * m_upper;
    return spec;
}

Grid::Grid(const GridSpec& spec) : spec_(spec) {
    require(spec.x_max > 0.0 && std::isfinite(spec.x_max), ErrorKind::InvalidParameter, "grid x_max must be positive");
    require(spec.stretch >= 1.0, ErrorKind::InvalidParameter, "grid stretch must be >= 1");
    const std::size_t n = spec.n_cells;
    edges_.resize(n + 1);
    edges_[0] = 0.0;
    const bool geometric = spec.spacing == Spacing::Geometric && spec.stretch > 1.0 && n > 1;
    if (geometric) {
        const double ratio = std::pow(spec.stretch, 1.0 / static_cast<double>(n - 1));
        const double first = spec.x_max * (ratio - 1.0) / (std::pow(ratio, static_cast<double>(n)) - 1.0);
        double width = first;
        for (std::size_t j = 1; j <= n; ++j) {
            edges_[j] = edges_[j - 1] + width;
            width *= ratio;
        }
    } else {
        for (std::size_t j = 1; j <= n; ++j) {
            edges_[j] = spec.x_max * static_cast<double>(j) / static_cast<double>(n);
        }
    }
    if (n > 0) edges_[n] = spec.x_max;
    nodes_.reserve(n + 1);
    mu_.reserve(n + 1);
    nodes_.push_back(0.0);
    mu_.push_back(1.0);
    for (std::size_t j = 1; j <= n; ++j) {
        nodes_.push_back(0.5 * (edges_[j - 1] + edges_[j]));
        mu_.push_back(edges_[j] - edges_[j - 1]);
    }
}

std::size_t Grid::nearest(double x) const {
    const auto it = std::lower_bound(nodes_.begin(), nodes_.end(), x);
    if (it == nodes_.begin()) return 0;
    if (it == nodes_.end()) return nodes_.size() - 1;
    const auto hi = static_cast<std::size_t>(it - nodes_.begin());
    return (x - nodes_[hi - 1] <= nodes_[hi] - x) ? hi - 1 : hi;
}

LogDensity q_logdensity(const ThetaHmm& theta, const SymmetricPareto& noise, double x, double x_prime) {
    check_theta(theta);
    require(x >= 0.0 && x_prime >= 0.0, ErrorKind::InvalidState, "HMM states must be nonnegative");
    if (x_prime > 0.0) {
        return pareto_sym_logpdf(x_prime - x + theta.m, noise.alpha, noise.scale);
    }
    return LogDensity(std::log(pareto_sym_cdf(theta.m - x, noise.alpha, noise.scale)));
}

LogDensity g_logdensity(const ThetaHmm& theta, const Gaussian& noise, double x, double y) {
    check_theta(theta);
    require(x >= 0.0, ErrorKind::InvalidState, "HMM states must be nonnegative");
    return gauss_logpdf(y - theta.a * x, noise.sigma);
}

HmmPath simulate_hmm(const ThetaHmm& theta, const NoisePair& noise, double x0, std::size_t n, const RngStream& rng) {
    check_theta(theta);
    validate(noise);
    require(x0 >= 0.0, ErrorKind::InvalidState, "initial state must be nonnegative");
    require(n >= 1, ErrorKind::InvalidParameter, "simulation length must be at least 1");
    RngStream u_rng = rng.substream(StreamPurpose::State);
    RngStream v_rng = rng.substream(StreamPurpose::Observation);
    const NoiseSpec u_noise = noise.state;
    const NoiseSpec v_noise = noise.observation;

    HmmPath path;
    path.states.values.reserve(n);
    path.observations.reserve(n);
    double x = x0;
    for (std::size_t k = 0; k < n; ++k) {
        if (k > 0) x = std::max(0.0, x + sample(u_noise, u_rng) - theta.m);
        path.states.values.push_back(x);
        path.observations.push_back(theta.a * x + sample(v_noise, v_rng));
    }
    return path;
}

// ---------------------------------------------------------------------------
// Grid filter

GridModel::GridModel(const ThetaHmm& theta, const NoisePair& noise, const Grid& grid)
    : theta_(theta), noise_(noise), grid_(grid) {
    check_theta(theta);
    validate(noise);
    const Densities dens(theta, noise);
    const auto nodes = grid_.nodes();
    const auto mu = grid_.mu_weights();
    const std::size_t s = grid_.size();
    transition_.resize(s * s);
    for (std::size_t i = 0; i < s; ++i) {
        double* row = transition_.data() + i * s;
        row[0] = dens.cdf(theta.m - nodes[i]);
        for (std::size_t j = 1; j < s; ++j) {
            row[j] = dens.r(nodes[j] - nodes[i] + theta.m) * mu[j];
        }
    }
    scratch_.resize(s);
    factor_.resize(s);
}

std::vector<double> GridModel::initial_weights(const InitialLaw& xi) const { return grid_initial_weights(grid_, xi); }

double GridModel::correct(std::vector<double>& weights, double y) const {
    const Densities dens(theta_, noise_);
    const auto nodes = grid_.nodes();
    const std::size_t s = grid_.size();
    double top = kNegInf;
    for (std::size_t j = 0; j < s; ++j) {
        factor_[j] = dens.log_g(nodes[j], y);
        top = std::max(top, factor_[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < s; ++j) {
        factor_[j] = std::exp(factor_[j] - top);
        total += weights[j] * factor_[j];
    }
    if (total > 1e-290 && std::isfinite(total)) {
        for (std::size_t j = 0; j < s; ++j) weights[j] *= factor_[j] / total;
        return top + std::log(total);
    }
    // The predictive mass sits where g underflows; redo the product in logs.
    double best = kNegInf;
    for (std::size_t j = 0; j < s; ++j) {
        factor_[j] = (weights[j] > 0.0 ? std::log(weights[j]) : kNegInf) + dens.log_g(nodes[j], y);
        best = std::max(best, factor_[j]);
    }
    if (best == kNegInf) {
        fail(ErrorKind::NumericFailure, "filter correction lost all mass at observation " + std::to_string(y));
    }
    total = 0.0;
    for (std::size_t j = 0; j < s; ++j) {
        weights[j] = std::exp(factor_[j] - best);
        total += weights[j];
    }
    for (double& w : weights) w /= total;
    return best + std::log(total);
}

double GridModel::step(std::vector<double>& weights, double y) const {
    const std::size_t s = grid_.size();
    std::fill(scratch_.begin(), scratch_.end(), 0.0);
    for (std::size_t i = 0; i < s; ++i) {
        const double wi = weights[i];
        if (wi == 0.0) continue;
        const double* row = transition_.data() + i * s;
        for (std::size_t j = 0; j < s; ++j) scratch_[j] += wi * row[j];
    }
    weights.swap(scratch_);
    return correct(weights, y);
}

std::vector<double> GridModel::log_increments(const InitialLaw& xi, std::span<const double> y_path) const {
    require(!y_path.empty(), ErrorKind::EmptyPath, "grid likelihood needs at least one observation");
    std::vector<double> w = initial_weights(xi);
    std::vector<double> out;
    out.reserve(y_path.size());
    out.push_back(correct(w, y_path[0]));
    for (std::size_t k = 1; k < y_path.size(); ++k) out.push_back(step(w, y_path[k]));
    return out;
}

double GridModel::truncation_mass() const {
    const std::size_t s = grid_.size();
    double worst = 0.0;
    for (std::size_t i = 0; i < s; ++i) {
        const double* row = transition_.data() + i * s;
        const double mass = std::accumulate(row, row + s, 0.0);
        worst = std::max(worst, std::abs(1.0 - mass));
    }
    return worst;
}

namespace {

FilterState to_state(const std::vector<double>& w, double accum) {
    FilterState out;
    out.log_weights.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) out.log_weights[i] = w[i] > 0.0 ? std::log(w[i]) : kNegInf;
    out.log_normalizer_accum = accum;
    return out;
}

std::vector<double> to_linear(const FilterState& state, std::size_t expected) {
    require(state.log_weights.size() == expected, ErrorKind::DimensionMismatch,
            "filter state does not match the grid size");
    std::vector<double> w(expected);
    for (std::size_t i = 0; i < expected; ++i) w[i] = std::exp(state.log_weights[i]);
    return w;
}

}  // namespace

FilterState filter_init(const Grid& grid, const InitialLaw& xi) { return to_state(grid_initial_weights(grid, xi), 0.0); }

FilterState filter_correct(const ThetaHmm& theta, const NoisePair& noise, const Grid& grid, const FilterState& state,
                           double y) {
    const GridModel model(theta, noise, grid);
    auto w = to_linear(state, grid.size());
    const double inc = model.correct(w, y);
    return to_state(w, state.log_normalizer_accum + inc);
}

FilterState filter_step(const ThetaHmm& theta, const NoisePair& noise, const Grid& grid, const FilterState& state,
                        double /*y_prev*/, double y) {
    const GridModel model(theta, noise, grid);
    auto w = to_linear(state, grid.size());
    const double inc = model.step(w, y);
    return to_state(w, state.log_normalizer_accum + inc);
}

double loglik_grid(const ThetaHmm& theta, const NoisePair& noise, const GridSpec& grid, const InitialLaw& xi,
                   std::span<const double> y_path) {
    require(!y_path.empty(), ErrorKind::EmptyPath, "grid likelihood needs at least one observation");
    const GridModel model(theta, noise, Grid(grid));
    const auto inc = model.log_increments(xi, y_path);
    return std::accumulate(inc.begin(), inc.end(), 0.0) / static_cast<double>(y_path.size());
}

std::vector<double> filter_tv_gap(const ThetaHmm& theta, const NoisePair& noise, const GridSpec& grid,
                                  const InitialLaw& xi1, const InitialLaw& xi2, std::span<const double> y_path) {
    const GridModel model(theta, noise, Grid(grid));
    auto w1 = model.initial_weights(xi1);
    auto w2 = model.initial_weights(xi2);
    std::vector<double> gaps;
    gaps.reserve(y_path.size());
    auto tv = [&] {
        double total = 0.0;
        for (std::size_t i = 0; i < w1.size(); ++i) total += std::abs(w1[i] - w2[i]);
        return 0.5 * total;
    };
    for (std::size_t k = 0; k < y_path.size(); ++k) {
        if (k == 0) {
            model.correct(w1, y_path[0]);
            model.correct(w2, y_path[0]);
        } else {
            model.step(w1, y_path[k]);
            model.step(w2, y_path[k]);
        }
        gaps.push_back(tv());
    }
    return gaps;
}

// ---------------------------------------------------------------------------
// Quadrature oracle

namespace {

class NestedQuadrature {
public:
    NestedQuadrature(const ThetaHmm& theta, const NoisePair& noise, std::span<const double> y,
                     const QuadratureSpec& quad)
        : dens_(theta, noise), y_(y), quad_(quad) {}

    // I_k(x) = int q(x, x') g(x'; y_k) I_{k+1}(x') mu(dx'), with I_n = 1.
    double tail(std::size_t k, double x) const {
        if (k == y_.size()) return 1.0;
        const double m = dens_.m;
        const double atom = dens_.cdf(m - x) * dens_.g(0.0, y_[k]) * tail(k + 1, 0.0);
        auto f = [this, k, x, m](double xp) { return dens_.r(xp - x + m) * dens_.g(xp, y_[k]) * tail(k + 1, xp); };
        return atom + integrate(f, 0.0, std::numeric_limits<double>::infinity(), {x - m, m});
    }

    double from_point(double x0) const { return dens_.g(x0, y_[0]) * tail(1, x0); }

    double from_uniform(double upper) const {
        auto f = [this](double x0) { return from_point(x0); };
        const double continuous = integrate(f, 0.0, upper, {dens_.m});
        return (from_point(0.0) + continuous) / (1.0 + upper);
    }

    // n = 2, uniform initial law, with x_1 as the outer variable.
    double from_uniform_reversed(double upper) const {
        const double m = dens_.m;
        const double y0 = y_[0];
        const double y1 = y_[1];
        // Mass arriving at x_1 from the initial law, as a density w.r.t. mu.
        auto arriving = [this, upper, m, y0](double x1) {
            if (x1 == 0.0) {
                auto inner = [this, m, y0](double x0) { return dens_.g(x0, y0) * dens_.cdf(m - x0); };
                return dens_.g(0.0, y0) * dens_.cdf(m) + integrate(inner, 0.0, upper, {m});
            }
            auto inner = [this, m, y0, x1](double x0) { return dens_.g(x0, y0) * dens_.r(x1 - x0 + m); };
            return dens_.g(0.0, y0) * dens_.r(x1 + m) + integrate(inner, 0.0, upper, {x1 + m});
        };
        const double atom = arriving(0.0) * dens_.g(0.0, y1);
        auto outer = [&](double x1) { return arriving(x1) * dens_.g(x1, y1); };
        const double continuous =
            integrate(outer, 0.0, std::numeric_limits<double>::infinity(), {upper - m, m});
        return (atom + continuous) / (1.0 + upper);
    }

private:
    template <typename F>
    double integrate(F f, double lo, double hi, std::initializer_list<double> breaks) const {
        std::vector<double> cuts{lo};
        for (double b : breaks) {
            if (b > lo && b < hi) cuts.push_back(b);
        }
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        cuts.push_back(hi);
        double total = 0.0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, cuts[i], cuts[i + 1],
                                                                                   quad_.max_depth, quad_.tolerance);
        }
        return total;
    }

    Densities dens_;
    std::span<const double> y_;
    QuadratureSpec quad_;
};

}  // namespace

double loglik_bruteforce(const ThetaHmm& theta, const NoisePair& noise, const InitialLaw& xi,
                         std::span<const double> y_path, const QuadratureSpec& quad) {
    check_theta(theta);
    validate(noise);
    require(!y_path.empty(), ErrorKind::EmptyPath, "brute-force likelihood needs at least one observation");
    require(y_path.size() <= 3, ErrorKind::InvalidParameter, "brute-force likelihood supports n <= 3 only");
    const NestedQuadrature quadrature(theta, noise, y_path, quad);
    double mass = 0.0;
    if (xi.kind == InitialLaw::Kind::Dirac) {
        require(xi.value >= 0.0, ErrorKind::InvalidState, "initial point must be nonnegative");
        mass = quadrature.from_point(xi.value);
    } else {
        require(xi.value > 0.0, ErrorKind::InvalidParameter, "uniform initial law needs a positive upper bound");
        mass = (quad.reverse_order && y_path.size() == 2) ? quadrature.from_uniform_reversed(xi.value)
                                                          : quadrature.from_uniform(xi.value);
    }
    return std::log(mass) / static_cast<double>(y_path.size());
}

// ---------------------------------------------------------------------------
// Particle oracle

ParticleResult particle_filter_loglik(const ThetaHmm& theta, const NoisePair& noise, const InitialLaw& xi,
                                      std::span<const double> y_path, std::size_t n_particles, const RngStream& rng,
                                      std::size_t islands) {
    check_theta(theta);
    validate(noise);
    require(!y_path.empty(), ErrorKind::EmptyPath, "particle filter needs at least one observation");
    require(n_particles >= 100, ErrorKind::InvalidParameter, "particle filter needs N >= 100");
    if (islands == 0) islands = std::clamp<std::size_t>(n_particles / 1000, 2, 20);
    require(islands <= n_particles / 2, ErrorKind::InvalidParameter, "too many islands for the particle count");

    const Densities dens(theta, noise);
    const NoiseSpec u_noise = noise.state;
    const std::size_t n = y_path.size();

    ParticleResult result;
    result.islands = islands;
    result.ess.assign(n, 0.0);
    result.min_ess = std::numeric_limits<double>::infinity();
    std::vector<double> island_log_z(islands, 0.0);

    for (std::size_t b = 0; b < islands; ++b) {
        const std::size_t size = n_particles / islands + (b < n_particles % islands ? 1 : 0);
        const RngStream island = rng.substream(b);
        RngStream init_rng = island.substream(StreamPurpose::Initial);
        RngStream move_rng = island.substream(StreamPurpose::State);
        RngStream resample_rng = island.substream(StreamPurpose::Resampling);

        std::vector<double> x(size);
        for (auto& xi_draw : x) {
            if (xi.kind == InitialLaw::Kind::Dirac) {
                xi_draw = xi.value;
            } else {
                const double atom_prob = 1.0 / (1.0 + xi.value);
                xi_draw = init_rng.uniform() < atom_prob ? 0.0 : xi.value * init_rng.uniform();
            }
        }
        std::vector<double> log_w(size);
        std::vector<double> cumulative(size);
        std::vector<double> uniforms(size);
        std::vector<double> next(size);
        double log_z = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (k > 0) {
                // Multinomial resampling by inversion of sorted uniforms.
                for (auto& u : uniforms) u = resample_rng.uniform();
                std::sort(uniforms.begin(), uniforms.end());
                std::size_t src = 0;
                for (std::size_t i = 0; i < size; ++i) {
                    while (src + 1 < size && cumulative[src] < uniforms[i]) ++src;
                    next[i] = x[src];
                }
                for (std::size_t i = 0; i < size; ++i) {
                    x[i] = std::max(0.0, next[i] + sample(u_noise, move_rng) - theta.m);
                }
            }
            double top = kNegInf;
            for (std::size_t i = 0; i < size; ++i) {
                log_w[i] = dens.log_g(x[i], y_path[k]);
                top = std::max(top, log_w[i]);
            }
            double sum = 0.0;
            double sum_sq = 0.0;
            for (std::size_t i = 0; i < size; ++i) {
                const double w = std::exp(log_w[i] - top);
                sum += w;
                sum_sq += w * w;
                cumulative[i] = sum;
            }
            for (auto& c : cumulative) c /= sum;
            log_z += top + std::log(sum / static_cast<double>(size));
            const double ess = sum * sum / sum_sq;
            result.ess[k] += ess;
            result.min_ess = std::min(result.min_ess, ess);
        }
        island_log_z[b] = log_z;
    }

    const double log_mean = log_sum_exp(island_log_z) - std::log(static_cast<double>(islands));
    double sq = 0.0;
    for (double lz : island_log_z) {
        const double ratio = std::exp(lz - log_mean);
        sq += (ratio - 1.0) * (ratio - 1.0);
    }
    const double sd = std::sqrt(sq / static_cast<double>(islands - 1));
    result.loglik = log_mean / static_cast<double>(n);
    result.standard_error = sd / std::sqrt(static_cast<double>(islands)) / static_cast<double>(n);
    result.degenerate = result.min_ess < 10.0;
    return result;
}

}  // namespace pomc::hmm
