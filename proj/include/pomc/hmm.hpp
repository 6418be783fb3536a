#pragma once

#include "pomc/densities.hpp"
#include "pomc/params.hpp"
#include "pomc/paths.hpp"
#include "pomc/rng.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace pomc::hmm {

/// Known noise hyperparameters: U ~ symmetric Pareto (state), V ~ N(0, sigma^2).
struct NoisePair {
    SymmetricPareto state{3.5, 1.0};
    Gaussian observation{1.0};
};

void validate(const NoisePair& noise);

enum class Spacing { Uniform, Geometric };

/// Discretization of X = [0, x_max] for the dominating measure
/// mu = Lebesgue + Dirac at 0.
///
/// Node 0 is the atom at 0 with mu-weight exactly 1. Nodes 1..n_cells are the
/// midpoints of cells partitioning (0, x_max], each weighted by its width.
/// Geometric spacing grows cell widths by a constant ratio so that the last
/// cell is `stretch` times wider than the first. n_cells = 0 is the atom-only grid.
struct GridSpec {
    double x_max = 40.0;
    std::size_t n_cells = 400;
    Spacing spacing = Spacing::Geometric;
    double stretch = 30.0;
};

/// Default grid for a parameter box whose m-range tops out at m_upper.
GridSpec default_grid(double m_upper);

class Grid {
public:
    explicit Grid(const GridSpec& spec);

    const GridSpec& spec() const noexcept { return spec_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    std::span<const double> nodes() const noexcept { return nodes_; }
    std::span<const double> mu_weights() const noexcept { return mu_; }
    /// Cell edges e_0 = 0 < e_1 < ... < e_n = x_max.
    std::span<const double> edges() const noexcept { return edges_; }

    /// Index of the node nearest to x (ties resolve to the lower index).
    std::size_t nearest(double x) const;

private:
    GridSpec spec_;
    std::vector<double> nodes_;
    std::vector<double> mu_;
    std::vector<double> edges_;
};

/// Initial law xi of X_0: a point mass, or the mu-uniform law on [0, upper]
/// (atom and Lebesgue part weighted 1 : upper). On a grid, each cell receives
/// its overlap with [0, upper] and the atom receives 1, then the weights are normalized.
struct InitialLaw {
    enum class Kind { Dirac, Uniform };
    Kind kind = Kind::Dirac;
    double value = 0.0;

    static InitialLaw dirac(double x) { return {Kind::Dirac, x}; }
    static InitialLaw uniform(double upper) { return {Kind::Uniform, upper}; }
};

/// Normalized filter on the grid nodes plus the running log of the P-block mass.
struct FilterState {
    std::vector<double> log_weights;
    double log_normalizer_accum = 0.0;
};

/// Density of Q(x; .) w.r.t. mu: r(x' - x + m) for x' > 0, F_r(m - x) at x' = 0.
LogDensity q_logdensity(const ThetaHmm& theta, const SymmetricPareto& noise, double x, double x_prime);

/// g(x; y) = h(y - a x).
LogDensity g_logdensity(const ThetaHmm& theta, const Gaussian& noise, double x, double y);

struct HmmPath {
    StatePath states;              // X_0 .. X_{n-1}
    ObservationPath observations;  // Y_0 .. Y_{n-1}
};

/// X_0 = x0, X_k = (X_{k-1} + U_k - m)^+, Y_k = a X_k + V_k, with U and V on
/// separate substreams of `rng`.
HmmPath simulate_hmm(const ThetaHmm& theta, const NoisePair& noise, double x0, std::size_t n, const RngStream& rng);

FilterState filter_init(const Grid& grid, const InitialLaw& xi);

/// Bayes correction by g(.; y) alone; consumes Y_0 at the start of a P-block.
FilterState filter_correct(const ThetaHmm& theta, const NoisePair& noise, const Grid& grid, const FilterState& state,
                           double y);

/// One prediction + correction: w'_j propto sum_i w_i q(x_i, x_j) mu_j g(x_j; y).
/// `y_prev` is unused for the HMM (the kernel does not depend on it).
FilterState filter_step(const ThetaHmm& theta, const NoisePair& noise, const Grid& grid, const FilterState& state,
                        double y_prev, double y);

/// Transition matrix T_ij = q(x_i, x_j) mu_j and emission evaluation on a
/// fixed grid. Shared by the likelihood, forgetting and KL routines. Holds
/// scratch buffers, so one instance must not be used from two threads at once.
class GridModel {
public:
    GridModel(const ThetaHmm& theta, const NoisePair& noise, const Grid& grid);

    const Grid& grid() const noexcept { return grid_; }
    std::span<const double> transition() const noexcept { return transition_; }

    /// Initial weights (sum to 1) of xi on the grid.
    std::vector<double> initial_weights(const InitialLaw& xi) const;

    /// Corrects normalized linear weights in place by g(.; y); returns the log mass
    /// before normalization.
    double correct(std::vector<double>& weights, double y) const;

    /// Prediction then correction on normalized linear weights; returns the log
    /// of the predictive mass.
    double step(std::vector<double>& weights, double y) const;

    /// ln of the one-step predictive masses: entry 0 is ln sum xi_i g(x_i; y_0),
    /// entry k the log normalizer of step k. Their sum is the log P-block mass.
    std::vector<double> log_increments(const InitialLaw& xi, std::span<const double> y_path) const;

    /// Largest mass a grid row loses to truncation beyond x_max and quadrature error.
    double truncation_mass() const;

private:
    ThetaHmm theta_;
    NoisePair noise_;
    Grid grid_;
    std::vector<double> transition_;
    mutable std::vector<double> scratch_;
    mutable std::vector<double> factor_;
};

/// n^-1 ln of the grid approximation of xi P<y_0:n-1> 1.
double loglik_grid(const ThetaHmm& theta, const NoisePair& noise, const GridSpec& grid, const InitialLaw& xi,
                   std::span<const double> y_path);

struct QuadratureSpec {
    double tolerance = 1e-10;
    unsigned max_depth = 12;
    /// For n = 2 with a uniform initial law: integrate x_1 outermost.
    bool reverse_order = false;
};

/// Nested adaptive Gauss-Kronrod evaluation of n^-1 ln xi P<y_0:n-1> 1 for n <= 3,
/// with the atom at 0 handled as a point mass. Independent of the grid filter.
double loglik_bruteforce(const ThetaHmm& theta, const NoisePair& noise, const InitialLaw& xi,
                         std::span<const double> y_path, const QuadratureSpec& quad = {});

struct ParticleResult {
    double loglik = 0.0;            // n^-1 ln Z estimate
    double standard_error = 0.0;    // of loglik
    std::vector<double> ess;        // per-step ESS summed over islands
    double min_ess = 0.0;           // smallest per-island ESS over all steps
    bool degenerate = false;        // min_ess < 10
    std::size_t islands = 0;
};

/// Bootstrap particle filter with multinomial resampling at every step.
///
/// The N particles are split into independent islands; the likelihood estimate
/// is the log of the mean island likelihood, and its standard error follows
/// from the spread of island likelihoods (delta method). islands = 0 picks
/// clamp(N / 1000, 2, 20).
ParticleResult particle_filter_loglik(const ThetaHmm& theta, const NoisePair& noise, const InitialLaw& xi,
                                      std::span<const double> y_path, std::size_t n_particles, const RngStream& rng,
                                      std::size_t islands = 0);

/// Total-variation distance between filters started from xi1 and xi2, after
/// each observation.
std::vector<double> filter_tv_gap(const ThetaHmm& theta, const NoisePair& noise, const GridSpec& grid,
                                  const InitialLaw& xi1, const InitialLaw& xi2, std::span<const double> y_path);

}  // namespace pomc::hmm
