#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

namespace pomc {

/// Model families handled by the engines.
enum class Family { Hmm1, Nbin, Nm };

std::string to_string(Family family);
Family family_from_string(const std::string& name);

/// Example HMM: X_k = (X_{k-1} + U_k - m)^+, Y_k = a X_k + V_k.
struct ThetaHmm {
    double m = 1.0;
    double a = 0.8;

    friend bool operator==(const ThetaHmm&, const ThetaHmm&) = default;
};

/// NBIN-GARCH(1,1): X' = omega + a X + b Y, Y | X ~ NB.
struct ThetaNbin {
    double omega = 1.0;
    double a = 0.3;
    double b = 0.1;
    double r = 4.0;

    friend bool operator==(const ThetaNbin&, const ThetaNbin&) = default;
};

/// NM(d)-GARCH(1,1): X' = omega + A X + Y^2 b, Y | X ~ sum_l gamma_l N(0, X_l).
/// `A` is stored row-major, d x d.
struct ThetaNm {
    std::vector<double> gamma;
    std::vector<double> omega;
    std::vector<double> A;
    std::vector<double> b;

    std::size_t dim() const noexcept { return gamma.size(); }
    double a(std::size_t row, std::size_t col) const { return A[row * dim() + col]; }

    friend bool operator==(const ThetaNm&, const ThetaNm&) = default;
};

using ParamPoint = std::variant<ThetaHmm, ThetaNbin, ThetaNm>;

Family family_of(const ParamPoint& theta);
/// Mixture dimension for NM, 1 otherwise.
std::size_t mixture_dim(const ParamPoint& theta);

/// Flat coordinates of a parameter point.
///
/// HMM: (m, a). NBIN: (omega, a, b, r). NM(d): (gamma_1..gamma_{d-1},
/// omega_1..omega_d, A row-major, b_1..b_d); gamma_d is implied by the simplex.
std::vector<std::string> coordinate_names(Family family, std::size_t d = 1);
std::vector<double> flatten(const ParamPoint& theta);
/// Inverse of flatten. NM points with sum(gamma_1..gamma_{d-1}) > 1 decode to a
/// gamma_d below zero; callers check with `validate`.
ParamPoint unflatten(Family family, std::size_t d, const std::vector<double>& coords);

/// Throws invalid-parameter on a point outside the family's parameter space.
void validate(const ParamPoint& theta);

}  // namespace pomc
