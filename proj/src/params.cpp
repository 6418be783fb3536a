#include "pomc/params.hpp"

#include "pomc/densities.hpp"
#include "pomc/error.hpp"

#include <cmath>

namespace pomc {

std::string to_string(Family family) {
    switch (family) {
        case Family::Hmm1: return "hmm1";
        case Family::Nbin: return "nbin";
        case Family::Nm: return "nm";
    }
    return "unknown";
}

Family family_from_string(const std::string& name) {
    if (name == "hmm1") return Family::Hmm1;
    if (name == "nbin") return Family::Nbin;
    if (name == "nm") return Family::Nm;
    fail(ErrorKind::InvalidParameter, "unknown model family '" + name + "'");
}

Family family_of(const ParamPoint& theta) {
    switch (theta.index()) {
        case 0: return Family::Hmm1;
        case 1: return Family::Nbin;
        default: return Family::Nm;
    }
}

std::size_t mixture_dim(const ParamPoint& theta) {
    if (const auto* nm = std::get_if<ThetaNm>(&theta)) {
        return nm->dim();
    }
    return 1;
}

std::vector<std::string> coordinate_names(Family family, std::size_t d) {
    switch (family) {
        case Family::Hmm1: return {"m", "a"};
        case Family::Nbin: return {"omega", "a", "b", "r"};
        case Family::Nm: break;
    }
    std::vector<std::string> names;
    for (std::size_t l = 1; l < d; ++l) names.push_back("gamma" + std::to_string(l));
    for (std::size_t l = 1; l <= d; ++l) names.push_back("omega" + std::to_string(l));
    for (std::size_t i = 1; i <= d; ++i)
        for (std::size_t j = 1; j <= d; ++j) names.push_back("A" + std::to_string(i) + std::to_string(j));
    for (std::size_t l = 1; l <= d; ++l) names.push_back("b" + std::to_string(l));
    return names;
}

std::vector<double> flatten(const ParamPoint& theta) {
    if (const auto* h = std::get_if<ThetaHmm>(&theta)) {
        return {h->m, h->a};
    }
    if (const auto* n = std::get_if<ThetaNbin>(&theta)) {
        return {n->omega, n->a, n->b, n->r};
    }
    const auto& nm = std::get<ThetaNm>(theta);
    std::vector<double> out(nm.gamma.begin(), nm.gamma.end() - (nm.gamma.empty() ? 0 : 1));
    out.insert(out.end(), nm.omega.begin(), nm.omega.end());
    out.insert(out.end(), nm.A.begin(), nm.A.end());
    out.insert(out.end(), nm.b.begin(), nm.b.end());
    return out;
}

ParamPoint unflatten(Family family, std::size_t d, const std::vector<double>& c) {
    const std::size_t expected = family == Family::Nm ? (d - 1) + d + d * d + d : coordinate_names(family).size();
    require(c.size() == expected, ErrorKind::DimensionMismatch,
            "expected " + std::to_string(expected) + " coordinates, got " + std::to_string(c.size()));
    switch (family) {
        case Family::Hmm1: return ThetaHmm{c[0], c[1]};
        case Family::Nbin: return ThetaNbin{c[0], c[1], c[2], c[3]};
        case Family::Nm: break;
    }
    ThetaNm nm;
    auto it = c.begin();
    double rest = 1.0;
    for (std::size_t l = 0; l + 1 < d; ++l) {
        nm.gamma.push_back(*it);
        rest -= *it++;
    }
    nm.gamma.push_back(rest);
    nm.omega.assign(it, it + static_cast<std::ptrdiff_t>(d));
    it += static_cast<std::ptrdiff_t>(d);
    nm.A.assign(it, it + static_cast<std::ptrdiff_t>(d * d));
    it += static_cast<std::ptrdiff_t>(d * d);
    nm.b.assign(it, it + static_cast<std::ptrdiff_t>(d));
    return nm;
}

void validate(const ParamPoint& theta) {
    if (const auto* h = std::get_if<ThetaHmm>(&theta)) {
        require(h->m > 0.0 && std::isfinite(h->m), ErrorKind::InvalidParameter, "HMM requires m > 0");
        require(std::isfinite(h->a), ErrorKind::InvalidParameter, "HMM requires finite a");
        return;
    }
    if (const auto* n = std::get_if<ThetaNbin>(&theta)) {
        require(n->omega > 0.0, ErrorKind::InvalidParameter, "NBIN requires omega > 0");
        require(n->a >= 0.0 && n->b >= 0.0, ErrorKind::InvalidParameter, "NBIN requires a, b >= 0");
        require(n->r > 0.0, ErrorKind::InvalidParameter, "NBIN requires r > 0");
        return;
    }
    const auto& nm = std::get<ThetaNm>(theta);
    const std::size_t d = nm.dim();
    require(d >= 1, ErrorKind::DimensionMismatch, "NM requires d >= 1");
    require(nm.omega.size() == d && nm.b.size() == d && nm.A.size() == d * d, ErrorKind::DimensionMismatch,
            "NM parameter blocks must match d = " + std::to_string(d));
    double total = 0.0;
    for (double g : nm.gamma) {
        require(g >= 0.0, ErrorKind::InvalidParameter, "NM gamma must be nonnegative");
        total += g;
    }
    require(std::abs(total - 1.0) <= kSimplexTolerance, ErrorKind::InvalidParameter, "NM gamma must lie on the simplex");
    for (double w : nm.omega) require(w > 0.0, ErrorKind::InvalidParameter, "NM omega must be positive");
    for (double v : nm.A) require(v >= 0.0, ErrorKind::InvalidParameter, "NM A must be nonnegative");
    for (double v : nm.b) require(v >= 0.0, ErrorKind::InvalidParameter, "NM b must be nonnegative");
}

}  // namespace pomc
