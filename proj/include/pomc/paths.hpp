#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pomc {

/// Observations Y_1..Y_n. Count data is stored exactly as doubles.
using ObservationPath = std::vector<double>;

/// A state vector; length 1 for scalar chains.
using State = std::vector<double>;

/// Hidden states stored row-major: state k occupies [k*dim, (k+1)*dim).
struct StatePath {
    std::size_t dim = 1;
    std::vector<double> values;

    std::size_t size() const noexcept { return dim == 0 ? 0 : values.size() / dim; }
    std::span<const double> operator[](std::size_t k) const {
        return std::span<const double>(values).subspan(k * dim, dim);
    }
    void push_back(std::span<const double> x) { values.insert(values.end(), x.begin(), x.end()); }
};

}  // namespace pomc
