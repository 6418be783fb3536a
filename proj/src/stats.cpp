#include "pomc/stats.hpp"

#include "pomc/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pomc {

MeanEstimate batch_means(std::span<const double> series, std::size_t batches) {
    require(!series.empty(), ErrorKind::InsufficientData, "batch means needs a nonempty series");
    MeanEstimate out;
    out.mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(series.size());
    const std::size_t width = series.size() / batches;
    if (batches < 2 || width == 0) {
        return out;
    }
    std::vector<double> means(batches);
    for (std::size_t b = 0; b < batches; ++b) {
        const auto first = series.begin() + static_cast<std::ptrdiff_t>(b * width);
        means[b] = std::accumulate(first, first + static_cast<std::ptrdiff_t>(width), 0.0) / static_cast<double>(width);
    }
    const double grand = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(batches);
    double sq = 0.0;
    for (double m : means) sq += (m - grand) * (m - grand);
    out.standard_error = std::sqrt(sq / static_cast<double>(batches - 1) / static_cast<double>(batches));
    return out;
}

double quantile(std::vector<double> sample, double p) {
    require(!sample.empty(), ErrorKind::InsufficientData, "quantile of an empty sample");
    std::sort(sample.begin(), sample.end());
    const double pos = p * static_cast<double>(sample.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sample.size() - 1);
    return sample[lo] + (pos - static_cast<double>(lo)) * (sample[hi] - sample[lo]);
}

}  // namespace pomc
