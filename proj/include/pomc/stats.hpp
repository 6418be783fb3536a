#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pomc {

struct MeanEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
};

/// Mean with a batch-means standard error: the series is cut into `batches`
/// contiguous blocks and the spread of block means gives the error. Leftover
/// samples at the end are included in the mean but not in any batch.
MeanEstimate batch_means(std::span<const double> series, std::size_t batches = 30);

/// Linear-interpolation quantile (type 7) of an unsorted sample.
double quantile(std::vector<double> sample, double p);

}  // namespace pomc
