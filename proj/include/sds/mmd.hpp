#pragma once

#include <optional>

#include "sds/dataset.hpp"

namespace sds {

/// Gaussian-kernel MMD settings. An empty bandwidth selects the median
/// heuristic over the pooled sample.
struct MmdConfig {
    std::optional<double> bandwidth;
};

/// Median pairwise Euclidean distance over the rows of xs and ys together.
/// A zero median is replaced by the smallest positive distance.
double median_heuristic(const Matrix& xs, const Matrix& ys);

/// Biased (V-statistic) squared MMD with k(a, b) = exp(-|a - b|^2 / (2 s^2)).
double mmd2(const Matrix& xs, const Matrix& ys, const MmdConfig& cfg = {});

}  // namespace sds
