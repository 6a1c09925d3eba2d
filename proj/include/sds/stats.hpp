#pragma once

#include <span>
#include <vector>

namespace sds {

double mean(std::span<const double> values);

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_std(std::span<const double> values);

/// Ranks starting at 1, tied values share their average rank.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation of the average ranks. 0 if either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

/// Kendall tau-b. 0 if either side is constant.
double kendall_tau(std::span<const double> x, std::span<const double> y);

}  // namespace sds
