#include "sds/mmd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace sds {

namespace {

double squared_distance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
    double sum = 0.0;
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
        const double d = a(i, c) - b(j, c);
        sum += d * d;
    }
    return sum;
}

// Mean kernel value over all (i, j) with i from a and j from b.
double mean_kernel(const Matrix& a, const Matrix& b, double inv_two_s2) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < b.rows(); ++j) {
            sum += std::exp(-squared_distance(a, i, b, j) * inv_two_s2);
        }
    }
    return sum / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

}  // namespace

double median_heuristic(const Matrix& xs, const Matrix& ys) {
    if (xs.cols() != ys.cols()) throw std::invalid_argument("median_heuristic: dimension mismatch");
    Matrix pooled(xs.rows() + ys.rows(), xs.cols());
    pooled << xs, ys;
    if (pooled.rows() < 2) throw std::invalid_argument("median_heuristic: need at least two rows");

    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(pooled.rows() * (pooled.rows() - 1) / 2));
    double smallest_positive = 0.0;
    for (Eigen::Index i = 0; i < pooled.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < pooled.rows(); ++j) {
            const double d = std::sqrt(squared_distance(pooled, i, pooled, j));
            dists.push_back(d);
            if (d > 0.0 && (smallest_positive == 0.0 || d < smallest_positive)) smallest_positive = d;
        }
    }
    // Lower median for an even count; no averaging keeps it an observed distance.
    const auto mid = dists.begin() + static_cast<std::ptrdiff_t>((dists.size() - 1) / 2);
    std::nth_element(dists.begin(), mid, dists.end());
    const double median = *mid;
    if (median > 0.0) return median;
    if (smallest_positive > 0.0) return smallest_positive;
    return 1.0;
}

double mmd2(const Matrix& xs, const Matrix& ys, const MmdConfig& cfg) {
    if (xs.rows() == 0 || ys.rows() == 0) throw std::invalid_argument("mmd2: empty sample set");
    if (xs.cols() != ys.cols()) {
        throw std::invalid_argument("mmd2: dimension mismatch (" + std::to_string(xs.cols()) +
                                    " vs " + std::to_string(ys.cols()) + ")");
    }
    const double s = cfg.bandwidth ? *cfg.bandwidth : median_heuristic(xs, ys);
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("mmd2: bandwidth must be > 0");
    const double inv_two_s2 = 1.0 / (2.0 * s * s);
    const double value = mean_kernel(xs, xs, inv_two_s2) + mean_kernel(ys, ys, inv_two_s2) -
                         2.0 * mean_kernel(xs, ys, inv_two_s2);
    // The V-statistic is a squared RKHS norm; only rounding can push it below zero.
    return std::max(0.0, value);
}

}  // namespace sds
