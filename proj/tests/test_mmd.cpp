#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "sds/mmd.hpp"
#include "test_support.hpp"

using namespace sds;

namespace {

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double shift = 0.0) {
    std::normal_distribution<double> n(shift, 1.0);
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = n(rng);
    return m;
}

double sorted_lower_median(const Matrix& xs, const Matrix& ys) {
    Matrix all(xs.rows() + ys.rows(), xs.cols());
    all << xs, ys;
    std::vector<double> d;
    for (Eigen::Index i = 0; i < all.rows(); ++i)
        for (Eigen::Index j = i + 1; j < all.rows(); ++j) d.push_back((all.row(i) - all.row(j)).norm());
    std::sort(d.begin(), d.end());
    return d[(d.size() - 1) / 2];
}

}  // namespace

TEST(Mmd, IdenticalSetsAreZero) {
    std::mt19937_64 rng(1);
    const auto x = random_matrix(15, 4, rng);
    EXPECT_LE(mmd2(x, x), 1e-12);
    EXPECT_LE(mmd2(x, x, {0.3}), 1e-12);
}

TEST(Mmd, OneDimensionalClosedForm) {
    for (double t : {0.0, 1.0, 3.0}) {
        const Matrix x{{0.0}};
        const Matrix y{{t}};
        EXPECT_NEAR(mmd2(x, y, {1.0}), 2.0 - 2.0 * std::exp(-t * t / 2.0), 1e-12);
    }
}

TEST(Mmd, MatchesDoubleLoopOracle) {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 5; ++t) {
        const auto x = random_matrix(10, 3, rng);
        const auto y = random_matrix(10, 3, rng, 0.5);
        EXPECT_NEAR(mmd2(x, y, {1.3}), oracle::double_loop_mmd2(x, y, 1.3), 1e-12);
        const double s = sorted_lower_median(x, y);
        EXPECT_DOUBLE_EQ(median_heuristic(x, y), s);
        EXPECT_NEAR(mmd2(x, y), oracle::double_loop_mmd2(x, y, s), 1e-12);
    }
}

TEST(Mmd, SymmetricAndGrowsWithShift) {
    std::mt19937_64 rng(3);
    const auto x = random_matrix(30, 2, rng);
    const auto near = random_matrix(30, 2, rng, 0.2);
    const auto far = random_matrix(30, 2, rng, 3.0);
    EXPECT_NEAR(mmd2(x, near, {1.0}), mmd2(near, x, {1.0}), 1e-14);
    EXPECT_LT(mmd2(x, near, {1.0}), mmd2(x, far, {1.0}));
}

TEST(Mmd, ZeroMedianFallsBackToSmallestPositive) {
    const Matrix x{{0.0}, {0.0}, {0.0}};
    const Matrix y{{0.0}, {2.0}};
    EXPECT_EQ(median_heuristic(x, y), 2.0);
}

TEST(Mmd, InvalidInputs) {
    const Matrix x{{0.0, 1.0}};
    const Matrix y{{0.0}};
    EXPECT_THROW(mmd2(x, y), std::invalid_argument);
    EXPECT_THROW(mmd2(Matrix(0, 2), x), std::invalid_argument);
    EXPECT_THROW(mmd2(x, x, {0.0}), std::invalid_argument);
}
