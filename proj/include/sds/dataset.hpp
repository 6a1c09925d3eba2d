#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <vector>

#include <Eigen/Dense>

namespace sds {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Labeled feature matrix. Row i of `features` carries class `labels[i]`.
struct Dataset {
    Matrix features;
    std::vector<int> labels;
    int class_count = 0;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(features.cols()); }

    /// Number of rows per class id, indexed 0..class_count-1.
    std::vector<std::size_t> class_histogram() const;

    /// Throws std::invalid_argument if shapes or labels are inconsistent.
    void validate() const;

    /// Rows selected by index, in the given order. Class count is kept.
    Dataset select(const std::vector<std::size_t>& rows) const;
};

/// Three disjoint partitions of one source dataset. The row vectors hold the
/// source row indices that make up each part, in ascending order.
struct DataSplit {
    Dataset generator_part;
    Dataset siamese_part;
    Dataset eval_part;
    std::vector<std::size_t> generator_rows;
    std::vector<std::size_t> siamese_rows;
    std::vector<std::size_t> eval_rows;
    std::uint64_t seed = 0;
};

struct SplitFractions {
    double generator = 0.4;
    double siamese = 0.4;
    double eval = 0.2;
};

struct SamplePair {
    std::size_t index_a = 0;
    std::size_t index_b = 0;
    bool genuine = false;

    friend bool operator==(const SamplePair&, const SamplePair&) = default;
};

/// Pairs addressing rows of `source`. The batch does not own the dataset.
struct PairBatch {
    std::vector<SamplePair> pairs;
    const Dataset* source = nullptr;

    std::size_t size() const noexcept { return pairs.size(); }
};

struct MixtureSpec {
    int class_count = 4;
    int dimension = 2;
    double mode_radius = 10.0;
    double within_sigma = 0.5;
    int per_class_count = 100;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Reads a comma-separated file. `label_column` defaults to the last column.
/// A first line whose first cell is not numeric is treated as a header.
Dataset load_csv(const std::filesystem::path& path,
                 std::optional<std::size_t> label_column = std::nullopt);

/// Reads a purely numeric comma-separated table (optional header line).
Matrix load_matrix_csv(const std::filesystem::path& path);

/// Writes features then the label as the last column, full precision.
void save_csv(const Dataset& data, const std::filesystem::path& path);

/// Stratified three-way split. Per class, each part receives
/// floor(fraction * n_c) rows and the remainder is dealt out G, S, E, G, ...
DataSplit split(const Dataset& data, SplitFractions fractions, std::uint64_t seed);

/// Samples `pair_count` pairs, round(pair_count * genuine_fraction) of them
/// genuine. Genuine and impostor pairs are each drawn uniformly from the set
/// of unordered pairs of that kind. The returned order is shuffled.
PairBatch make_pairs(const Dataset& data, std::size_t pair_count, double genuine_fraction,
                     std::uint64_t seed);

/// Every unordered pair (i, j), i < j, in lexicographic order.
PairBatch make_all_pairs(const Dataset& data);

Dataset gen_mixture(const MixtureSpec& spec);

/// Rows whose label is in `keep`. Labels are not re-indexed.
Dataset filter_classes(const Dataset& data, const std::set<int>& keep);

/// For each class present: keeps a random pool of ceil(fraction * n_c) rows,
/// then emits `per_class` rows from it. Pool rows are used once each before
/// any repeats; once exhausted the rest are drawn with replacement.
Dataset subsample_per_class(const Dataset& data, double fraction, std::size_t per_class,
                            std::uint64_t seed);

/// Adds i.i.d. N(0, noise_sigma^2) to every feature.
Dataset degrade(const Dataset& data, double noise_sigma, std::uint64_t seed);

}  // namespace sds
