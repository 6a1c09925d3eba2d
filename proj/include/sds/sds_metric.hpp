#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "sds/dataset.hpp"
#include "sds/embedding_net.hpp"

namespace sds {

/// Network outputs for a sample set, one row per sample. `labels` is empty
/// when the source carries no trusted labels.
struct EmbeddingMatrix {
    Matrix vectors;
    std::vector<int> labels;

    std::size_t size() const noexcept { return static_cast<std::size_t>(vectors.rows()); }
    bool has_labels() const noexcept { return !labels.empty(); }
};

struct SdsConfig {
    std::size_t k = 1;
};

struct Neighbor {
    std::size_t index = 0;
    double distance = 0.0;
    int label = 0;
};

struct FakeScore {
    int assigned_class = 0;
    double sds = 0.0;
};

struct SdsReport {
    std::vector<FakeScore> per_fake;
    double aggregate_sds = 0.0;
    std::size_t real_count = 0;
    std::size_t fake_count = 0;
};

EmbeddingMatrix embed_set(const EmbeddingNet& net, const Dataset& data);

/// Same as embed_set but drops the labels (fake samples).
EmbeddingMatrix embed_unlabeled(const EmbeddingNet& net, const Dataset& data);

/// The k real rows closest to `query`, ascending by distance, ties to the
/// lower index.
std::vector<Neighbor> nearest(const EmbeddingMatrix& real, std::span<const double> query,
                              std::size_t k);

/// Majority label. Ties go to the label whose neighbors have the smaller
/// summed distance, then to the smaller label.
int assign_class(std::span<const Neighbor> neighbors);

/// Assigned class and mean distance to the neighbors carrying that class.
FakeScore score_sample(const EmbeddingMatrix& real, std::span<const double> query,
                       const SdsConfig& cfg);

/// Scores every fake row against the labeled real rows. Aggregate is the
/// index-ordered mean of the per-sample scores.
SdsReport score_embedded(const EmbeddingMatrix& real, const EmbeddingMatrix& fake,
                         const SdsConfig& cfg);

/// Embeds both sets with `net` and scores. Labels on `fake` are ignored.
SdsReport score_set(const EmbeddingNet& net, const Dataset& real, const Dataset& fake,
                    const SdsConfig& cfg);

/// (s - min) / (max - min); all zeros when the series is constant.
std::vector<double> normalize_series(std::span<const double> scores);

/// Fraction of query rows whose 1-NN label in `reference` equals their own.
double nearest_neighbor_accuracy(const EmbeddingMatrix& reference, const EmbeddingMatrix& query);

/// CSV: header `index,assigned_class,sds`, one row per fake sample, then a
/// final row `aggregate,,<value>`. Numbers are shortest round-trip decimal.
void write_report_csv(const SdsReport& report, std::ostream& out);

}  // namespace sds
