#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sds/contrastive.hpp"
#include "sds/dataset.hpp"
#include "sds/embedding_net.hpp"
#include "sds/sds_metric.hpp"

namespace sds {

/// Settings shared by every experiment. Each repetition regenerates the
/// mixture (or re-splits `data` when set), re-initializes and retrains the
/// net, all from seeds derived from `seed` and the repetition index.
struct ExperimentConfig {
    int repetitions = 10;
    MixtureSpec mixture{10, 8, 10.0, 1.0, 200, 0};
    /// Real tabular data to use instead of the synthetic mixture.
    std::optional<Dataset> data;
    SplitFractions fractions;
    /// input_dim is overwritten with the data dimension.
    NetSpec net;
    TrainConfig train;
    SdsConfig sds;
    std::uint64_t seed = 0;
    /// Worker threads for repetitions; 0 means hardware concurrency.
    int threads = 1;

    void validate() const;
};

/// One averaged score series. `repetition_scores[r][i]` is the score of
/// repetition r at x_values[i].
struct SeriesReport {
    std::vector<double> x_values;
    std::vector<double> mean_scores;
    std::vector<double> std_scores;
    std::vector<double> normalized_scores;
    std::vector<std::vector<double>> repetition_scores;
};

/// Train on the first floor(C/2) classes of S, then score E restricted to
/// classes {0..i-1} for i = 1..C against the trained-class part of S.
SeriesReport mode_experiment(const ExperimentConfig& cfg);

/// Train on all of S; for each fraction p score subsample_per_class(E, p, K)
/// with K = |E| / C against S.
SeriesReport intraclass_experiment(const ExperimentConfig& cfg, const std::vector<double>& fractions);

struct QualityReport {
    SeriesReport series;
    /// Spearman correlation between sigma and mean SDS.
    double spearman = 0.0;
};

/// Train on all of S; score degrade(E, sigma) against S for each sigma.
QualityReport quality_experiment(const ExperimentConfig& cfg, const std::vector<double>& sigmas);

/// Produces a fake set for one repetition from that repetition's split.
struct FakeSource {
    std::string name;
    std::function<Dataset(const DataSplit& split, std::uint64_t seed)> make;
};

/// Fake sources that add Gaussian noise of the given sigmas to E.
std::vector<FakeSource> degradation_sources(const std::vector<double>& sigmas);

struct RankingReport {
    std::vector<std::string> names;
    std::vector<double> sds_mean;
    std::vector<double> sds_std;
    std::vector<double> mmd_mean;
    std::vector<double> mmd_std;
    /// Kendall tau between the SDS and MMD orderings, per repetition.
    std::vector<double> repetition_tau;
    /// Kendall tau between the mean SDS and mean MMD orderings.
    double mean_tau = 0.0;
};

/// Scores every fake source with SDS (reference S) and MMD (reference: a
/// random subset of S of the fake set's size, bandwidth fixed per repetition
/// by the median heuristic over that subset and E).
RankingReport ranking_experiment(const ExperimentConfig& cfg, const std::vector<FakeSource>& fakes);

/// `x,mean,std,normalized`, one row per x value.
void write_series_csv(const SeriesReport& report, std::ostream& out);

/// `name,sds_mean,sds_std,mmd_mean,mmd_std`, one row per fake source.
void write_ranking_csv(const RankingReport& report, std::ostream& out);

/// Index of the smallest value, first one on ties.
std::size_t argmin(const std::vector<double>& values);

}  // namespace sds
