#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "sds/dataset.hpp"
#include "sds/embedding_net.hpp"

namespace sds {

/// Per-pair contrastive loss: genuine 0.5 D^2, impostor 0.5 max(0, M - D)^2.
double pair_loss(double distance, bool genuine, double margin);

/// Gradient of pair_loss for one pair with respect to every network
/// parameter, both branches accumulated into the same gradient. The distance
/// derivative is taken as zero at D = 0, and the leaky-ReLU slope at t = 0 is
/// the negative-side slope.
NetGradient backward(const EmbeddingNet& net, const Eigen::Ref<const Vector>& xa,
                     const Eigen::Ref<const Vector>& xb, bool genuine, double margin);

/// Mean pair_loss over the batch, using forward() distances.
double batch_loss(const EmbeddingNet& net, const PairBatch& batch, double margin);

struct LossAndGradient {
    double loss = 0.0;
    NetGradient gradient;
};

/// Mean loss and mean gradient over `pairs`, computed with both branches
/// stacked into one matrix pass.
LossAndGradient batch_gradient(const EmbeddingNet& net, const Dataset& data,
                               std::span<const SamplePair> pairs, double margin);

struct TrainConfig {
    double margin = 1.0;
    double learning_rate = 0.05;
    int epochs = 50;
    std::size_t batch_size = 64;
    /// Pairs drawn per epoch; 0 means ten times the dataset size.
    std::size_t pair_count = 0;
    double genuine_fraction = 0.5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainReport {
    /// Mean loss per epoch, measured after the epoch on a fixed monitor set.
    std::vector<double> epoch_losses;
    double genuine_mean_distance = 0.0;
    double impostor_mean_distance = 0.0;
    TrainConfig config;
};

struct TrainResult {
    EmbeddingNet net;
    TrainReport report;
};

/// Mini-batch gradient descent on freshly sampled pairs each epoch.
/// Throws DivergenceError naming the epoch and batch on a non-finite loss.
/// If `log` is given, writes one "epoch <e> loss <value>" line per epoch.
TrainResult train(EmbeddingNet net, const Dataset& data, const TrainConfig& cfg,
                  std::ostream* log = nullptr);

struct MarginSelection {
    double margin = 0.0;
    /// Mean held-out 1-NN accuracy per candidate, in candidate order.
    std::vector<double> accuracies;
};

/// Stratified k-fold selection: trains a fresh net per fold and candidate,
/// keeps the margin with the best mean held-out 1-NN accuracy. Ties go to
/// the smaller margin.
MarginSelection select_margin(const Dataset& data, const NetSpec& net_spec,
                              std::span<const double> candidates, const TrainConfig& cfg,
                              int folds);

/// Two CSV blocks separated by a blank line: `epoch,mean_loss` rows, then
/// `key,value` rows for the final distances and the configuration.
void write_train_report_csv(const TrainReport& report, std::ostream& out);

}  // namespace sds
