#include "sds/contrastive.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include "sds/errors.hpp"
#include "sds/sds_metric.hpp"
#include "sds/seed.hpp"

namespace sds {

namespace {

constexpr std::size_t kMonitorPairs = 2048;

std::string format_double(double v) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

// d loss / d D for one pair.
double loss_slope(double d, bool genuine, double margin) {
    if (genuine) return d;
    return d < margin ? -(margin - d) : 0.0;
}

struct ForwardCache {
    std::vector<Matrix> pre;   // pre-activations, one per layer
    std::vector<Matrix> post;  // post[0] is the input, post[l + 1] the output of layer l
};

ForwardCache forward_cached(const EmbeddingNet& net, Matrix inputs) {
    ForwardCache cache;
    const auto& layers = net.layers();
    const double slope = net.spec().leaky_slope;
    cache.post.push_back(std::move(inputs));
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Matrix z = cache.post.back() * layers[l].weight.transpose();
        z.rowwise() += layers[l].bias.transpose();
        Matrix a = z;
        if (l + 1 < layers.size()) {
            a = z.unaryExpr([slope](double t) { return t > 0.0 ? t : slope * t; });
        }
        cache.pre.push_back(std::move(z));
        cache.post.push_back(std::move(a));
    }
    return cache;
}

// Rows [0, n) of `stacked` are the first members, rows [n, 2n) the second.
// Returns the summed loss; adds `scale` times the summed gradient into `grad`.
double accumulate(const EmbeddingNet& net, Matrix stacked, const std::vector<bool>& genuine,
                  double margin, double scale, NetGradient& grad) {
    const auto n = static_cast<Eigen::Index>(genuine.size());
    const auto cache = forward_cached(net, std::move(stacked));
    const Matrix& out = cache.post.back();
    const Matrix diff = out.topRows(n) - out.bottomRows(n);

    Matrix upstream(2 * n, out.cols());
    double loss_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = std::sqrt(diff.row(i).squaredNorm());
        loss_sum += pair_loss(d, genuine[static_cast<std::size_t>(i)], margin);
        const double slope = loss_slope(d, genuine[static_cast<std::size_t>(i)], margin);
        if (d > 0.0 && slope != 0.0) {
            upstream.row(i) = (scale * slope / d) * diff.row(i);
        } else {
            upstream.row(i).setZero();
        }
        upstream.row(n + i) = -upstream.row(i);
    }

    const auto& layers = net.layers();
    const double leaky = net.spec().leaky_slope;
    Matrix g = std::move(upstream);
    for (std::size_t l = layers.size(); l-- > 0;) {
        grad.layers[l].weight.noalias() += g.transpose() * cache.post[l];
        grad.layers[l].bias += g.colwise().sum().transpose();
        if (l == 0) break;
        Matrix back = g * layers[l].weight;
        const Matrix& z = cache.pre[l - 1];
        for (Eigen::Index i = 0; i < back.size(); ++i) {
            if (!(z.data()[i] > 0.0)) back.data()[i] *= leaky;
        }
        g = std::move(back);
    }
    return loss_sum;
}

Matrix stack_pairs(const Dataset& data, std::span<const SamplePair> pairs) {
    const auto n = static_cast<Eigen::Index>(pairs.size());
    Matrix stacked(2 * n, data.features.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = pairs[static_cast<std::size_t>(i)];
        if (p.index_a >= data.size() || p.index_b >= data.size()) {
            throw std::invalid_argument("pair index out of range");
        }
        stacked.row(i) = data.features.row(static_cast<Eigen::Index>(p.index_a));
        stacked.row(n + i) = data.features.row(static_cast<Eigen::Index>(p.index_b));
    }
    return stacked;
}

// Embeds every row once and reads the pair distances from the embedding.
double mean_batch_loss_fast(const EmbeddingNet& net, const Dataset& data,
                            std::span<const SamplePair> pairs, double margin) {
    const auto cache = forward_cached(net, data.features);
    const Matrix& out = cache.post.back();
    double sum = 0.0;
    for (const auto& p : pairs) {
        const auto a = static_cast<Eigen::Index>(p.index_a);
        const auto b = static_cast<Eigen::Index>(p.index_b);
        sum += pair_loss(std::sqrt((out.row(a) - out.row(b)).squaredNorm()), p.genuine, margin);
    }
    return sum / static_cast<double>(pairs.size());
}

}  // namespace

double pair_loss(double distance, bool genuine, double margin) {
    if (distance < 0.0) throw std::invalid_argument("pair_loss: distance must be >= 0");
    if (!(margin > 0.0)) throw std::invalid_argument("pair_loss: margin must be > 0");
    if (genuine) return 0.5 * distance * distance;
    const double gap = std::max(0.0, margin - distance);
    return 0.5 * gap * gap;
}

NetGradient backward(const EmbeddingNet& net, const Eigen::Ref<const Vector>& xa,
                     const Eigen::Ref<const Vector>& xb, bool genuine, double margin) {
    if (!(margin > 0.0)) throw std::invalid_argument("backward: margin must be > 0");
    if (xa.size() != net.input_dim() || xb.size() != net.input_dim()) {
        throw std::invalid_argument("backward: input length does not match network");
    }
    Matrix stacked(2, net.input_dim());
    stacked.row(0) = xa.transpose();
    stacked.row(1) = xb.transpose();
    NetGradient grad = net.zero_gradient();
    const double loss = accumulate(net, std::move(stacked), {genuine}, margin, 1.0, grad);
    if (!std::isfinite(loss)) throw DivergenceError("backward: non-finite loss");
    for (const auto& layer : grad.layers) {
        if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
            throw DivergenceError("backward: non-finite gradient");
        }
    }
    return grad;
}

double batch_loss(const EmbeddingNet& net, const PairBatch& batch, double margin) {
    if (batch.pairs.empty()) throw std::invalid_argument("batch_loss: empty batch");
    if (batch.source == nullptr) throw std::invalid_argument("batch_loss: batch has no source");
    const Dataset& data = *batch.source;
    double sum = 0.0;
    for (const auto& p : batch.pairs) {
        if (p.index_a >= data.size() || p.index_b >= data.size()) {
            throw std::invalid_argument("batch_loss: pair index out of range");
        }
        const Vector fa = net.forward(data.features.row(static_cast<Eigen::Index>(p.index_a)).transpose());
        const Vector fb = net.forward(data.features.row(static_cast<Eigen::Index>(p.index_b)).transpose());
        sum += pair_loss(distance(fa, fb), p.genuine, margin);
    }
    return sum / static_cast<double>(batch.pairs.size());
}

LossAndGradient batch_gradient(const EmbeddingNet& net, const Dataset& data,
                               std::span<const SamplePair> pairs, double margin) {
    if (pairs.empty()) throw std::invalid_argument("batch_gradient: empty batch");
    std::vector<bool> genuine;
    genuine.reserve(pairs.size());
    for (const auto& p : pairs) genuine.push_back(p.genuine);
    LossAndGradient out{0.0, net.zero_gradient()};
    const double inv = 1.0 / static_cast<double>(pairs.size());
    out.loss = accumulate(net, stack_pairs(data, pairs), genuine, margin, inv, out.gradient) * inv;
    return out;
}

void TrainConfig::validate() const {
    if (!(margin > 0.0)) throw std::invalid_argument("margin must be > 0");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw std::invalid_argument("learning rate must be finite and >= 0");
    }
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (!(genuine_fraction > 0.0 && genuine_fraction < 1.0)) {
        throw std::invalid_argument("genuine fraction must lie in (0, 1)");
    }
}

TrainResult train(EmbeddingNet net, const Dataset& data, const TrainConfig& cfg,
                  std::ostream* log) {
    cfg.validate();
    data.validate();
    if (static_cast<int>(data.dim()) != net.input_dim()) {
        throw std::invalid_argument("train: data dimension " + std::to_string(data.dim()) +
                                    " does not match network input " +
                                    std::to_string(net.input_dim()));
    }
    std::size_t present = 0;
    for (auto count : data.class_histogram()) present += count > 0 ? 1 : 0;
    if (present < 2) throw std::invalid_argument("train: need at least two classes");

    const std::size_t pair_count = cfg.pair_count > 0 ? cfg.pair_count : 10 * data.size();
    const PairBatch monitor = make_pairs(data, std::min(pair_count, kMonitorPairs),
                                         cfg.genuine_fraction, derive_seed(cfg.seed, "monitor"));

    TrainReport report;
    report.config = cfg;
    report.config.pair_count = pair_count;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const PairBatch batch =
            make_pairs(data, pair_count, cfg.genuine_fraction,
                       derive_seed(cfg.seed, "pairs", static_cast<std::uint64_t>(epoch)));
        const std::span<const SamplePair> all(batch.pairs);
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < all.size(); start += cfg.batch_size, ++batch_index) {
            const auto chunk = all.subspan(start, std::min(cfg.batch_size, all.size() - start));
            auto step = batch_gradient(net, data, chunk, cfg.margin);
            if (!std::isfinite(step.loss)) {
                throw DivergenceError("training diverged: non-finite loss at epoch " +
                                      std::to_string(epoch + 1) + ", batch " +
                                      std::to_string(batch_index + 1));
            }
            if (cfg.learning_rate == 0.0) continue;
            auto& layers = net.mutable_layers();
            for (std::size_t l = 0; l < layers.size(); ++l) {
                layers[l].weight -= cfg.learning_rate * step.gradient.layers[l].weight;
                layers[l].bias -= cfg.learning_rate * step.gradient.layers[l].bias;
            }
            if (!net.all_finite()) {
                throw DivergenceError("training diverged: non-finite parameters at epoch " +
                                      std::to_string(epoch + 1) + ", batch " +
                                      std::to_string(batch_index + 1));
            }
        }
        const double loss = mean_batch_loss_fast(net, data, monitor.pairs, cfg.margin);
        if (!std::isfinite(loss)) {
            throw DivergenceError("training diverged: non-finite loss after epoch " +
                                  std::to_string(epoch + 1));
        }
        report.epoch_losses.push_back(loss);
        if (log != nullptr) *log << "epoch " << (epoch + 1) << " loss " << format_double(loss) << '\n';
    }

    const auto embedded = embed_set(net, data);
    double genuine_sum = 0.0;
    double impostor_sum = 0.0;
    std::size_t genuine_n = 0;
    std::size_t impostor_n = 0;
    for (const auto& p : monitor.pairs) {
        const double d = distance(embedded.vectors.row(static_cast<Eigen::Index>(p.index_a)).transpose(),
                                  embedded.vectors.row(static_cast<Eigen::Index>(p.index_b)).transpose());
        if (p.genuine) {
            genuine_sum += d;
            ++genuine_n;
        } else {
            impostor_sum += d;
            ++impostor_n;
        }
    }
    report.genuine_mean_distance = genuine_n ? genuine_sum / static_cast<double>(genuine_n) : 0.0;
    report.impostor_mean_distance = impostor_n ? impostor_sum / static_cast<double>(impostor_n) : 0.0;
    return {std::move(net), std::move(report)};
}

MarginSelection select_margin(const Dataset& data, const NetSpec& net_spec,
                              std::span<const double> candidates, const TrainConfig& cfg,
                              int folds) {
    if (candidates.empty()) throw std::invalid_argument("select_margin: no candidate margins");
    if (folds < 2) throw std::invalid_argument("select_margin: folds must be >= 2");
    for (double m : candidates) {
        if (!(m > 0.0)) throw std::invalid_argument("select_margin: margins must be > 0");
    }
    data.validate();

    // Stratified fold assignment: shuffle each class, then deal round-robin.
    std::vector<int> fold_of(data.size(), 0);
    {
        Rng rng(derive_seed(cfg.seed, "folds"));
        std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.class_count));
        for (std::size_t i = 0; i < data.size(); ++i) {
            by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
        }
        for (auto& members : by_class) {
            std::shuffle(members.begin(), members.end(), rng);
            for (std::size_t k = 0; k < members.size(); ++k) {
                fold_of[members[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
            }
        }
    }

    MarginSelection selection;
    for (double margin : candidates) {
        double acc_sum = 0.0;
        for (int f = 0; f < folds; ++f) {
            std::vector<std::size_t> train_rows;
            std::vector<std::size_t> held_rows;
            for (std::size_t i = 0; i < data.size(); ++i) {
                (fold_of[i] == f ? held_rows : train_rows).push_back(i);
            }
            if (held_rows.empty() || train_rows.empty()) {
                throw std::invalid_argument("select_margin: too few samples for the fold count");
            }
            const Dataset train_part = data.select(train_rows);
            const Dataset held_part = data.select(held_rows);
            TrainConfig fold_cfg = cfg;
            fold_cfg.margin = margin;
            fold_cfg.seed = derive_seed(cfg.seed, "fold", static_cast<std::uint64_t>(f));
            const auto result = train(EmbeddingNet::init(net_spec), train_part, fold_cfg);
            acc_sum += nearest_neighbor_accuracy(embed_set(result.net, train_part),
                                                 embed_set(result.net, held_part));
        }
        selection.accuracies.push_back(acc_sum / folds);
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const double a = selection.accuracies[i];
        const double b = selection.accuracies[best];
        if (a > b || (a == b && candidates[i] < candidates[best])) best = i;
    }
    selection.margin = candidates[best];
    return selection;
}

void write_train_report_csv(const TrainReport& report, std::ostream& out) {
    out << "epoch,mean_loss\n";
    for (std::size_t e = 0; e < report.epoch_losses.size(); ++e) {
        out << (e + 1) << ',' << format_double(report.epoch_losses[e]) << '\n';
    }
    const auto& c = report.config;
    out << '\n' << "key,value\n";
    out << "genuine_mean_distance," << format_double(report.genuine_mean_distance) << '\n';
    out << "impostor_mean_distance," << format_double(report.impostor_mean_distance) << '\n';
    out << "margin," << format_double(c.margin) << '\n';
    out << "learning_rate," << format_double(c.learning_rate) << '\n';
    out << "epochs," << c.epochs << '\n';
    out << "batch_size," << c.batch_size << '\n';
    out << "pair_count," << c.pair_count << '\n';
    out << "genuine_fraction," << format_double(c.genuine_fraction) << '\n';
    out << "seed," << c.seed << '\n';
}

}  // namespace sds
