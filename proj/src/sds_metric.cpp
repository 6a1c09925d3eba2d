#include "sds/sds_metric.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>

namespace sds {

namespace {

std::span<const double> row_span(const Matrix& m, Eigen::Index row) {
    return {m.data() + row * m.cols(), static_cast<std::size_t>(m.cols())};
}

std::string format_double(double v) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

}  // namespace

EmbeddingMatrix embed_set(const EmbeddingNet& net, const Dataset& data) {
    if (data.size() == 0) throw std::invalid_argument("embed_set: empty dataset");
    if (static_cast<int>(data.dim()) != net.input_dim()) {
        throw std::invalid_argument("embed_set: data dimension " + std::to_string(data.dim()) +
                                    " does not match network input " +
                                    std::to_string(net.input_dim()));
    }
    return {net.forward_batch(data.features), data.labels};
}

EmbeddingMatrix embed_unlabeled(const EmbeddingNet& net, const Dataset& data) {
    auto out = embed_set(net, data);
    out.labels.clear();
    return out;
}

std::vector<Neighbor> nearest(const EmbeddingMatrix& real, std::span<const double> query,
                              std::size_t k) {
    if (!real.has_labels()) throw std::invalid_argument("nearest: real embeddings need labels");
    if (k < 1 || k > real.size()) {
        throw std::invalid_argument("nearest: k=" + std::to_string(k) + " outside [1, " +
                                    std::to_string(real.size()) + "]");
    }
    std::vector<Neighbor> all;
    all.reserve(real.size());
    for (std::size_t i = 0; i < real.size(); ++i) {
        all.push_back({i, distance(row_span(real.vectors, static_cast<Eigen::Index>(i)), query),
                       real.labels[i]});
    }
    const auto closer = [](const Neighbor& a, const Neighbor& b) {
        return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
    };
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), closer);
    all.resize(k);
    return all;
}

int assign_class(std::span<const Neighbor> neighbors) {
    if (neighbors.empty()) throw std::invalid_argument("assign_class: no neighbors");
    struct Tally {
        std::size_t votes = 0;
        double distance_sum = 0.0;
    };
    std::map<int, Tally> tally;
    for (const auto& n : neighbors) {
        auto& t = tally[n.label];
        ++t.votes;
        t.distance_sum += n.distance;
    }
    // std::map iterates labels in ascending order, so strict comparisons
    // leave the smaller label in place on a full tie.
    auto best = tally.begin();
    for (auto it = std::next(tally.begin()); it != tally.end(); ++it) {
        const auto& [votes, dist] = it->second;
        if (votes > best->second.votes ||
            (votes == best->second.votes && dist < best->second.distance_sum)) {
            best = it;
        }
    }
    return best->first;
}

FakeScore score_sample(const EmbeddingMatrix& real, std::span<const double> query,
                       const SdsConfig& cfg) {
    const auto neighbors = nearest(real, query, cfg.k);
    const int cls = assign_class(neighbors);
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& n : neighbors) {
        if (n.label != cls) continue;
        sum += n.distance;
        ++count;
    }
    return {cls, sum / static_cast<double>(count)};
}

SdsReport score_embedded(const EmbeddingMatrix& real, const EmbeddingMatrix& fake,
                         const SdsConfig& cfg) {
    if (real.size() == 0 || fake.size() == 0) {
        throw std::invalid_argument("score: real and fake sets must be nonempty");
    }
    if (real.vectors.cols() != fake.vectors.cols()) {
        throw std::invalid_argument("score: embedding widths differ");
    }
    SdsReport report;
    report.real_count = real.size();
    report.fake_count = fake.size();
    report.per_fake.reserve(fake.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < fake.size(); ++j) {
        report.per_fake.push_back(
            score_sample(real, row_span(fake.vectors, static_cast<Eigen::Index>(j)), cfg));
        sum += report.per_fake.back().sds;
    }
    report.aggregate_sds = sum / static_cast<double>(fake.size());
    return report;
}

SdsReport score_set(const EmbeddingNet& net, const Dataset& real, const Dataset& fake,
                    const SdsConfig& cfg) {
    if (static_cast<int>(fake.dim()) != net.input_dim() ||
        static_cast<int>(real.dim()) != net.input_dim()) {
        throw std::invalid_argument("score: sample dimension (real " + std::to_string(real.dim()) +
                                    ", fake " + std::to_string(fake.dim()) +
                                    ") does not match network input " +
                                    std::to_string(net.input_dim()));
    }
    return score_embedded(embed_set(net, real), embed_unlabeled(net, fake), cfg);
}

std::vector<double> normalize_series(std::span<const double> scores) {
    if (scores.empty()) throw std::invalid_argument("normalize_series: empty series");
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    const double range = *hi - *lo;
    std::vector<double> out(scores.size(), 0.0);
    if (range > 0.0) {
        for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - *lo) / range;
    }
    return out;
}

double nearest_neighbor_accuracy(const EmbeddingMatrix& reference, const EmbeddingMatrix& query) {
    if (!query.has_labels()) throw std::invalid_argument("accuracy: query embeddings need labels");
    if (query.size() == 0) throw std::invalid_argument("accuracy: empty query set");
    std::size_t hits = 0;
    for (std::size_t j = 0; j < query.size(); ++j) {
        const auto nn = nearest(reference, row_span(query.vectors, static_cast<Eigen::Index>(j)), 1);
        if (nn.front().label == query.labels[j]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(query.size());
}

void write_report_csv(const SdsReport& report, std::ostream& out) {
    out << "index,assigned_class,sds\n";
    for (std::size_t j = 0; j < report.per_fake.size(); ++j) {
        out << j << ',' << report.per_fake[j].assigned_class << ','
            << format_double(report.per_fake[j].sds) << '\n';
    }
    out << "aggregate,," << format_double(report.aggregate_sds) << '\n';
}

}  // namespace sds
