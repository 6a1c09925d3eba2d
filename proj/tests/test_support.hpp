#pragma once

// Independent reference implementations used as test oracles. They share no
// code paths with the library beyond EmbeddingNet::forward.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "sds/contrastive.hpp"
#include "sds/dataset.hpp"
#include "sds/embedding_net.hpp"

namespace sds::oracle {

inline NetSpec random_small_spec(std::mt19937_64& rng, int max_width = 8) {
    std::uniform_int_distribution<int> width(1, max_width);
    std::uniform_int_distribution<int> depth(0, 3);
    NetSpec spec;
    spec.input_dim = width(rng);
    spec.hidden_dims.clear();
    const int layers = depth(rng);
    for (int l = 0; l < layers; ++l) spec.hidden_dims.push_back(width(rng));
    spec.embed_dim = width(rng);
    spec.leaky_slope = std::uniform_real_distribution<double>(0.01, 0.3)(rng);
    spec.init_seed = rng();
    return spec;
}

/// Network with random (non-zero) biases so kinks are not aligned with zero inputs.
inline EmbeddingNet random_net(const NetSpec& spec, std::mt19937_64& rng) {
    EmbeddingNet net = EmbeddingNet::init(spec);
    std::normal_distribution<double> n(0.0, 0.3);
    for (auto& layer : net.mutable_layers()) {
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = n(rng);
    }
    return net;
}

inline Vector random_vector(int n, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = dist(rng);
    return v;
}

inline double plain_distance(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) s += (a(i) - b(i)) * (a(i) - b(i));
    return std::sqrt(s);
}

/// Contrastive loss of one pair evaluated through forward() only.
inline double pair_objective(const EmbeddingNet& net, const Vector& xa, const Vector& xb,
                             bool genuine, double margin) {
    const double d = plain_distance(net.forward(xa), net.forward(xb));
    if (genuine) return 0.5 * d * d;
    const double gap = std::max(0.0, margin - d);
    return 0.5 * gap * gap;
}

/// Central finite differences of pair_objective over every parameter.
inline std::vector<double> finite_difference_gradient(const EmbeddingNet& net, const Vector& xa,
                                                      const Vector& xb, bool genuine,
                                                      double margin, double step = 1e-5) {
    EmbeddingNet probe = net;
    const std::vector<double> base = net.flatten();
    std::vector<double> params = base;
    std::vector<double> grad(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        params[i] = base[i] + step;
        probe.assign(params);
        const double up = pair_objective(probe, xa, xb, genuine, margin);
        params[i] = base[i] - step;
        probe.assign(params);
        const double down = pair_objective(probe, xa, xb, genuine, margin);
        params[i] = base[i];
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

/// Largest elementwise relative error. Entries where both values are below
/// `floor` in magnitude are compared on an absolute scale against `floor`,
/// which keeps finite-difference roundoff on zero entries from dominating.
inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b,
                                 double floor = 1e-5) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

struct OracleScore {
    std::vector<int> assigned;
    std::vector<double> per_fake;
    double aggregate = 0.0;
};

/// Straight-line scoring: full distance matrix, sort, vote, average.
inline OracleScore brute_force_sds(const EmbeddingNet& net, const Dataset& real,
                                   const Dataset& fake, std::size_t k) {
    // Embed every real and fake sample.
    std::vector<Vector> real_out;
    std::vector<Vector> fake_out;
    for (Eigen::Index i = 0; i < real.features.rows(); ++i) {
        real_out.push_back(net.forward(real.features.row(i).transpose()));
    }
    for (Eigen::Index j = 0; j < fake.features.rows(); ++j) {
        fake_out.push_back(net.forward(fake.features.row(j).transpose()));
    }

    OracleScore out;
    double total = 0.0;
    for (const auto& f : fake_out) {
        // All distances, K smallest (index breaks ties).
        std::vector<double> dist(real_out.size());
        for (std::size_t i = 0; i < real_out.size(); ++i) dist[i] = plain_distance(f, real_out[i]);
        std::vector<std::size_t> order(real_out.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
        order.resize(k);

        // Majority vote over the K labels.
        std::map<int, int> votes;
        std::map<int, double> summed;
        for (std::size_t p : order) {
            votes[real.labels[p]] += 1;
            summed[real.labels[p]] += dist[p];
        }
        int best = -1;
        for (const auto& [label, count] : votes) {
            if (best < 0 || count > votes[best] ||
                (count == votes[best] && summed[label] < summed[best])) {
                best = label;
            }
        }

        // Mean distance to the members of the chosen class.
        double sum = 0.0;
        int members = 0;
        for (std::size_t p : order) {
            if (real.labels[p] == best) {
                sum += dist[p];
                ++members;
            }
        }
        out.assigned.push_back(best);
        out.per_fake.push_back(sum / members);
        total += out.per_fake.back();
    }
    out.aggregate = total / static_cast<double>(fake_out.size());
    return out;
}

/// Biased MMD^2 written as three separate double loops.
inline double double_loop_mmd2(const Matrix& xs, const Matrix& ys, double bandwidth) {
    auto k = [&](const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
        double s = 0.0;
        for (Eigen::Index c = 0; c < a.cols(); ++c) s += (a(i, c) - b(j, c)) * (a(i, c) - b(j, c));
        return std::exp(-s * (1.0 / (2.0 * bandwidth * bandwidth)));
    };
    double xx = 0.0;
    for (Eigen::Index i = 0; i < xs.rows(); ++i)
        for (Eigen::Index j = 0; j < xs.rows(); ++j) xx += k(xs, i, xs, j);
    double yy = 0.0;
    for (Eigen::Index i = 0; i < ys.rows(); ++i)
        for (Eigen::Index j = 0; j < ys.rows(); ++j) yy += k(ys, i, ys, j);
    double xy = 0.0;
    for (Eigen::Index i = 0; i < xs.rows(); ++i)
        for (Eigen::Index j = 0; j < ys.rows(); ++j) xy += k(xs, i, ys, j);
    const double nx = static_cast<double>(xs.rows());
    const double ny = static_cast<double>(ys.rows());
    return xx / (nx * nx) + yy / (ny * ny) - 2.0 * (xy / (nx * ny));
}

inline Dataset random_labeled(std::size_t rows, int dim, int classes, std::mt19937_64& rng) {
    Dataset d;
    d.class_count = classes;
    d.features.resize(static_cast<Eigen::Index>(rows), dim);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_int_distribution<int> label(0, classes - 1);
    for (std::size_t i = 0; i < rows; ++i) {
        for (int j = 0; j < dim; ++j) d.features(static_cast<Eigen::Index>(i), j) = n(rng);
        d.labels.push_back(label(rng));
    }
    return d;
}

}  // namespace sds::oracle
