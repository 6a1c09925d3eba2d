#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "sds/dataset.hpp"

namespace sds {

struct NetSpec {
    int input_dim = 2;
    std::vector<int> hidden_dims{128, 128, 128};
    int embed_dim = 64;
    double leaky_slope = 0.01;
    std::uint64_t init_seed = 0;

    void validate() const;
    friend bool operator==(const NetSpec&, const NetSpec&) = default;
};

/// One affine map. `weight` is out x in, so the layer computes W x + b.
struct DenseLayer {
    Matrix weight;
    Vector bias;
};

/// Same shapes as the network's layers; used for gradients.
struct NetGradient {
    std::vector<DenseLayer> layers;

    std::vector<double> flatten() const;
    NetGradient& operator+=(const NetGradient& other);
    NetGradient& operator*=(double scale);
};

/// Fully-connected network with leaky-ReLU hidden activations and a linear
/// output layer. Both members of a pair go through this one parameter set.
class EmbeddingNet {
public:
    EmbeddingNet() = default;
    EmbeddingNet(NetSpec spec, std::vector<DenseLayer> layers);

    /// Glorot-uniform weights, zero biases, seeded by spec.init_seed.
    static EmbeddingNet init(const NetSpec& spec);

    const NetSpec& spec() const noexcept { return spec_; }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    std::vector<DenseLayer>& mutable_layers() noexcept { return layers_; }

    int input_dim() const noexcept { return spec_.input_dim; }
    int embed_dim() const noexcept { return spec_.embed_dim; }

    /// Single-sample forward pass. Throws on wrong length or non-finite input.
    Vector forward(const Eigen::Ref<const Vector>& x) const;

    /// Row i of the result is exactly forward(inputs.row(i)).
    Matrix forward_batch(const Matrix& inputs) const;

    std::size_t parameter_count() const;
    std::vector<double> flatten() const;
    void assign(std::span<const double> params);
    NetGradient zero_gradient() const;

    bool all_finite() const;

private:
    void check_shapes() const;

    NetSpec spec_;
    std::vector<DenseLayer> layers_;
};

/// Euclidean norm of fa - fb, accumulated left to right.
double distance(std::span<const double> fa, std::span<const double> fb);
double distance(const Eigen::Ref<const Vector>& fa, const Eigen::Ref<const Vector>& fb);

void save_net(const EmbeddingNet& net, std::ostream& out);
void save_net(const EmbeddingNet& net, const std::filesystem::path& path);
EmbeddingNet load_net(std::istream& in);
EmbeddingNet load_net(const std::filesystem::path& path);

}  // namespace sds
