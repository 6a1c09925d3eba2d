#include "sds/embedding_net.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "sds/errors.hpp"
#include "sds/seed.hpp"

namespace sds {

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kMagic = "sds-embedding-net";

std::string format_double(double v) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

void apply_leaky(Vector& z, double slope) {
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        if (!(z(i) > 0.0)) z(i) *= slope;
    }
}

}  // namespace

void NetSpec::validate() const {
    if (input_dim < 1) throw std::invalid_argument("net input_dim must be >= 1");
    if (embed_dim < 1) throw std::invalid_argument("net embed_dim must be >= 1");
    for (int w : hidden_dims) {
        if (w < 1) throw std::invalid_argument("net hidden widths must be >= 1");
    }
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) {
        throw std::invalid_argument("leaky slope must lie in (0, 1)");
    }
}

std::vector<double> NetGradient::flatten() const {
    std::vector<double> out;
    for (const auto& layer : layers) {
        out.insert(out.end(), layer.weight.data(), layer.weight.data() + layer.weight.size());
        out.insert(out.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
    }
    return out;
}

NetGradient& NetGradient::operator+=(const NetGradient& other) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        layers[l].weight += other.layers[l].weight;
        layers[l].bias += other.layers[l].bias;
    }
    return *this;
}

NetGradient& NetGradient::operator*=(double scale) {
    for (auto& layer : layers) {
        layer.weight *= scale;
        layer.bias *= scale;
    }
    return *this;
}

EmbeddingNet::EmbeddingNet(NetSpec spec, std::vector<DenseLayer> layers)
    : spec_(std::move(spec)), layers_(std::move(layers)) {
    spec_.validate();
    check_shapes();
    if (!all_finite()) throw std::invalid_argument("network parameters must be finite");
}

EmbeddingNet EmbeddingNet::init(const NetSpec& spec) {
    spec.validate();
    std::vector<int> widths{spec.input_dim};
    widths.insert(widths.end(), spec.hidden_dims.begin(), spec.hidden_dims.end());
    widths.push_back(spec.embed_dim);

    Rng rng(spec.init_seed);
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const int fan_in = widths[l];
        const int fan_out = widths[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> uniform(-limit, limit);
        DenseLayer layer;
        layer.weight.resize(fan_out, fan_in);
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = uniform(rng);
        layer.bias = Vector::Zero(fan_out);
        layers.push_back(std::move(layer));
    }
    return EmbeddingNet(spec, std::move(layers));
}

void EmbeddingNet::check_shapes() const {
    if (layers_.size() != spec_.hidden_dims.size() + 1) {
        throw std::invalid_argument("layer count does not match hidden_dims");
    }
    Eigen::Index in = spec_.input_dim;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Eigen::Index out =
            l < spec_.hidden_dims.size() ? spec_.hidden_dims[l] : spec_.embed_dim;
        const auto& layer = layers_[l];
        if (layer.weight.rows() != out || layer.weight.cols() != in || layer.bias.size() != out) {
            throw std::invalid_argument("layer " + std::to_string(l) + " shape mismatch");
        }
        in = out;
    }
}

Vector EmbeddingNet::forward(const Eigen::Ref<const Vector>& x) const {
    if (x.size() != spec_.input_dim) {
        throw std::invalid_argument("input has length " + std::to_string(x.size()) +
                                    ", network expects " + std::to_string(spec_.input_dim));
    }
    if (!x.allFinite()) throw std::invalid_argument("input contains non-finite values");
    Vector act = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Vector z = layers_[l].weight * act + layers_[l].bias;
        if (l + 1 < layers_.size()) apply_leaky(z, spec_.leaky_slope);
        act = std::move(z);
    }
    return act;
}

Matrix EmbeddingNet::forward_batch(const Matrix& inputs) const {
    Matrix out(inputs.rows(), spec_.embed_dim);
    for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
        out.row(i) = forward(inputs.row(i).transpose()).transpose();
    }
    return out;
}

std::size_t EmbeddingNet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) {
        n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
    }
    return n;
}

std::vector<double> EmbeddingNet::flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& layer : layers_) {
        out.insert(out.end(), layer.weight.data(), layer.weight.data() + layer.weight.size());
        out.insert(out.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
    }
    return out;
}

void EmbeddingNet::assign(std::span<const double> params) {
    if (params.size() != parameter_count()) {
        throw std::invalid_argument("parameter vector has the wrong length");
    }
    std::size_t offset = 0;
    for (auto& layer : layers_) {
        std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(offset), layer.weight.size(),
                    layer.weight.data());
        offset += static_cast<std::size_t>(layer.weight.size());
        std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(offset), layer.bias.size(),
                    layer.bias.data());
        offset += static_cast<std::size_t>(layer.bias.size());
    }
}

NetGradient EmbeddingNet::zero_gradient() const {
    NetGradient g;
    for (const auto& layer : layers_) {
        g.layers.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                            Vector::Zero(layer.bias.size())});
    }
    return g;
}

bool EmbeddingNet::all_finite() const {
    for (const auto& layer : layers_) {
        if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
    }
    return true;
}

double distance(std::span<const double> fa, std::span<const double> fb) {
    if (fa.size() != fb.size()) {
        throw std::invalid_argument("distance: vectors of length " + std::to_string(fa.size()) +
                                    " and " + std::to_string(fb.size()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) {
        const double diff = fa[i] - fb[i];
        sum += diff * diff;
    }
    return std::sqrt(sum);
}

double distance(const Eigen::Ref<const Vector>& fa, const Eigen::Ref<const Vector>& fb) {
    return distance(std::span<const double>(fa.data(), static_cast<std::size_t>(fa.size())),
                    std::span<const double>(fb.data(), static_cast<std::size_t>(fb.size())));
}

// Model document, whitespace separated:
//   sds-embedding-net <version>
//   input_dim <d>
//   hidden_dims <count> <w1> ... <wk>
//   embed_dim <m>
//   leaky_slope <alpha>
//   init_seed <seed>
//   layer <index> <rows> <cols>
//   weight <rows*cols values, row-major>
//   bias <rows values>
//   (one layer block per layer)
//   end
void save_net(const EmbeddingNet& net, std::ostream& out) {
    const auto& spec = net.spec();
    out << kMagic << ' ' << kFormatVersion << '\n';
    out << "input_dim " << spec.input_dim << '\n';
    out << "hidden_dims " << spec.hidden_dims.size();
    for (int w : spec.hidden_dims) out << ' ' << w;
    out << '\n';
    out << "embed_dim " << spec.embed_dim << '\n';
    out << "leaky_slope " << format_double(spec.leaky_slope) << '\n';
    out << "init_seed " << spec.init_seed << '\n';
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        const auto& layer = net.layers()[l];
        out << "layer " << l << ' ' << layer.weight.rows() << ' ' << layer.weight.cols() << '\n';
        out << "weight";
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
                out << ' ' << format_double(layer.weight(r, c));
            }
        }
        out << '\n' << "bias";
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) out << ' ' << format_double(layer.bias(r));
        out << '\n';
    }
    out << "end\n";
}

void save_net(const EmbeddingNet& net, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    save_net(net, out);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

namespace {

class TokenReader {
public:
    explicit TokenReader(std::istream& in) : in_(in) {}

    std::string word() {
        std::string token;
        if (!(in_ >> token)) throw ParseError("model file truncated");
        return token;
    }

    void expect(const std::string& keyword) {
        const auto token = word();
        if (token != keyword) {
            throw ParseError("model file: expected '" + keyword + "', found '" + token + "'");
        }
    }

    long long integer() {
        const auto token = word();
        long long v = 0;
        const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
        if (ec != std::errc{} || ptr != token.data() + token.size()) {
            throw ParseError("model file: bad integer '" + token + "'");
        }
        return v;
    }

    std::uint64_t unsigned_integer() {
        const auto token = word();
        std::uint64_t v = 0;
        const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
        if (ec != std::errc{} || ptr != token.data() + token.size()) {
            throw ParseError("model file: bad integer '" + token + "'");
        }
        return v;
    }

    double real() {
        const auto token = word();
        double v = 0;
        const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
        if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(v)) {
            throw ParseError("model file: bad number '" + token + "'");
        }
        return v;
    }

private:
    std::istream& in_;
};

}  // namespace

EmbeddingNet load_net(std::istream& in) {
    TokenReader reader(in);
    reader.expect(kMagic);
    const auto version = reader.integer();
    if (version != kFormatVersion) {
        throw ParseError("model file: unsupported format version " + std::to_string(version));
    }
    NetSpec spec;
    reader.expect("input_dim");
    spec.input_dim = static_cast<int>(reader.integer());
    reader.expect("hidden_dims");
    const auto hidden_count = reader.integer();
    if (hidden_count < 0 || hidden_count > 1024) throw ParseError("model file: bad hidden_dims count");
    spec.hidden_dims.clear();
    for (long long i = 0; i < hidden_count; ++i) spec.hidden_dims.push_back(static_cast<int>(reader.integer()));
    reader.expect("embed_dim");
    spec.embed_dim = static_cast<int>(reader.integer());
    reader.expect("leaky_slope");
    spec.leaky_slope = reader.real();
    reader.expect("init_seed");
    spec.init_seed = reader.unsigned_integer();
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(std::string("model file: ") + e.what());
    }

    std::vector<int> widths{spec.input_dim};
    widths.insert(widths.end(), spec.hidden_dims.begin(), spec.hidden_dims.end());
    widths.push_back(spec.embed_dim);

    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        reader.expect("layer");
        const auto index = reader.integer();
        const auto rows = reader.integer();
        const auto cols = reader.integer();
        if (index != static_cast<long long>(l) || rows != widths[l + 1] || cols != widths[l]) {
            throw ParseError("model file: layer " + std::to_string(l) + " declares shape " +
                             std::to_string(rows) + "x" + std::to_string(cols) + ", expected " +
                             std::to_string(widths[l + 1]) + "x" + std::to_string(widths[l]));
        }
        DenseLayer layer;
        layer.weight.resize(rows, cols);
        reader.expect("weight");
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) layer.weight(r, c) = reader.real();
        }
        layer.bias.resize(rows);
        reader.expect("bias");
        for (Eigen::Index r = 0; r < rows; ++r) layer.bias(r) = reader.real();
        layers.push_back(std::move(layer));
    }
    reader.expect("end");
    return EmbeddingNet(std::move(spec), std::move(layers));
}

EmbeddingNet load_net(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return load_net(in);
}

}  // namespace sds
