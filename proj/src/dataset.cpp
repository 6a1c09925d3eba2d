#include "sds/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "sds/errors.hpp"
#include "sds/seed.hpp"

namespace sds {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_cells(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.push_back(trim(line.substr(start)));
            break;
        }
        cells.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return cells;
}

std::optional<double> parse_double(std::string_view cell) {
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty()) return std::nullopt;
    return value;
}

std::optional<long long> parse_label(std::string_view cell) {
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    long long value = 0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty()) return std::nullopt;
    return value;
}

std::vector<std::vector<std::size_t>> rows_by_class(const Dataset& data) {
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.class_count));
    for (std::size_t i = 0; i < data.size(); ++i) {
        by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
    }
    return by_class;
}

}  // namespace

std::vector<std::size_t> Dataset::class_histogram() const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(class_count, 0)), 0);
    for (int label : labels) {
        if (label >= 0 && label < class_count) ++counts[static_cast<std::size_t>(label)];
    }
    return counts;
}

void Dataset::validate() const {
    if (labels.empty()) throw std::invalid_argument("dataset has no rows");
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw std::invalid_argument("dataset feature rows (" + std::to_string(features.rows()) +
                                    ") differ from label count (" +
                                    std::to_string(labels.size()) + ")");
    }
    if (features.cols() < 1) throw std::invalid_argument("dataset dimension must be at least 1");
    if (class_count < 1) throw std::invalid_argument("dataset class count must be positive");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= class_count) {
            throw std::invalid_argument("label " + std::to_string(labels[i]) + " at row " +
                                        std::to_string(i) + " outside [0, " +
                                        std::to_string(class_count) + ")");
        }
    }
}

Dataset Dataset::select(const std::vector<std::size_t>& rows) const {
    Dataset out;
    out.class_count = class_count;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.features.row(static_cast<Eigen::Index>(i)) =
            features.row(static_cast<Eigen::Index>(rows[i]));
        out.labels.push_back(labels[rows[i]]);
    }
    return out;
}

void MixtureSpec::validate() const {
    if (class_count < 1) throw std::invalid_argument("mixture class_count must be >= 1");
    if (dimension < 1) throw std::invalid_argument("mixture dimension must be >= 1");
    if (!(within_sigma > 0.0)) throw std::invalid_argument("mixture within_sigma must be > 0");
    if (per_class_count < 1) throw std::invalid_argument("mixture per_class_count must be >= 1");
    if (!std::isfinite(mode_radius)) throw std::invalid_argument("mixture mode_radius must be finite");
}

Dataset load_csv(const std::filesystem::path& path, std::optional<std::size_t> label_column) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::size_t arity = 0;
    std::size_t label_at = 0;
    std::string line;
    std::size_t line_no = 0;
    bool first_content = true;

    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = trim(line);
        if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
        if (view.empty()) continue;
        const auto cells = split_cells(view);

        if (first_content) {
            first_content = false;
            arity = cells.size();
            if (arity < 2) {
                throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                                 ": need at least one feature column and a label column");
            }
            label_at = label_column.value_or(arity - 1);
            if (label_at >= arity) {
                throw ParseError(path.string() + ": label column " + std::to_string(label_at) +
                                 " out of range for " + std::to_string(arity) + " columns");
            }
            if (!parse_double(cells.front())) continue;  // header line
        }

        if (cells.size() != arity) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": expected " +
                             std::to_string(arity) + " cells, found " +
                             std::to_string(cells.size()));
        }
        std::vector<double> features;
        features.reserve(arity - 1);
        for (std::size_t c = 0; c < arity; ++c) {
            if (c == label_at) {
                const auto label = parse_label(cells[c]);
                if (!label || *label < 0 || *label > std::numeric_limits<int>::max() - 1) {
                    throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                                     ", column " + std::to_string(c + 1) +
                                     ": label is not a non-negative integer: '" +
                                     std::string(cells[c]) + "'");
                }
                labels.push_back(static_cast<int>(*label));
                continue;
            }
            const auto value = parse_double(cells[c]);
            if (!value || !std::isfinite(*value)) {
                throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                                 ", column " + std::to_string(c + 1) +
                                 ": not a finite number: '" + std::string(cells[c]) + "'");
            }
            features.push_back(*value);
        }
        rows.push_back(std::move(features));
    }

    if (rows.empty()) throw EmptyInputError(path.string() + ": no data rows");

    Dataset data;
    data.features.resize(static_cast<Eigen::Index>(rows.size()),
                         static_cast<Eigen::Index>(arity - 1));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < arity - 1; ++j) {
            data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    data.labels = std::move(labels);
    data.class_count = *std::max_element(data.labels.begin(), data.labels.end()) + 1;
    return data;
}

Matrix load_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = trim(line);
        if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
        if (view.empty()) continue;
        const auto cells = split_cells(view);
        if (rows.empty() && !parse_double(cells.front())) continue;  // header line
        if (!rows.empty() && cells.size() != rows.front().size()) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": expected " +
                             std::to_string(rows.front().size()) + " cells, found " +
                             std::to_string(cells.size()));
        }
        std::vector<double> values;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto value = parse_double(cells[c]);
            if (!value || !std::isfinite(*value)) {
                throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                                 ", column " + std::to_string(c + 1) +
                                 ": not a finite number: '" + std::string(cells[c]) + "'");
            }
            values.push_back(*value);
        }
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw EmptyInputError(path.string() + ": no data rows");
    Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return out;
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    char buf[32];
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
            const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf),
                                                 data.features(static_cast<Eigen::Index>(i), j));
            out.write(buf, end - buf);
            out.put(',');
        }
        out << data.labels[i] << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

DataSplit split(const Dataset& data, SplitFractions fractions, std::uint64_t seed) {
    data.validate();
    const double f[3] = {fractions.generator, fractions.siamese, fractions.eval};
    for (double x : f) {
        if (!(x > 0.0)) throw std::invalid_argument("split fractions must be positive");
    }
    if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) {
        throw std::invalid_argument("split fractions must sum to 1");
    }

    Rng rng(seed);
    std::vector<std::size_t> parts[3];
    const auto by_class = rows_by_class(data);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto rows = by_class[c];
        if (rows.empty()) continue;
        if (rows.size() < 3) {
            throw std::invalid_argument("class " + std::to_string(c) + " has " +
                                        std::to_string(rows.size()) +
                                        " samples; stratified split needs at least 3");
        }
        std::shuffle(rows.begin(), rows.end(), rng);
        std::size_t counts[3];
        std::size_t assigned = 0;
        for (int p = 0; p < 3; ++p) {
            counts[p] = static_cast<std::size_t>(std::floor(f[p] * static_cast<double>(rows.size())));
            assigned += counts[p];
        }
        for (std::size_t r = 0; assigned < rows.size(); ++r, ++assigned) ++counts[r % 3];

        std::size_t offset = 0;
        for (int p = 0; p < 3; ++p) {
            parts[p].insert(parts[p].end(), rows.begin() + static_cast<std::ptrdiff_t>(offset),
                            rows.begin() + static_cast<std::ptrdiff_t>(offset + counts[p]));
            offset += counts[p];
        }
    }

    DataSplit out;
    for (auto& p : parts) std::sort(p.begin(), p.end());
    out.generator_rows = std::move(parts[0]);
    out.siamese_rows = std::move(parts[1]);
    out.eval_rows = std::move(parts[2]);
    out.generator_part = data.select(out.generator_rows);
    out.siamese_part = data.select(out.siamese_rows);
    out.eval_part = data.select(out.eval_rows);
    out.seed = seed;
    return out;
}

PairBatch make_pairs(const Dataset& data, std::size_t pair_count, double genuine_fraction,
                     std::uint64_t seed) {
    data.validate();
    if (pair_count == 0) throw std::invalid_argument("pair_count must be positive");
    if (!(genuine_fraction >= 0.0 && genuine_fraction <= 1.0)) {
        throw std::invalid_argument("genuine_fraction must lie in [0, 1]");
    }
    const auto genuine_count = static_cast<std::size_t>(
        std::llround(static_cast<double>(pair_count) * genuine_fraction));
    const std::size_t impostor_count = pair_count - genuine_count;

    const auto by_class = rows_by_class(data);
    const std::size_t n = data.size();

    // Unordered genuine pairs per class: n_c (n_c - 1) / 2.
    std::vector<double> genuine_weight(by_class.size());
    double genuine_total = 0.0;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        const double nc = static_cast<double>(by_class[c].size());
        genuine_weight[c] = nc * (nc - 1.0) / 2.0;
        genuine_total += genuine_weight[c];
    }
    // Choosing the first member with weight n - n_c and the second uniformly
    // among other classes makes every unordered impostor pair equally likely.
    std::vector<double> impostor_weight(n);
    double impostor_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        impostor_weight[i] =
            static_cast<double>(n - by_class[static_cast<std::size_t>(data.labels[i])].size());
        impostor_total += impostor_weight[i];
    }
    if (genuine_count > 0 && genuine_total == 0.0) {
        throw std::invalid_argument("cannot form genuine pairs: no class has two samples");
    }
    if (impostor_count > 0 && impostor_total == 0.0) {
        throw std::invalid_argument("cannot form impostor pairs: dataset has a single class");
    }

    Rng rng(seed);
    PairBatch batch;
    batch.source = &data;
    batch.pairs.reserve(pair_count);

    if (genuine_count > 0) {
        std::discrete_distribution<std::size_t> pick_class(genuine_weight.begin(),
                                                           genuine_weight.end());
        for (std::size_t k = 0; k < genuine_count; ++k) {
            const auto& members = by_class[pick_class(rng)];
            std::uniform_int_distribution<std::size_t> first(0, members.size() - 1);
            std::uniform_int_distribution<std::size_t> second(0, members.size() - 2);
            const std::size_t a = first(rng);
            std::size_t b = second(rng);
            if (b >= a) ++b;
            batch.pairs.push_back({members[a], members[b], true});
        }
    }
    if (impostor_count > 0) {
        std::discrete_distribution<std::size_t> pick_row(impostor_weight.begin(),
                                                         impostor_weight.end());
        for (std::size_t k = 0; k < impostor_count; ++k) {
            const std::size_t a = pick_row(rng);
            const auto own = static_cast<std::size_t>(data.labels[a]);
            std::uniform_int_distribution<std::size_t> other(0, n - by_class[own].size() - 1);
            std::size_t offset = other(rng);
            std::size_t b = 0;
            for (std::size_t c = 0; c < by_class.size(); ++c) {
                if (c == own) continue;
                if (offset < by_class[c].size()) {
                    b = by_class[c][offset];
                    break;
                }
                offset -= by_class[c].size();
            }
            batch.pairs.push_back({a, b, false});
        }
    }
    std::shuffle(batch.pairs.begin(), batch.pairs.end(), rng);
    return batch;
}

PairBatch make_all_pairs(const Dataset& data) {
    data.validate();
    if (data.size() < 2) throw std::invalid_argument("need at least two rows to form pairs");
    PairBatch batch;
    batch.source = &data;
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t j = i + 1; j < data.size(); ++j) {
            batch.pairs.push_back({i, j, data.labels[i] == data.labels[j]});
        }
    }
    return batch;
}

Dataset gen_mixture(const MixtureSpec& spec) {
    spec.validate();
    const auto classes = static_cast<std::size_t>(spec.class_count);
    const auto per_class = static_cast<std::size_t>(spec.per_class_count);
    Dataset data;
    data.class_count = spec.class_count;
    data.features.resize(static_cast<Eigen::Index>(classes * per_class), spec.dimension);
    data.labels.reserve(classes * per_class);

    Rng rng(spec.seed);
    std::normal_distribution<double> noise(0.0, spec.within_sigma);
    Eigen::Index row = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) /
                             static_cast<double>(classes);
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(spec.dimension);
        mean(0) = spec.mode_radius * std::cos(angle);
        if (spec.dimension > 1) mean(1) = spec.mode_radius * std::sin(angle);
        for (std::size_t k = 0; k < per_class; ++k, ++row) {
            for (int j = 0; j < spec.dimension; ++j) data.features(row, j) = mean(j) + noise(rng);
            data.labels.push_back(static_cast<int>(c));
        }
    }
    return data;
}

Dataset filter_classes(const Dataset& data, const std::set<int>& keep) {
    if (keep.empty()) throw std::invalid_argument("filter_classes: keep set is empty");
    for (int c : keep) {
        if (c < 0 || c >= data.class_count) {
            throw std::invalid_argument("filter_classes: class " + std::to_string(c) +
                                        " outside [0, " + std::to_string(data.class_count) + ")");
        }
    }
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (keep.contains(data.labels[i])) rows.push_back(i);
    }
    if (rows.empty()) throw EmptyInputError("filter_classes: no rows carry the selected classes");
    return data.select(rows);
}

Dataset subsample_per_class(const Dataset& data, double fraction, std::size_t per_class,
                            std::uint64_t seed) {
    data.validate();
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw std::invalid_argument("subsample fraction must lie in (0, 1]");
    }
    if (per_class == 0) throw std::invalid_argument("per-class target must be positive");

    Rng rng(seed);
    std::vector<std::size_t> rows;
    for (const auto& members : rows_by_class(data)) {
        if (members.empty()) continue;
        const auto pool_size = static_cast<std::size_t>(
            std::ceil(fraction * static_cast<double>(members.size()) - 1e-9));
        if (pool_size == 0) throw EmptyInputError("subsample_per_class: empty class pool");
        auto pool = members;
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(pool_size);

        const std::size_t distinct = std::min(pool_size, per_class);
        rows.insert(rows.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(distinct));
        std::uniform_int_distribution<std::size_t> draw(0, pool_size - 1);
        for (std::size_t k = distinct; k < per_class; ++k) rows.push_back(pool[draw(rng)]);
    }
    return data.select(rows);
}

Dataset degrade(const Dataset& data, double noise_sigma, std::uint64_t seed) {
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise sigma must be >= 0");
    Dataset out = data;
    if (noise_sigma == 0.0) return out;
    Rng rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (Eigen::Index i = 0; i < out.features.rows(); ++i) {
        for (Eigen::Index j = 0; j < out.features.cols(); ++j) out.features(i, j) += noise(rng);
    }
    return out;
}

}  // namespace sds
