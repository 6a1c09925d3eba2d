#include "sds/cli.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <type_traits>

#include "CLI11.hpp"
#include "sds/contrastive.hpp"
#include "sds/dataset.hpp"
#include "sds/embedding_net.hpp"
#include "sds/errors.hpp"
#include "sds/experiments.hpp"
#include "sds/mmd.hpp"
#include "sds/sds_metric.hpp"
#include "sds/seed.hpp"
#include "sds/stats.hpp"

namespace sds::cli {

namespace {

namespace fs = std::filesystem;

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::string format_double(double v) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
    if constexpr (std::is_same_v<T, std::string>) {
        return text;
    } else {
        T value{};
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
            throw std::invalid_argument("config key '" + key + "': cannot parse '" + text + "'");
        }
        return value;
    }
}

template <typename T>
std::vector<T> parse_list(const std::string& what, const std::string& text) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_value<T>(what, trim(item)));
    if (out.empty()) throw std::invalid_argument(what + ": empty list");
    return out;
}

struct Settings {
    std::string config_path;
    std::uint64_t seed = 0;
    int threads = 0;
    std::string out_dir = ".";

    std::string label_column = "last";
    std::string split_fractions = "0.4,0.4,0.2";

    std::string hidden_dims = "128,128,128";
    int embed_dim = 64;
    double leaky_slope = 0.01;

    double margin = 1.0;
    double learning_rate = 0.05;
    int epochs = 50;
    std::size_t batch_size = 64;
    std::size_t pair_count = 0;
    double genuine_fraction = 0.5;
    std::string margin_candidates;
    int folds = 3;

    std::size_t k = 1;
    std::string mmd_bandwidth = "median";

    int repetitions = 10;
    int classes = 10;
    int dimension = 8;
    double radius = 10.0;
    double within_sigma = 1.0;
    int per_class = 200;
    std::string intraclass_fractions = "0.1,0.25,0.5,0.75,1";
    std::string quality_sigmas = "0,0.5,1,2,4";
    std::string ranking_sigmas = "0.5,1,2";
};

// Ties a config-file key to a settings field and to every CLI option that
// can also set it, so command-line values win over the file.
class Bindings {
public:
    template <typename T>
    CLI::Option* add(CLI::App* app, const std::string& flag, T& field, const std::string& key,
                     const std::string& help) {
        CLI::Option* opt = app->add_option(flag, field, help)->capture_default_str();
        track(opt, field, key);
        return opt;
    }

    template <typename T>
    void track(CLI::Option* opt, T& field, const std::string& key) {
        auto& entry = entries_[key];
        entry.options.push_back(opt);
        if (!entry.set) {
            entry.set = [&field, key](const std::string& text) { field = parse_value<T>(key, text); };
        }
    }

    void apply(const std::map<std::string, std::string>& config) const {
        for (const auto& [key, value] : config) {
            const auto it = entries_.find(key);
            if (it == entries_.end()) throw std::invalid_argument("unknown config key '" + key + "'");
            bool given = false;
            for (const auto* opt : it->second.options) given = given || opt->count() > 0;
            if (!given) it->second.set(value);
        }
    }

private:
    struct Entry {
        std::vector<CLI::Option*> options;
        std::function<void(const std::string&)> set;
    };
    std::map<std::string, Entry> entries_;
};

std::optional<std::size_t> label_column_of(const Settings& s) {
    if (s.label_column == "last") return std::nullopt;
    return parse_value<std::size_t>("data.label_column", s.label_column);
}

NetSpec net_spec_of(const Settings& s, int input_dim) {
    NetSpec spec;
    spec.input_dim = input_dim;
    spec.hidden_dims.clear();
    if (!trim(s.hidden_dims).empty() && trim(s.hidden_dims) != "none") {
        spec.hidden_dims = parse_list<int>("net.hidden_dims", s.hidden_dims);
    }
    spec.embed_dim = s.embed_dim;
    spec.leaky_slope = s.leaky_slope;
    spec.init_seed = derive_seed(s.seed, "init");
    spec.validate();
    return spec;
}

TrainConfig train_config_of(const Settings& s) {
    TrainConfig cfg;
    cfg.margin = s.margin;
    cfg.learning_rate = s.learning_rate;
    cfg.epochs = s.epochs;
    cfg.batch_size = s.batch_size;
    cfg.pair_count = s.pair_count;
    cfg.genuine_fraction = s.genuine_fraction;
    cfg.seed = derive_seed(s.seed, "train");
    cfg.validate();
    return cfg;
}

MmdConfig mmd_config_of(const Settings& s) {
    if (s.mmd_bandwidth == "median" || s.mmd_bandwidth == "median-heuristic") return {};
    const double bw = parse_value<double>("mmd.bandwidth", s.mmd_bandwidth);
    if (!(bw > 0.0)) throw std::invalid_argument("mmd bandwidth must be > 0");
    return {bw};
}

fs::path prepare_out_dir(const Settings& s) {
    const fs::path dir(s.out_dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    body(out);
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y%m%d-%H%M%S");
    return ss.str();
}

void print_histogram(std::ostream& out, const std::string& part, const Dataset& data) {
    out << part << ',' << data.size();
    for (auto count : data.class_histogram()) out << ',' << count;
    out << '\n';
}

int cmd_split(const Settings& s, const std::string& input, std::ostream& out) {
    const Dataset data = load_csv(input, label_column_of(s));
    const auto f = parse_list<double>("split.fractions", s.split_fractions);
    if (f.size() != 3) throw std::invalid_argument("split fractions need three values");
    const DataSplit parts = split(data, {f[0], f[1], f[2]}, derive_seed(s.seed, "split"));

    const fs::path dir = prepare_out_dir(s);
    const std::string stem = fs::path(input).stem().string();
    save_csv(parts.generator_part, dir / (stem + ".g.csv"));
    save_csv(parts.siamese_part, dir / (stem + ".s.csv"));
    save_csv(parts.eval_part, dir / (stem + ".e.csv"));

    out << "part,rows";
    for (int c = 0; c < data.class_count; ++c) out << ",class_" << c;
    out << '\n';
    print_histogram(out, "source", data);
    print_histogram(out, "g", parts.generator_part);
    print_histogram(out, "s", parts.siamese_part);
    print_histogram(out, "e", parts.eval_part);
    return 0;
}

int cmd_train(const Settings& s, const std::string& input, const std::string& model_path,
              const std::string& report_name, std::ostream& out) {
    const Dataset data = load_csv(input, label_column_of(s));
    const NetSpec spec = net_spec_of(s, static_cast<int>(data.dim()));
    TrainConfig cfg = train_config_of(s);

    if (!s.margin_candidates.empty()) {
        const auto candidates = parse_list<double>("train.margin_candidates", s.margin_candidates);
        const auto selection = select_margin(data, spec, candidates, cfg, s.folds);
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            out << "margin " << format_double(candidates[i]) << " heldout_1nn_accuracy "
                << format_double(selection.accuracies[i]) << '\n';
        }
        out << "selected_margin " << format_double(selection.margin) << '\n';
        cfg.margin = selection.margin;
    }

    const auto result = train(EmbeddingNet::init(spec), data, cfg, &out);
    const fs::path dir = prepare_out_dir(s);
    const fs::path model = model_path.empty() ? dir / "model.txt" : fs::path(model_path);
    if (model.has_parent_path()) fs::create_directories(model.parent_path());
    save_net(result.net, model);
    write_file(dir / report_name, [&](std::ostream& o) { write_train_report_csv(result.report, o); });
    out << "genuine_mean_distance " << format_double(result.report.genuine_mean_distance) << '\n';
    out << "impostor_mean_distance " << format_double(result.report.impostor_mean_distance) << '\n';
    out << "model " << model.string() << '\n';
    return 0;
}

// Fake files may omit the label column; a column count of d + 1 means the
// last column is a label and is dropped.
Dataset load_fake(const std::string& path, int input_dim) {
    const Matrix table = load_matrix_csv(path);
    Dataset fake;
    fake.class_count = 1;
    if (table.cols() == input_dim) {
        fake.features = table;
    } else if (table.cols() == input_dim + 1) {
        fake.features = table.leftCols(input_dim);
    } else {
        throw std::invalid_argument("fake file " + path + " has " + std::to_string(table.cols()) +
                                    " columns; model expects " + std::to_string(input_dim) +
                                    " features");
    }
    fake.labels.assign(static_cast<std::size_t>(fake.features.rows()), 0);
    return fake;
}

int cmd_score(const Settings& s, const std::string& model_path, const std::string& real_path,
              const std::string& fake_path, bool with_mmd, const std::string& report_name,
              std::ostream& out) {
    const EmbeddingNet net = load_net(fs::path(model_path));
    const Dataset real = load_csv(real_path, label_column_of(s));
    if (static_cast<int>(real.dim()) != net.input_dim()) {
        throw std::invalid_argument("real file has " + std::to_string(real.dim()) +
                                    " features; model expects " + std::to_string(net.input_dim()));
    }
    const Dataset fake = load_fake(fake_path, net.input_dim());
    const auto report = score_set(net, real, fake, SdsConfig{s.k});

    const fs::path dir = prepare_out_dir(s);
    write_file(dir / report_name, [&](std::ostream& o) { write_report_csv(report, o); });
    out << "aggregate_sds " << format_double(report.aggregate_sds) << '\n';
    if (with_mmd) {
        out << "mmd2 " << format_double(mmd2(real.features, fake.features, mmd_config_of(s))) << '\n';
    }
    return 0;
}

ExperimentConfig experiment_config_of(const Settings& s, const std::string& data_path) {
    ExperimentConfig cfg;
    cfg.repetitions = s.repetitions;
    cfg.mixture = MixtureSpec{s.classes, s.dimension, s.radius, s.within_sigma, s.per_class, 0};
    if (!data_path.empty()) cfg.data = load_csv(data_path, label_column_of(s));
    const auto f = parse_list<double>("split.fractions", s.split_fractions);
    if (f.size() != 3) throw std::invalid_argument("split fractions need three values");
    cfg.fractions = {f[0], f[1], f[2]};
    const int dim = cfg.data ? static_cast<int>(cfg.data->dim()) : s.dimension;
    cfg.net = net_spec_of(s, dim);
    cfg.train = train_config_of(s);
    cfg.sds.k = s.k;
    cfg.seed = derive_seed(s.seed, "experiment");
    cfg.threads = s.threads;
    cfg.validate();
    return cfg;
}

const char* verdict(bool ok) { return ok ? "PASS" : "FAIL"; }

int cmd_experiment(const Settings& s, const std::string& name, const std::string& data_path,
                   const std::vector<std::string>& fake_paths, const std::string& file_name,
                   std::ostream& out) {
    const ExperimentConfig cfg = experiment_config_of(s, data_path);
    const fs::path dir = prepare_out_dir(s);
    const fs::path csv = dir / (file_name.empty() ? name + "-" + timestamp() + ".csv" : file_name);

    if (name == "mode") {
        const auto report = mode_experiment(cfg);
        write_file(csv, [&](std::ostream& o) { write_series_csv(report, o); });
        const std::size_t half = report.x_values.size() / 2;
        const auto& m = report.mean_scores;
        const bool minimum_at_half = argmin(m) == half - 1;
        out << "mode: minimum at i=" << half << ": " << verdict(minimum_at_half)
            << "; SDS(1) > SDS(" << half << "): " << verdict(m.front() > m[half - 1])
            << "; SDS(" << m.size() << ") > SDS(" << half << "): " << verdict(m.back() > m[half - 1])
            << '\n';
    } else if (name == "intraclass") {
        const auto fractions = parse_list<double>("experiment.fractions", s.intraclass_fractions);
        const auto report = intraclass_experiment(cfg, fractions);
        write_file(csv, [&](std::ostream& o) { write_series_csv(report, o); });
        const auto lo = std::min_element(fractions.begin(), fractions.end()) - fractions.begin();
        const auto hi = std::max_element(fractions.begin(), fractions.end()) - fractions.begin();
        out << "intraclass: SDS(p=" << format_double(fractions[lo]) << ") > SDS(p="
            << format_double(fractions[hi]) << "): "
            << verdict(report.mean_scores[lo] > report.mean_scores[hi]) << '\n';
    } else if (name == "quality") {
        const auto sigmas = parse_list<double>("experiment.sigmas", s.quality_sigmas);
        const auto report = quality_experiment(cfg, sigmas);
        write_file(csv, [&](std::ostream& o) { write_series_csv(report.series, o); });
        out << "quality: spearman(sigma, SDS) = " << format_double(report.spearman) << ": "
            << verdict(report.spearman >= 0.9) << '\n';
    } else if (name == "ranking") {
        std::vector<FakeSource> sources;
        if (fake_paths.empty()) {
            sources = degradation_sources(parse_list<double>("experiment.ranking_sigmas", s.ranking_sigmas));
        } else {
            if (!cfg.data) throw std::invalid_argument("--fake requires --data with the real samples");
            for (const auto& path : fake_paths) {
                const Dataset fake = load_fake(path, static_cast<int>(cfg.data->dim()));
                sources.push_back({fs::path(path).stem().string(),
                                   [fake](const DataSplit&, std::uint64_t) { return fake; }});
            }
        }
        const auto report = ranking_experiment(cfg, sources);
        write_file(csv, [&](std::ostream& o) { write_ranking_csv(report, o); });
        std::size_t agree = 0;
        for (double t : report.repetition_tau) agree += t == 1.0 ? 1 : 0;
        out << "ranking: kendall tau(SDS, MMD) = " << format_double(report.mean_tau)
            << "; tau = 1 in " << agree << " of " << report.repetition_tau.size()
            << " repetitions: " << verdict(report.mean_tau == 1.0) << '\n';
    } else {
        throw std::invalid_argument("unknown experiment '" + name + "'");
    }
    out << "wrote " << csv.string() << '\n';
    return 0;
}

}  // namespace

std::map<std::string, std::string> read_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path.string());
    std::map<std::string, std::string> values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                             ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": empty key");
        }
        values[key] = trim(line.substr(eq + 1));
    }
    return values;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Settings s;
    Bindings bind;
    CLI::App app{"Siamese Distance Score: train a contrastive embedding and score generated samples"};
    app.require_subcommand(1);
    app.add_option("--config", s.config_path, "flat key=value config file");
    auto* seed_opt = app.add_option("--seed", s.seed, "master seed")->capture_default_str();
    auto* threads_opt = app.add_option("--threads", s.threads, "worker threads (0 = all cores)")
                            ->capture_default_str();
    auto* out_opt = app.add_option("--out", s.out_dir, "output directory")->capture_default_str();

    std::string input;
    std::string model_path;
    std::string real_path;
    std::string fake_path;
    std::string data_path;
    std::string experiment_name;
    std::string file_name;
    std::string train_report;
    std::string score_report;
    std::vector<std::string> fake_paths;
    bool with_mmd = false;

    auto add_data_flags = [&](CLI::App* sub) {
        bind.add(sub, "--label-column", s.label_column, "data.label_column", "label column index or 'last'");
    };
    auto add_net_flags = [&](CLI::App* sub) {
        bind.add(sub, "--hidden", s.hidden_dims, "net.hidden_dims", "hidden widths, comma separated");
        bind.add(sub, "--embed-dim", s.embed_dim, "net.embed_dim", "embedding width");
        bind.add(sub, "--leaky-slope", s.leaky_slope, "net.leaky_slope", "leaky ReLU negative slope");
    };
    auto add_train_flags = [&](CLI::App* sub) {
        bind.add(sub, "--margin", s.margin, "train.margin", "contrastive margin");
        bind.add(sub, "--lr", s.learning_rate, "train.learning_rate", "learning rate");
        bind.add(sub, "--epochs", s.epochs, "train.epochs", "training epochs");
        bind.add(sub, "--batch-size", s.batch_size, "train.batch_size", "pairs per mini-batch");
        bind.add(sub, "--pairs", s.pair_count, "train.pair_count", "pairs per epoch (0 = 10 x rows)");
        bind.add(sub, "--genuine-fraction", s.genuine_fraction, "train.genuine_fraction",
                 "share of genuine pairs");
    };
    auto add_split_flags = [&](CLI::App* sub) {
        bind.add(sub, "--fractions", s.split_fractions, "split.fractions", "G,S,E fractions");
    };

    auto* split_cmd = app.add_subcommand("split", "stratified G/S/E split of a CSV file");
    split_cmd->fallthrough();
    split_cmd->add_option("input", input, "labeled CSV")->required();
    add_data_flags(split_cmd);
    add_split_flags(split_cmd);

    auto* train_cmd = app.add_subcommand("train", "train the embedding network on labeled data");
    train_cmd->fallthrough();
    train_cmd->add_option("input", input, "labeled CSV (the S partition)")->required();
    train_cmd->add_option("--model", model_path, "model output path (default <out>/model.txt)");
    train_cmd->add_option("--report", train_report, "report file name inside --out")
        ->default_val("train-report.csv");
    bind.add(train_cmd, "--select-margin", s.margin_candidates, "train.margin_candidates",
             "choose the margin from these candidates by cross-validation");
    bind.add(train_cmd, "--folds", s.folds, "train.folds", "folds for margin selection");
    add_data_flags(train_cmd);
    add_net_flags(train_cmd);
    add_train_flags(train_cmd);

    auto* score_cmd = app.add_subcommand("score", "score fake samples against real samples");
    score_cmd->fallthrough();
    score_cmd->add_option("--model", model_path, "trained model file")->required();
    score_cmd->add_option("--real", real_path, "labeled real CSV")->required();
    score_cmd->add_option("--fake", fake_path, "fake CSV, label column optional")->required();
    score_cmd->add_flag("--mmd", with_mmd, "also print the Gaussian-kernel MMD^2");
    score_cmd->add_option("--report", score_report, "report file name inside --out")
        ->default_val("sds-report.csv");
    bind.add(score_cmd, "--k", s.k, "sds.k", "neighbors for the class vote");
    bind.add(score_cmd, "--mmd-bandwidth", s.mmd_bandwidth, "mmd.bandwidth",
             "kernel bandwidth or 'median'");
    add_data_flags(score_cmd);

    auto* exp_cmd = app.add_subcommand("experiment", "run one of the evaluation experiments");
    exp_cmd->fallthrough();
    exp_cmd->add_option("experiment", experiment_name, "mode | intraclass | quality | ranking")
        ->required()
        ->check(CLI::IsMember({"mode", "intraclass", "quality", "ranking"}));
    exp_cmd->add_option("--data", data_path, "labeled CSV to use instead of the synthetic mixture");
    exp_cmd->add_option("--fake", fake_paths, "fake CSV files for the ranking experiment");
    exp_cmd->add_option("--name", file_name, "output file name (default <experiment>-<timestamp>.csv)");
    bind.add(exp_cmd, "--repetitions", s.repetitions, "experiment.repetitions", "repetitions");
    bind.add(exp_cmd, "--classes", s.classes, "experiment.classes", "mixture classes");
    bind.add(exp_cmd, "--dimension", s.dimension, "experiment.dimension", "mixture dimension");
    bind.add(exp_cmd, "--radius", s.radius, "experiment.radius", "mixture mode radius");
    bind.add(exp_cmd, "--within-sigma", s.within_sigma, "experiment.within_sigma", "mixture class std");
    bind.add(exp_cmd, "--per-class", s.per_class, "experiment.per_class", "mixture samples per class");
    bind.add(exp_cmd, "--p-values", s.intraclass_fractions, "experiment.fractions",
             "intraclass pool fractions");
    bind.add(exp_cmd, "--sigmas", s.quality_sigmas, "experiment.sigmas", "quality noise levels");
    bind.add(exp_cmd, "--ranking-sigmas", s.ranking_sigmas, "experiment.ranking_sigmas",
             "noise levels of the ranking fake sets");
    bind.add(exp_cmd, "--k", s.k, "sds.k", "neighbors for the class vote");
    add_data_flags(exp_cmd);
    add_split_flags(exp_cmd);
    add_net_flags(exp_cmd);
    add_train_flags(exp_cmd);

    bind.track(seed_opt, s.seed, "seed");
    bind.track(threads_opt, s.threads, "threads");
    bind.track(out_opt, s.out_dir, "out");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (!s.config_path.empty()) {
            bind.apply(read_config_file(s.config_path));
        }
        if (*split_cmd) return cmd_split(s, input, out);
        if (*train_cmd) return cmd_train(s, input, model_path, train_report, out);
        if (*score_cmd) return cmd_score(s, model_path, real_path, fake_path, with_mmd, score_report, out);
        if (*exp_cmd) return cmd_experiment(s, experiment_name, data_path, fake_paths, file_name, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace sds::cli
