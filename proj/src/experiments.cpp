#include "sds/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "sds/mmd.hpp"
#include "sds/seed.hpp"
#include "sds/stats.hpp"

namespace sds {

namespace {

std::string format_double(double v) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

std::uint64_t repetition_seed(const ExperimentConfig& cfg, int rep) {
    return derive_seed(cfg.seed, "repetition", static_cast<std::uint64_t>(rep));
}

DataSplit prepare_split(const ExperimentConfig& cfg, std::uint64_t rep_seed) {
    if (cfg.data) return split(*cfg.data, cfg.fractions, derive_seed(rep_seed, "split"));
    MixtureSpec mixture = cfg.mixture;
    mixture.seed = derive_seed(rep_seed, "mixture");
    return split(gen_mixture(mixture), cfg.fractions, derive_seed(rep_seed, "split"));
}

EmbeddingNet train_for_repetition(const ExperimentConfig& cfg, const Dataset& data,
                                  std::uint64_t rep_seed) {
    NetSpec spec = cfg.net;
    spec.input_dim = static_cast<int>(data.dim());
    spec.init_seed = derive_seed(rep_seed, "init");
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(rep_seed, "train");
    return train(EmbeddingNet::init(spec), data, tc).net;
}

int class_count_of(const ExperimentConfig& cfg) {
    return cfg.data ? cfg.data->class_count : cfg.mixture.class_count;
}

// Runs fn(rep) for every repetition on up to cfg.threads workers. Results are
// stored by repetition index, so the outcome does not depend on scheduling.
template <typename Result, typename Fn>
std::vector<Result> run_repetitions(const ExperimentConfig& cfg, Fn fn) {
    const auto reps = static_cast<std::size_t>(cfg.repetitions);
    std::vector<Result> results(reps);
    std::size_t workers = cfg.threads > 0 ? static_cast<std::size_t>(cfg.threads)
                                          : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, reps);
    if (workers <= 1) {
        for (std::size_t r = 0; r < reps; ++r) results[r] = fn(static_cast<int>(r));
        return results;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t r = next++; r < reps; r = next++) {
                try {
                    results[r] = fn(static_cast<int>(r));
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return results;
}

SeriesReport summarize(std::vector<double> x_values, std::vector<std::vector<double>> per_rep) {
    SeriesReport report;
    report.x_values = std::move(x_values);
    const std::size_t n = report.x_values.size();
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> column;
        column.reserve(per_rep.size());
        for (const auto& rep : per_rep) column.push_back(rep[i]);
        report.mean_scores.push_back(mean(column));
        report.std_scores.push_back(sample_std(column));
    }
    report.normalized_scores = normalize_series(report.mean_scores);
    report.repetition_scores = std::move(per_rep);
    return report;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
    if (threads < 0) throw std::invalid_argument("threads must be >= 0");
    if (data) {
        data->validate();
    } else {
        mixture.validate();
    }
    train.validate();
    if (sds.k < 1) throw std::invalid_argument("sds k must be >= 1");
}

SeriesReport mode_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const int classes = class_count_of(cfg);
    if (classes < 3) throw std::invalid_argument("mode experiment needs at least 3 classes");
    std::set<int> trained;
    for (int c = 0; c < classes / 2; ++c) trained.insert(c);

    auto per_rep = run_repetitions<std::vector<double>>(cfg, [&](int rep) {
        const auto seed = repetition_seed(cfg, rep);
        const DataSplit parts = prepare_split(cfg, seed);
        const Dataset reference = filter_classes(parts.siamese_part, trained);
        const EmbeddingNet net = train_for_repetition(cfg, reference, seed);
        const EmbeddingMatrix real = embed_set(net, reference);
        std::vector<double> scores;
        std::set<int> shown;
        for (int i = 1; i <= classes; ++i) {
            shown.insert(i - 1);
            const Dataset fake = filter_classes(parts.eval_part, shown);
            scores.push_back(score_embedded(real, embed_unlabeled(net, fake), cfg.sds).aggregate_sds);
        }
        return scores;
    });

    std::vector<double> xs;
    for (int i = 1; i <= classes; ++i) xs.push_back(i);
    return summarize(std::move(xs), std::move(per_rep));
}

SeriesReport intraclass_experiment(const ExperimentConfig& cfg, const std::vector<double>& fractions) {
    cfg.validate();
    if (fractions.empty()) throw std::invalid_argument("intraclass experiment needs fractions");
    for (double p : fractions) {
        if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("fractions must lie in (0, 1]");
    }

    auto per_rep = run_repetitions<std::vector<double>>(cfg, [&](int rep) {
        const auto seed = repetition_seed(cfg, rep);
        const DataSplit parts = prepare_split(cfg, seed);
        const EmbeddingNet net = train_for_repetition(cfg, parts.siamese_part, seed);
        const EmbeddingMatrix real = embed_set(net, parts.siamese_part);

        std::size_t present = 0;
        for (auto count : parts.eval_part.class_histogram()) present += count > 0 ? 1 : 0;
        const std::size_t per_class = std::max<std::size_t>(1, parts.eval_part.size() / present);

        std::vector<double> scores;
        for (std::size_t k = 0; k < fractions.size(); ++k) {
            const Dataset fake = subsample_per_class(parts.eval_part, fractions[k], per_class,
                                                     derive_seed(seed, "subsample", k));
            scores.push_back(score_embedded(real, embed_unlabeled(net, fake), cfg.sds).aggregate_sds);
        }
        return scores;
    });
    return summarize(fractions, std::move(per_rep));
}

QualityReport quality_experiment(const ExperimentConfig& cfg, const std::vector<double>& sigmas) {
    cfg.validate();
    if (sigmas.empty()) throw std::invalid_argument("quality experiment needs sigmas");
    if (sigmas.front() != 0.0) throw std::invalid_argument("the first sigma must be 0");
    if (!std::is_sorted(sigmas.begin(), sigmas.end())) {
        throw std::invalid_argument("sigmas must be sorted ascending");
    }

    auto per_rep = run_repetitions<std::vector<double>>(cfg, [&](int rep) {
        const auto seed = repetition_seed(cfg, rep);
        const DataSplit parts = prepare_split(cfg, seed);
        const EmbeddingNet net = train_for_repetition(cfg, parts.siamese_part, seed);
        const EmbeddingMatrix real = embed_set(net, parts.siamese_part);
        std::vector<double> scores;
        for (std::size_t k = 0; k < sigmas.size(); ++k) {
            const Dataset fake = degrade(parts.eval_part, sigmas[k], derive_seed(seed, "degrade", k));
            scores.push_back(score_embedded(real, embed_unlabeled(net, fake), cfg.sds).aggregate_sds);
        }
        return scores;
    });

    QualityReport out;
    out.series = summarize(sigmas, std::move(per_rep));
    out.spearman = spearman(out.series.x_values, out.series.mean_scores);
    return out;
}

std::vector<FakeSource> degradation_sources(const std::vector<double>& sigmas) {
    std::vector<FakeSource> sources;
    for (double sigma : sigmas) {
        sources.push_back({"sigma=" + format_double(sigma),
                           [sigma](const DataSplit& parts, std::uint64_t seed) {
                               return degrade(parts.eval_part, sigma, seed);
                           }});
    }
    return sources;
}

RankingReport ranking_experiment(const ExperimentConfig& cfg, const std::vector<FakeSource>& fakes) {
    cfg.validate();
    if (fakes.size() < 2) throw std::invalid_argument("ranking experiment needs at least two fake sets");

    struct RepResult {
        std::vector<double> sds;
        std::vector<double> mmd;
    };
    auto per_rep = run_repetitions<RepResult>(cfg, [&](int rep) {
        const auto seed = repetition_seed(cfg, rep);
        const DataSplit parts = prepare_split(cfg, seed);
        const EmbeddingNet net = train_for_repetition(cfg, parts.siamese_part, seed);
        const EmbeddingMatrix real = embed_set(net, parts.siamese_part);

        std::vector<Dataset> sets;
        for (std::size_t k = 0; k < fakes.size(); ++k) {
            sets.push_back(fakes[k].make(parts, derive_seed(seed, "fake", k)));
            if (sets.back().dim() != parts.siamese_part.dim()) {
                throw std::invalid_argument("fake set '" + fakes[k].name + "' has dimension " +
                                            std::to_string(sets.back().dim()));
            }
            if (sets.back().size() != sets.front().size()) {
                throw std::invalid_argument("fake sets must have equal sample counts");
            }
        }

        // Equal-size real reference for MMD.
        std::vector<std::size_t> rows(parts.siamese_part.size());
        std::iota(rows.begin(), rows.end(), 0);
        Rng rng(derive_seed(seed, "mmd-reference"));
        std::shuffle(rows.begin(), rows.end(), rng);
        rows.resize(std::min(rows.size(), sets.front().size()));
        std::sort(rows.begin(), rows.end());
        const Dataset mmd_reference = parts.siamese_part.select(rows);
        const MmdConfig mmd_cfg{median_heuristic(mmd_reference.features, parts.eval_part.features)};

        RepResult result;
        for (const auto& fake : sets) {
            result.sds.push_back(score_embedded(real, embed_unlabeled(net, fake), cfg.sds).aggregate_sds);
            result.mmd.push_back(mmd2(mmd_reference.features, fake.features, mmd_cfg));
        }
        return result;
    });

    RankingReport report;
    for (const auto& f : fakes) report.names.push_back(f.name);
    for (std::size_t k = 0; k < fakes.size(); ++k) {
        std::vector<double> sds_col;
        std::vector<double> mmd_col;
        for (const auto& r : per_rep) {
            sds_col.push_back(r.sds[k]);
            mmd_col.push_back(r.mmd[k]);
        }
        report.sds_mean.push_back(mean(sds_col));
        report.sds_std.push_back(sample_std(sds_col));
        report.mmd_mean.push_back(mean(mmd_col));
        report.mmd_std.push_back(sample_std(mmd_col));
    }
    for (const auto& r : per_rep) report.repetition_tau.push_back(kendall_tau(r.sds, r.mmd));
    report.mean_tau = kendall_tau(report.sds_mean, report.mmd_mean);
    return report;
}

void write_series_csv(const SeriesReport& report, std::ostream& out) {
    out << "x,mean,std,normalized\n";
    for (std::size_t i = 0; i < report.x_values.size(); ++i) {
        out << format_double(report.x_values[i]) << ',' << format_double(report.mean_scores[i]) << ','
            << format_double(report.std_scores[i]) << ','
            << format_double(report.normalized_scores[i]) << '\n';
    }
}

void write_ranking_csv(const RankingReport& report, std::ostream& out) {
    out << "name,sds_mean,sds_std,mmd_mean,mmd_std\n";
    for (std::size_t k = 0; k < report.names.size(); ++k) {
        out << report.names[k] << ',' << format_double(report.sds_mean[k]) << ','
            << format_double(report.sds_std[k]) << ',' << format_double(report.mmd_mean[k]) << ','
            << format_double(report.mmd_std[k]) << '\n';
    }
}

std::size_t argmin(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("argmin of empty series");
    return static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
}

}  // namespace sds
