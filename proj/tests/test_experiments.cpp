#include <gtest/gtest.h>

#include <sstream>

#include "sds/experiments.hpp"

using namespace sds;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.repetitions = 2;
    cfg.mixture = {4, 2, 10.0, 0.5, 30, 0};
    cfg.net.hidden_dims = {16};
    cfg.net.embed_dim = 4;
    cfg.train.epochs = 3;
    cfg.seed = 11;
    return cfg;
}

}  // namespace

TEST(Experiments, ModeSeriesShapeAndDeterminism) {
    const auto cfg = small_config();
    const auto a = mode_experiment(cfg);
    ASSERT_EQ(a.x_values, (std::vector<double>{1, 2, 3, 4}));
    ASSERT_EQ(a.repetition_scores.size(), 2u);
    EXPECT_EQ(a.repetition_scores[0].size(), 4u);
    const auto b = mode_experiment(cfg);
    EXPECT_EQ(a.mean_scores, b.mean_scores);
    EXPECT_EQ(a.std_scores, b.std_scores);
    for (double v : a.normalized_scores) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Experiments, ThreadCountDoesNotChangeResults) {
    auto cfg = small_config();
    const auto serial = quality_experiment(cfg, {0.0, 1.0, 4.0});
    cfg.threads = 2;
    const auto parallel = quality_experiment(cfg, {0.0, 1.0, 4.0});
    EXPECT_EQ(serial.series.repetition_scores, parallel.series.repetition_scores);
    EXPECT_EQ(serial.spearman, parallel.spearman);
}

TEST(Experiments, QualityRejectsBadSigmaGrid) {
    const auto cfg = small_config();
    EXPECT_THROW(quality_experiment(cfg, {0.5, 1.0}), std::invalid_argument);
    EXPECT_THROW(quality_experiment(cfg, {0.0, 2.0, 1.0}), std::invalid_argument);
}

TEST(Experiments, IntraclassShape) {
    const auto report = intraclass_experiment(small_config(), {0.1, 0.5, 1.0});
    EXPECT_EQ(report.x_values, (std::vector<double>{0.1, 0.5, 1.0}));
    EXPECT_EQ(report.mean_scores.size(), 3u);
    EXPECT_THROW(intraclass_experiment(small_config(), {0.0}), std::invalid_argument);
}

TEST(Experiments, RankingReportsEverySource) {
    const auto report = ranking_experiment(small_config(), degradation_sources({0.5, 2.0, 8.0}));
    EXPECT_EQ(report.names, (std::vector<std::string>{"sigma=0.5", "sigma=2", "sigma=8"}));
    EXPECT_EQ(report.repetition_tau.size(), 2u);
    EXPECT_LT(report.sds_mean.front(), report.sds_mean.back());
    EXPECT_LT(report.mmd_mean.front(), report.mmd_mean.back());
    std::ostringstream out;
    write_ranking_csv(report, out);
    EXPECT_EQ(out.str().rfind("name,sds_mean,sds_std,mmd_mean,mmd_std\nsigma=0.5,", 0), 0u);
}

TEST(Experiments, UsesSuppliedData) {
    auto cfg = small_config();
    cfg.data = gen_mixture({4, 3, 10.0, 0.5, 20, 5});
    const auto report = mode_experiment(cfg);
    EXPECT_EQ(report.x_values.size(), 4u);
}

TEST(Experiments, SeriesCsvLayout) {
    SeriesReport r;
    r.x_values = {1, 2};
    r.mean_scores = {0.5, 1.5};
    r.std_scores = {0.0, 0.25};
    r.normalized_scores = {0.0, 1.0};
    std::ostringstream out;
    write_series_csv(r, out);
    EXPECT_EQ(out.str(), "x,mean,std,normalized\n1,0.5,0,0\n2,1.5,0.25,1\n");
    EXPECT_EQ(argmin({3.0, 1.0, 1.0}), 1u);
}

TEST(Experiments, ConfigValidation) {
    auto cfg = small_config();
    cfg.repetitions = 0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}
