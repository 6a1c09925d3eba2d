#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "sds/dataset.hpp"
#include "sds/errors.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace sds;

namespace {

fs::path write_temp(const std::string& name, const std::string& body) {
    const fs::path dir = fs::temp_directory_path() / "sds_dataset_tests";
    fs::create_directories(dir);
    const fs::path path = dir / name;
    std::ofstream(path) << body;
    return path;
}

Dataset two_class(int per_class) {
    Dataset d;
    d.class_count = 2;
    d.features.resize(2 * per_class, 1);
    for (int i = 0; i < 2 * per_class; ++i) {
        d.features(i, 0) = i;
        d.labels.push_back(i < per_class ? 0 : 1);
    }
    return d;
}

}  // namespace

TEST(LoadCsv, ReadsThreeRowFile) {
    const auto data = load_csv(write_temp("three.csv", "0,0,0\n1,1,0\n5,5,1\n"));
    EXPECT_EQ(data.size(), 3u);
    EXPECT_EQ(data.dim(), 2u);
    EXPECT_EQ(data.class_count, 2);
    EXPECT_EQ(data.labels, (std::vector<int>{0, 0, 1}));
    EXPECT_DOUBLE_EQ(data.features(2, 1), 5.0);
}

TEST(LoadCsv, SkipsHeaderAndHonorsLabelColumn) {
    const auto data = load_csv(write_temp("header.csv", "y,a,b\n2,0.5,1.5\r\n0,-1,2e3\n"), 0);
    EXPECT_EQ(data.size(), 2u);
    EXPECT_EQ(data.dim(), 2u);
    EXPECT_EQ(data.class_count, 3);
    EXPECT_EQ(data.labels, (std::vector<int>{2, 0}));
    EXPECT_DOUBLE_EQ(data.features(1, 1), 2000.0);
}

TEST(LoadCsv, SeizureLayoutGives178Features) {
    std::string body;
    for (int row = 0; row < 4; ++row) {
        for (int c = 0; c < 178; ++c) body += std::to_string(row * 3 - c) + ",";
        body += std::to_string(row % 2) + "\n";
    }
    const auto data = load_csv(write_temp("seizure.csv", body));
    EXPECT_EQ(data.dim(), 178u);
    EXPECT_EQ(data.size(), 4u);
}

TEST(LoadCsv, RejectsWrongArityNamingTheLine) {
    const auto path = write_temp("arity.csv", "1,2,3,0\n4,5,6,1\n7,8,1\n");
    try {
        load_csv(path);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(LoadCsv, RejectsNonNumericCellAndBadLabel) {
    EXPECT_THROW(load_csv(write_temp("nan.csv", "1,2,0\n1,x,1\n")), ParseError);
    EXPECT_THROW(load_csv(write_temp("neg.csv", "1,2,-1\n")), ParseError);
    EXPECT_THROW(load_csv(write_temp("frac.csv", "1,2,0.5\n")), ParseError);
}

TEST(LoadCsv, EmptyFileIsAnEmptyInputError) {
    EXPECT_THROW(load_csv(write_temp("empty.csv", "")), EmptyInputError);
    EXPECT_THROW(load_csv(write_temp("header_only.csv", "a,b,label\n")), EmptyInputError);
}

TEST(SaveCsv, RoundTripsExactly) {
    std::mt19937_64 rng(3);
    const auto data = oracle::random_labeled(20, 3, 4, rng);
    const auto path = fs::temp_directory_path() / "sds_dataset_tests" / "roundtrip.csv";
    save_csv(data, path);
    const auto back = load_csv(path);
    EXPECT_EQ(back.labels, data.labels);
    EXPECT_EQ(back.features, data.features);
}

TEST(Split, SizesFollowFloorPlusRemainder) {
    const auto parts = split(two_class(10), {0.5, 0.3, 0.2}, 1);
    EXPECT_EQ(parts.generator_part.size(), 10u);
    EXPECT_EQ(parts.siamese_part.size(), 6u);
    EXPECT_EQ(parts.eval_part.size(), 4u);
    for (const auto* part : {&parts.generator_part, &parts.siamese_part, &parts.eval_part}) {
        EXPECT_EQ(part->class_histogram(), (std::vector<std::size_t>{part->size() / 2, part->size() / 2}));
    }
}

TEST(Split, RemainderGoesGeneratorThenSiameseThenEval) {
    // 7 per class at (0.4, 0.4, 0.2): floors 2, 2, 1 leave 2 -> G and S.
    const auto parts = split(two_class(7), {0.4, 0.4, 0.2}, 5);
    EXPECT_EQ(parts.generator_part.class_histogram(), (std::vector<std::size_t>{3, 3}));
    EXPECT_EQ(parts.siamese_part.class_histogram(), (std::vector<std::size_t>{3, 3}));
    EXPECT_EQ(parts.eval_part.class_histogram(), (std::vector<std::size_t>{1, 1}));
}

TEST(Split, DeterministicGivenSeed) {
    const auto data = two_class(10);
    const auto a = split(data, {0.5, 0.3, 0.2}, 7);
    const auto b = split(data, {0.5, 0.3, 0.2}, 7);
    EXPECT_EQ(a.generator_rows, b.generator_rows);
    EXPECT_EQ(a.siamese_rows, b.siamese_rows);
    EXPECT_EQ(a.eval_rows, b.eval_rows);
}

TEST(Split, TooFewSamplesPerClassIsAnError) {
    Dataset d;
    d.class_count = 2;
    d.features = Matrix::Zero(5, 1);
    d.labels = {0, 0, 1, 1, 1};
    EXPECT_THROW(split(d, {0.4, 0.4, 0.2}, 0), std::invalid_argument);
}

TEST(Split, RejectsBadFractions) {
    EXPECT_THROW(split(two_class(10), {0.5, 0.5, 0.0}, 0), std::invalid_argument);
    EXPECT_THROW(split(two_class(10), {0.5, 0.3, 0.3}, 0), std::invalid_argument);
}

TEST(SplitProperty, DisjointCoveringAndStratifiedForRandomInputs) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int classes = 1 + static_cast<int>(rng() % 5);
        Dataset d;
        d.class_count = classes;
        for (int c = 0; c < classes; ++c) {
            const int n = 3 + static_cast<int>(rng() % 30);
            for (int i = 0; i < n; ++i) d.labels.push_back(c);
        }
        d.features = Matrix::Random(static_cast<Eigen::Index>(d.labels.size()), 2);
        const double g = 0.1 + 0.6 * std::uniform_real_distribution<double>()(rng);
        const double s = (1.0 - g) * (0.2 + 0.6 * std::uniform_real_distribution<double>()(rng));
        const SplitFractions f{g, s, 1.0 - g - s};
        const auto parts = split(d, f, rng());

        std::set<std::size_t> seen;
        for (const auto* rows : {&parts.generator_rows, &parts.siamese_rows, &parts.eval_rows}) {
            for (auto r : *rows) EXPECT_TRUE(seen.insert(r).second) << "row in two parts";
        }
        EXPECT_EQ(seen.size(), d.size());

        const auto source = d.class_histogram();
        const double fr[3] = {f.generator, f.siamese, f.eval};
        const Dataset* part[3] = {&parts.generator_part, &parts.siamese_part, &parts.eval_part};
        for (int p = 0; p < 3; ++p) {
            const auto hist = part[p]->class_histogram();
            for (int c = 0; c < classes; ++c) {
                const double target = fr[p] * static_cast<double>(source[c]);
                // floor plus at most one remainder sample
                EXPECT_LT(std::abs(static_cast<double>(hist[c]) - target), 2.0);
                EXPECT_GE(static_cast<double>(hist[c]), std::floor(target));
            }
        }
    }
}

TEST(MakePairs, ExhaustiveEnumeration) {
    Dataset d;
    d.class_count = 2;
    d.features = Matrix::Zero(3, 1);
    d.labels = {0, 0, 1};
    const auto batch = make_all_pairs(d);
    ASSERT_EQ(batch.size(), 3u);
    EXPECT_EQ(batch.pairs[0], (SamplePair{0, 1, true}));
    EXPECT_EQ(batch.pairs[1], (SamplePair{0, 2, false}));
    EXPECT_EQ(batch.pairs[2], (SamplePair{1, 2, false}));
}

TEST(MakePairs, CountsAndLabelInvariant) {
    std::mt19937_64 rng(5);
    const auto data = oracle::random_labeled(40, 2, 3, rng);
    const auto batch = make_pairs(data, 100, 0.5, 9);
    ASSERT_EQ(batch.size(), 100u);
    EXPECT_EQ(batch.source, &data);
    int genuine = 0;
    for (const auto& p : batch.pairs) {
        EXPECT_NE(p.index_a, p.index_b);
        EXPECT_LT(p.index_a, data.size());
        EXPECT_LT(p.index_b, data.size());
        EXPECT_EQ(p.genuine, data.labels[p.index_a] == data.labels[p.index_b]);
        genuine += p.genuine ? 1 : 0;
    }
    EXPECT_EQ(genuine, 50);
}

TEST(MakePairs, DeterministicGivenSeed) {
    std::mt19937_64 rng(5);
    const auto data = oracle::random_labeled(30, 2, 3, rng);
    EXPECT_EQ(make_pairs(data, 64, 0.3, 4).pairs, make_pairs(data, 64, 0.3, 4).pairs);
    EXPECT_NE(make_pairs(data, 64, 0.3, 4).pairs, make_pairs(data, 64, 0.3, 5).pairs);
}

TEST(MakePairs, SingleClassCannotFormImpostors) {
    Dataset d;
    d.class_count = 1;
    d.features = Matrix::Zero(4, 1);
    d.labels = {0, 0, 0, 0};
    EXPECT_THROW(make_pairs(d, 10, 0.5, 0), std::invalid_argument);
    EXPECT_NO_THROW(make_pairs(d, 10, 1.0, 0));
}

TEST(MakePairs, ImpostorPairsAreUniformOverUnorderedPairs) {
    // Classes of sizes 1, 2, 3: the 11 impostor pairs should be equally likely.
    Dataset d;
    d.class_count = 3;
    d.features = Matrix::Zero(6, 1);
    d.labels = {0, 1, 1, 2, 2, 2};
    const auto batch = make_pairs(d, 110000, 0.0, 17);
    std::map<std::pair<std::size_t, std::size_t>, int> counts;
    for (const auto& p : batch.pairs) {
        counts[{std::min(p.index_a, p.index_b), std::max(p.index_a, p.index_b)}]++;
    }
    ASSERT_EQ(counts.size(), 11u);
    for (const auto& [pair, n] : counts) EXPECT_NEAR(n, 10000, 500);
}

TEST(GenMixture, DegenerateSingleClassNearOrigin) {
    const auto data = gen_mixture({1, 3, 0.0, 1e-9, 5, 1});
    EXPECT_EQ(data.size(), 5u);
    EXPECT_EQ(data.labels, std::vector<int>(5, 0));
    EXPECT_LT(data.features.cwiseAbs().maxCoeff(), 1e-7);
}

TEST(GenMixture, ClassMeansConcentrateOnTheCircle) {
    const int n = 400;
    const double sigma = 0.5;
    const auto data = gen_mixture({4, 2, 10.0, sigma, n, 21});
    for (int c = 0; c < 4; ++c) {
        Eigen::RowVector2d m = Eigen::RowVector2d::Zero();
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (data.labels[i] == c) m += data.features.row(static_cast<Eigen::Index>(i));
        }
        m /= n;
        const double angle = 2.0 * std::numbers::pi * c / 4.0;
        const double bound = 3.0 * sigma / std::sqrt(static_cast<double>(n));
        EXPECT_NEAR(m(0), 10.0 * std::cos(angle), bound);
        EXPECT_NEAR(m(1), 10.0 * std::sin(angle), bound);
    }
}

TEST(GenMixture, DeterministicGivenSeed) {
    const MixtureSpec spec{3, 4, 5.0, 1.0, 10, 99};
    EXPECT_EQ(gen_mixture(spec).features, gen_mixture(spec).features);
    EXPECT_THROW(gen_mixture({3, 4, 5.0, 0.0, 10, 99}), std::invalid_argument);
}

TEST(FilterClasses, KeepsRowsAndLabels) {
    Dataset d;
    d.class_count = 3;
    d.features = Matrix::Zero(3, 1);
    d.labels = {0, 1, 2};
    const auto kept = filter_classes(d, {1});
    EXPECT_EQ(kept.labels, std::vector<int>{1});
    EXPECT_EQ(kept.class_count, 3);
    EXPECT_THROW(filter_classes(d, {99}), std::invalid_argument);
    EXPECT_THROW(filter_classes(d, {}), std::invalid_argument);
}

TEST(FilterClasses, HalfOfTenClasses) {
    const auto data = gen_mixture({10, 2, 10.0, 1.0, 5, 1});
    const auto kept = filter_classes(data, {0, 1, 2, 3, 4});
    std::set<int> present(kept.labels.begin(), kept.labels.end());
    EXPECT_EQ(present, (std::set<int>{0, 1, 2, 3, 4}));
    EXPECT_EQ(kept.size(), 25u);
}

TEST(FilterClasses, AbsentClassGivesEmptySelection) {
    Dataset d;
    d.class_count = 3;
    d.features = Matrix::Zero(2, 1);
    d.labels = {0, 1};
    EXPECT_THROW(filter_classes(d, {2}), EmptyInputError);
}

TEST(SubsamplePerClass, FullPoolGivesDistinctRows) {
    const auto data = gen_mixture({5, 2, 10.0, 1.0, 60, 2});
    const auto sub = subsample_per_class(data, 1.0, 50, 3);
    EXPECT_EQ(sub.size(), 250u);  // K = |T| / C = 250 / 5
    for (int c = 0; c < 5; ++c) {
        std::set<std::pair<double, double>> rows;
        for (std::size_t i = 0; i < sub.size(); ++i) {
            if (sub.labels[i] == c) rows.insert({sub.features(static_cast<Eigen::Index>(i), 0), sub.features(static_cast<Eigen::Index>(i), 1)});
        }
        EXPECT_EQ(rows.size(), 50u);
    }
}

TEST(SubsamplePerClass, SingletonPoolRepeatsOneRow) {
    const auto data = gen_mixture({3, 2, 10.0, 1.0, 20, 4});
    const auto sub = subsample_per_class(data, 0.05, 7, 5);  // ceil(0.05 * 20) = 1
    EXPECT_EQ(sub.class_histogram(), (std::vector<std::size_t>{7, 7, 7}));
    for (std::size_t i = 1; i < sub.size(); ++i) {
        if (sub.labels[i] == sub.labels[i - 1]) {
            EXPECT_EQ(sub.features.row(static_cast<Eigen::Index>(i)), sub.features.row(static_cast<Eigen::Index>(i - 1)));
        }
    }
}

TEST(SubsamplePerClass, PerClassCountIndependentOfFraction) {
    const auto data = gen_mixture({4, 2, 10.0, 1.0, 40, 6});
    for (double p : {0.1, 0.25, 0.5, 1.0}) {
        EXPECT_EQ(subsample_per_class(data, p, 40, 7).class_histogram(),
                  (std::vector<std::size_t>(4, 40)));
    }
    EXPECT_THROW(subsample_per_class(data, 0.0, 40, 7), std::invalid_argument);
}

TEST(Degrade, ZeroSigmaIsIdentity) {
    const auto data = gen_mixture({2, 3, 1.0, 1.0, 10, 8});
    const auto same = degrade(data, 0.0, 1);
    EXPECT_EQ(same.features, data.features);
    EXPECT_EQ(same.labels, data.labels);
}

TEST(Degrade, SquaredPerturbationMatchesChiSquareMean) {
    const auto data = gen_mixture({2, 100, 1.0, 1.0, 500, 8});
    const auto noisy = degrade(data, 1.0, 2);
    const double mean_sq = (noisy.features - data.features).rowwise().squaredNorm().mean();
    EXPECT_NEAR(mean_sq, 100.0, 10.0);
}

TEST(Degrade, SeedsDifferLabelsDoNot) {
    const auto data = gen_mixture({2, 3, 1.0, 1.0, 10, 8});
    const auto a = degrade(data, 1.0, 1);
    const auto b = degrade(data, 1.0, 2);
    EXPECT_NE(a.features, b.features);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.features, degrade(data, 1.0, 1).features);
}
