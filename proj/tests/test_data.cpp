#include "ctour/data.hpp"
#include "ctour/error.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "support/synthetic.hpp"

namespace ctour {
namespace {

using testing::column_dataset;

std::string read_fixture(const std::string& name) {
    std::ifstream in(std::string(CTOUR_TEST_DATA_DIR) + "/" + name);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

TEST(LoadCsv, OecdStyleFileUsesCountryNamesAsIds) {
    const Dataset ds = load_csv(read_fixture("oecd_like.csv"));
    EXPECT_EQ(ds.rows(), 34u);
    EXPECT_EQ(ds.features(), 8u);
    EXPECT_EQ(ds.row_ids().front(), "Australia");
    EXPECT_EQ(ds.row_ids().back(), "United States");
    EXPECT_EQ(ds.enabled_features().size(), 8u);
    EXPECT_EQ(ds.dropped_rows(), 0u);
}

TEST(LoadCsv, EmptyInputIsMalformed) {
    try {
        load_csv("");
        FAIL() << "expected MalformedInput";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedInput);
    }
}

TEST(LoadCsv, RowWithMissingCellIsDropped) {
    std::string csv = "a,b\n";
    for (int i = 0; i < 10; ++i) {
        csv += std::to_string(i) + "," + (i == 4 ? "" : std::to_string(i * 2)) + "\n";
    }
    const Dataset ds = load_csv(csv);
    EXPECT_EQ(ds.rows(), 9u);
    EXPECT_EQ(ds.dropped_rows(), 1u);
    EXPECT_EQ(ds.row_ids()[4], "5");  // ids keep the original data row index
}

TEST(LoadCsv, RaggedRowsAreMalformed) {
    EXPECT_THROW(load_csv("a,b\n1,2\n3\n"), Error);
}

TEST(LoadCsv, NoNumericColumnIsMalformed) {
    EXPECT_THROW(load_csv("name,city\nx,y\n"), Error);
}

TEST(LoadCsv, QuotedFieldsAndExtraTextColumns) {
    const Dataset ds = load_csv("name,x,\"note, long\",y\r\n\"A, Inc\",1,hello,2\r\n\"B \"\"q\"\"\",3,bye,4\r\n");
    ASSERT_EQ(ds.rows(), 2u);
    EXPECT_EQ(ds.row_ids()[0], "A, Inc");
    EXPECT_EQ(ds.row_ids()[1], "B \"q\"");
    ASSERT_EQ(ds.dropped_columns().size(), 1u);
    EXPECT_EQ(ds.dropped_columns()[0], "note, long");
    EXPECT_DOUBLE_EQ(ds.values()(1, 1), 4.0);
}

TEST(LoadCsv, DuplicateFeatureNamesRejected) {
    EXPECT_THROW(load_csv("x,X\n1,2\n"), Error);
}

TEST(FeatureStats, ConstantColumn) {
    const auto stats = feature_stats(column_dataset({5, 5, 5, 5}));
    EXPECT_EQ(stats[0].std, 0.0);
    EXPECT_EQ(stats[0].min, 5.0);
    EXPECT_EQ(stats[0].max, 5.0);
    EXPECT_EQ(stats[0].histogram[0], 4u);
}

TEST(FeatureStats, SymmetricColumn) {
    const auto stats = feature_stats(column_dataset({1, 2, 3, 4}));
    EXPECT_DOUBLE_EQ(stats[0].mean, 2.5);
    EXPECT_DOUBLE_EQ(stats[0].median, 2.5);
}

TEST(FeatureStats, SkewedColumnMatchesReferenceValues) {
    // tests/oracles/data_oracles.py
    const auto s = feature_stats(column_dataset({1, 2, 3, 4, 5, 6, 7, 8, 9, 100}))[0];
    EXPECT_DOUBLE_EQ(s.q1, 3.25);
    EXPECT_DOUBLE_EQ(s.median, 5.5);
    EXPECT_DOUBLE_EQ(s.q3, 7.75);
    EXPECT_NEAR(s.skewness, 2.6300838238836732, 1e-12);
    EXPECT_NEAR(s.std, 28.605069480775605, 1e-12);
    std::size_t total = 0;
    for (auto c : s.histogram) total += c;
    EXPECT_EQ(total, 10u);
    EXPECT_LE(s.min, s.q1);
    EXPECT_LE(s.q3, s.max);
}

TEST(FeatureStats, SelectionUsesDatasetBinsAndSelectedCounts) {
    const Dataset ds = column_dataset({0, 1, 2, 3, 4, 5, 6, 7, 8, 10});
    const auto s = feature_stats(ds, Selection({0, 9}))[0];
    EXPECT_EQ(s.count, 2u);
    EXPECT_EQ(s.histogram.size(), kHistogramBins);
    EXPECT_EQ(s.histogram.front(), 1u);
    EXPECT_EQ(s.histogram.back(), 1u);
    EXPECT_DOUBLE_EQ(s.histogram_hi, 10.0);
}

TEST(FeatureStats, EmptySelectionRejected) {
    try {
        feature_stats(column_dataset({1, 2}), Selection{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptySelection);
    }
}

TEST(Outliers, HighValueFlagged) {
    const auto flags = detect_outliers(column_dataset({1, 2, 3, 4, 5, 6, 7, 8, 9, 100}), 0);
    for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(flags[i], OutlierFlag::none);
    EXPECT_EQ(flags[9], OutlierFlag::high);
}

TEST(Outliers, LowValueFlagged) {
    const auto flags = detect_outliers(column_dataset({-100, 1, 2, 3, 4, 5, 6, 7, 8, 9}), 0);
    EXPECT_EQ(flags[0], OutlierFlag::low);
    for (std::size_t i = 1; i < 10; ++i) EXPECT_EQ(flags[i], OutlierFlag::none);
}

TEST(Outliers, ZeroIqrFlagsNothing) {
    const auto flags = detect_outliers(column_dataset({3, 3, 3, 3, 3, 3, 3, 50}), 0);
    for (auto f : flags) EXPECT_EQ(f, OutlierFlag::none);
}

TEST(Outliers, FlagCountsCoverEveryRow) {
    Rng rng(3);
    std::vector<double> xs;
    for (int i = 0; i < 200; ++i) xs.push_back(rng.normal() * (i % 17 == 0 ? 10 : 1));
    const auto flags = detect_outliers(column_dataset(xs), 0);
    std::size_t high = 0, low = 0, none = 0;
    for (auto f : flags) {
        (f == OutlierFlag::high ? high : f == OutlierFlag::low ? low : none)++;
    }
    EXPECT_EQ(high + low + none, xs.size());
    EXPECT_GT(high + low, 0u);
}

TEST(Sampling, FullRateIsIdentity) {
    EXPECT_EQ(sample_rows(10, 1.0, 3), Selection::all(10));
}

TEST(Sampling, DeterministicForSeed) {
    const auto a = sample_rows(10, 0.5, 7);
    const auto b = sample_rows(10, 0.5, 7);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.size(), 5u);
    EXPECT_NE(a, sample_rows(10, 0.5, 8));
}

TEST(Sampling, CeilingCardinality) {
    EXPECT_EQ(sample_rows(10000, 0.1, 1).size(), 1000u);
    EXPECT_EQ(sample_rows(7, 0.5, 1).size(), 4u);
    EXPECT_EQ(sample_rows(3, 0.01, 1).size(), 1u);
}

TEST(Sampling, SubsetProperty) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const std::size_t n = 1 + seed * 7;
        const double rate = 0.05 + 0.9 * static_cast<double>(seed % 10) / 10.0;
        const auto s = sample_rows(n, rate, seed);
        EXPECT_EQ(s.size(), static_cast<std::size_t>(std::ceil(rate * static_cast<double>(n) - 1e-9)));
        for (auto r : s.rows()) EXPECT_LT(r, n);
    }
}

TEST(Sampling, InvalidRate) {
    EXPECT_THROW(sample_rows(10, 0.0, 1), Error);
    EXPECT_THROW(sample_rows(10, 1.5, 1), Error);
}

TEST(Sampling, SuggestionAboveThreshold) {
    Matrix big = Matrix::Zero(10001, 1);
    EXPECT_TRUE(sampling_suggestion(testing::make_dataset(big)).has_value());
    Matrix small = Matrix::Zero(10000, 1);
    EXPECT_FALSE(sampling_suggestion(testing::make_dataset(small)).has_value());
}

TEST(Correlations, LinearDependence) {
    Matrix m(5, 3);
    m << 1, 2, 0.3, 2, 4, -1, 3, 6, 2, 4, 8, 0.1, 5, 10, 0.5;
    const auto top = top_correlations(testing::make_dataset(m), 1);
    ASSERT_EQ(top.size(), 1u);
    EXPECT_EQ(top[0].name_a, "f1");
    EXPECT_EQ(top[0].name_b, "f2");
    EXPECT_NEAR(top[0].r, 1.0, 1e-12);
}

TEST(Correlations, NegativeDependence) {
    Matrix m(4, 2);
    m << 1, -1, 2, -2, 3, -3, 7, -7;
    const auto top = top_correlations(testing::make_dataset(m), 5);
    ASSERT_EQ(top.size(), 1u);
    EXPECT_NEAR(top[0].r, -1.0, 1e-12);
}

TEST(Correlations, IndependentUniformColumns) {
    Rng rng(11);
    Matrix m(1000, 2);
    for (int i = 0; i < 1000; ++i) {
        m(i, 0) = rng.uniform();
        m(i, 1) = rng.uniform();
    }
    const auto top = top_correlations(testing::make_dataset(m), 1);
    EXPECT_LT(std::abs(top[0].r), 0.1);
}

TEST(Correlations, ConstantFeatureSkippedAndSelfCorrelationIsOne) {
    Matrix m(4, 3);
    m << 1, 7, 4, 2, 7, 1, 3, 7, 0, 4, 7, 9;
    Dataset ds = testing::make_dataset(m);
    for (const auto& p : top_correlations(ds, 10)) {
        EXPECT_NE(p.a, 1u);
        EXPECT_NE(p.b, 1u);
    }
    EXPECT_DOUBLE_EQ(pearson(m.col(0), m.col(0)), 1.0);
}

TEST(Correlations, TiesBrokenByName) {
    Matrix m(3, 4);
    m << 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 4;
    Dataset ds(std::vector<std::string>{"d", "c", "b", "a"}, {"x", "y", "z"}, m);
    const auto top = top_correlations(ds, 3);
    EXPECT_EQ(top[0].name_a, "b");
    EXPECT_EQ(top[0].name_b, "c");
    EXPECT_EQ(top[1].name_b, "d");
}

TEST(DatasetState, EnableAndDisableFeatures) {
    Dataset ds = testing::make_dataset(Matrix::Zero(3, 3));
    ds.set_enabled(1, false);
    EXPECT_EQ(ds.enabled_features(), (std::vector<std::size_t>{0, 2}));
    ds.set_enabled(1, true);
    EXPECT_EQ(ds.enabled_features(), (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_EQ(ds.find_feature("F2"), std::optional<std::size_t>(1));
}

}  // namespace
}  // namespace ctour
