#include "ctour/error.hpp"
#include "ctour/insight.hpp"

#include <gtest/gtest.h>

#include <numeric>

#include "support/synthetic.hpp"

namespace ctour {
namespace {

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorCode::InvalidArgument;
}

ClusteringInstance instance_with(const Dataset& ds, std::vector<int> raw) {
    ClusteringInstance inst;
    inst.params = default_params(ds);
    inst.params.k = 2;
    inst.rows.resize(ds.rows());
    for (std::size_t i = 0; i < ds.rows(); ++i) inst.rows[i] = i;
    inst.labeling = canonicalize(raw);
    return inst;
}

// Values from tests/oracles/insight_oracles.py.

TEST(Statistics, AnovaMatchesReference) {
    const std::vector<double> v{1.0, 2.0, 3.0, 2.5, 4.0, 5.5, 5.0, 2.0, 2.2, 9.0, 1.0, 3.3};
    const std::vector<int> l{0, 0, 0, 0, 1, 1, 1, 2, 2, 2, 2, 2};
    const auto r = anova(v, l);
    EXPECT_NEAR(r.f, 1.3046329917682173, 1e-12);
    EXPECT_NEAR(r.p_value, 0.31803130069672153, 1e-10);
}

TEST(Statistics, WelchMatchesReference) {
    const auto r = welch_t_test({1.0, 2.0, 3.5, 2.2, 1.9}, {3.0, 4.1, 2.9, 5.0, 4.4, 3.8, 6.0});
    EXPECT_NEAR(r.t, -3.554056256500537, 1e-12);
    EXPECT_NEAR(r.p_value, 0.005477384732362987, 1e-10);
    EXPECT_EQ(welch_t_test({1.0}, {2.0, 3.0}).p_value, 1.0);
}

TEST(RankFeatures, ConstantFeatureLastByVariance) {
    Matrix m(5, 3);
    m << 1, 7, 10, 2, 7, 20, 3, 7, 30, 4, 7, 45, 5, 7, 50;
    const auto r = rank_features(testing::make_dataset(m), RankMethod::variance);
    ASSERT_EQ(r.ranked.size(), 3u);
    EXPECT_EQ(r.ranked.back().feature, 1u);
    EXPECT_EQ(r.ranked.back().score, 0.0);
    EXPECT_EQ(r.ranked.front().feature, 2u);
}

TEST(RankFeatures, AnovaFindsTheSeparatingFeature) {
    Rng rng(3);
    Matrix m(100, 3);
    std::vector<int> labels(100);
    for (Eigen::Index i = 0; i < 100; ++i) {
        labels[static_cast<std::size_t>(i)] = i < 50 ? 0 : 1;
        m(i, 0) = (i < 50 ? 0.0 : 6.0) + rng.normal();
        m(i, 1) = rng.normal();
        m(i, 2) = 3 * rng.normal();
    }
    const auto r = rank_features(testing::make_dataset(m), RankMethod::anova_f, &labels);
    EXPECT_EQ(r.ranked.front().feature, 0u);
    EXPECT_LT(*r.ranked.front().p_value, 1e-6);
    EXPECT_EQ(code_of([&] { rank_features(testing::make_dataset(m), RankMethod::anova_f); }), ErrorCode::MissingLabels);
}

TEST(RankFeatures, CorrelationFilterKeepsOneOfADuplicatePair) {
    Rng rng(4);
    Matrix m(50, 3);
    for (Eigen::Index i = 0; i < 50; ++i) {
        m(i, 0) = rng.normal();
        m(i, 1) = 2 * rng.normal();
        m(i, 2) = m(i, 0);
    }
    const auto r = rank_features(testing::make_dataset(m), RankMethod::correlation_filter);
    int kept_of_pair = 0;
    for (const auto& f : r.ranked) {
        if (f.feature == 0 || f.feature == 2) kept_of_pair += f.kept;
    }
    EXPECT_EQ(kept_of_pair, 1);
    EXPECT_NEAR(r.ranked.back().score, 0.0, 1e-12);
}

TEST(RankFeatures, PcaLoadingAndEveryFeatureOnce) {
    Rng rng(5);
    Matrix m(200, 4);
    for (Eigen::Index i = 0; i < 200; ++i) {
        const double t = rng.normal();
        m(i, 0) = t + 0.01 * rng.normal();
        m(i, 1) = rng.normal();
        m(i, 2) = -t + 0.01 * rng.normal();
        m(i, 3) = 5;
    }
    Dataset ds = testing::make_dataset(m);
    ds.set_enabled(1, false);
    const auto r = rank_features(ds, RankMethod::pca_loading);
    ASSERT_EQ(r.ranked.size(), 3u);
    EXPECT_NEAR(r.ranked[0].score, std::sqrt(0.5), 1e-3);
    EXPECT_EQ(r.ranked.back().feature, 3u);
    for (std::size_t i = 1; i < r.ranked.size(); ++i) EXPECT_GE(r.ranked[i - 1].score, r.ranked[i].score);
}

TEST(RankFeatures, VarianceOrderIgnoresRowOrder) {
    const auto blobs = testing::three_blobs_5d(90);
    const auto a = rank_features(blobs.data, RankMethod::variance);
    std::vector<std::size_t> perm(90);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng(2).shuffle(perm);
    Matrix shuffled(90, 5);
    for (std::size_t i = 0; i < 90; ++i) shuffled.row(static_cast<Eigen::Index>(i)) = blobs.data.values().row(static_cast<Eigen::Index>(perm[i]));
    const auto b = rank_features(testing::make_dataset(shuffled), RankMethod::variance);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(a.ranked[i].feature, b.ranked[i].feature);
}

TEST(FeatureAgglomeration, DuplicateAndNegatedColumnsMergeAtZero) {
    Rng rng(6);
    Matrix m(30, 3);
    for (Eigen::Index i = 0; i < 30; ++i) {
        m(i, 0) = rng.normal();
        m(i, 1) = rng.normal();
        m(i, 2) = -m(i, 0);
    }
    const auto d = feature_agglomeration(testing::make_dataset(m));
    ASSERT_EQ(d.merges.size(), 2u);
    EXPECT_NEAR(d.merges[0].height, 0.0, 1e-12);
    m.col(2) = m.col(0);
    EXPECT_NEAR(feature_agglomeration(testing::make_dataset(m)).merges[0].height, 0.0, 1e-12);
}

TEST(FeatureAgglomeration, IndependentFeaturesMergeHigh) {
    Rng rng(7);
    Matrix m(1000, 6);
    for (Eigen::Index i = 0; i < 1000; ++i) {
        for (Eigen::Index j = 0; j < 6; ++j) m(i, j) = rng.normal();
    }
    const auto d = feature_agglomeration(testing::make_dataset(m));
    ASSERT_EQ(d.merges.size(), 5u);
    for (std::size_t i = 0; i < d.merges.size(); ++i) {
        EXPECT_GT(d.merges[i].height, 0.8);
        EXPECT_LE(d.merges[i].height, 1.0);
        if (i > 0) EXPECT_GE(d.merges[i].height, d.merges[i - 1].height);
    }
}

TEST(FeatureAgglomeration, NeedsTwoVaryingFeatures) {
    Matrix m(4, 2);
    m << 1, 3, 2, 3, 3, 3, 4, 3;
    EXPECT_EQ(code_of([&] { feature_agglomeration(testing::make_dataset(m)); }), ErrorCode::TooFewFeatures);
}

TEST(AggregateMatrix, SingleClusterHasZeroZ) {
    const auto blobs = testing::three_blobs(30);
    const auto inst = instance_with(blobs.data, std::vector<int>(30, 0));
    const auto m = aggregate_matrix(blobs.data, inst);
    ASSERT_EQ(m.clusters.size(), 1u);
    for (const auto& c : m.cells[0]) EXPECT_EQ(c.z, 0.0);
}

TEST(AggregateMatrix, ClippingOrderingAndWeightedMeans) {
    Rng rng(8);
    Matrix v(40, 2);
    std::vector<int> raw(40);
    for (Eigen::Index i = 0; i < 40; ++i) {
        const bool top = i < 2;
        raw[static_cast<std::size_t>(i)] = top ? 1 : 0;
        v(i, 0) = top ? 50.0 + rng.normal() : rng.normal();
        v(i, 1) = rng.normal();
    }
    const Dataset ds = testing::make_dataset(v);
    const auto inst = instance_with(ds, raw);
    const auto m = aggregate_matrix(ds, inst);
    EXPECT_EQ(m.cluster_sizes, (std::vector<std::size_t>{38, 2}));
    EXPECT_EQ(m.features.front(), 0u);
    EXPECT_EQ(m.cell(1, 0).z, kZClip);
    for (std::size_t f = 0; f < m.features.size(); ++f) {
        double weighted = 0;
        for (std::size_t c = 0; c < m.clusters.size(); ++c) weighted += m.cells[c][f].mean * static_cast<double>(m.cluster_sizes[c]);
        EXPECT_NEAR(weighted / 40.0, v.col(static_cast<Eigen::Index>(m.features[f])).mean(), 1e-9);
        for (const auto& row : m.cells) {
            EXPECT_GE(row[f].p_value, 0.0);
            EXPECT_LE(row[f].p_value, 1.0);
        }
    }
    EXPECT_LT(m.cell(0, 0).p_value, 0.05);  // the rest has only two rows
    EXPECT_EQ(code_of([&] { m.cell(7, 0); }), ErrorCode::UnknownCluster);
}

TEST(AggregateMatrix, ColumnOrderBySize) {
    const Dataset ds = testing::column_dataset({1, 2, 3, 10, 11, 12, 13, 14});
    const auto inst = instance_with(ds, {5, 5, 5, 9, 9, 9, 9, 9});
    const auto m = aggregate_matrix(ds, inst, 1);
    EXPECT_EQ(m.cluster_sizes, (std::vector<std::size_t>{5, 3}));
    EXPECT_EQ(m.features.size(), 1u);
}

TEST(RuleTree, OneDimensionalCleanSplit) {
    Matrix X(8, 1);
    X << 1, 2, 3, 4, 6, 7, 8, 9;
    const auto tree = fit_rule_tree(X, {0, 0, 0, 0, 1, 1, 1, 1}, 3, {"f"});
    ASSERT_EQ(tree.nodes.size(), 3u);
    EXPECT_DOUBLE_EQ(tree.nodes[0].threshold, 5.0);
    EXPECT_TRUE(tree.nodes[1].leaf);
    EXPECT_TRUE(tree.nodes[2].leaf);
    EXPECT_EQ(tree.training_fidelity, 1.0);
    const auto rules = extract_rules(tree);
    ASSERT_EQ(rules.size(), 2u);
    EXPECT_EQ(rules[0].paths[0].text, "f <= 5");
    EXPECT_EQ(rules[1].paths[0].text, "f > 5");
}

TEST(RuleTree, SingleClassIsARootLeaf) {
    Matrix X = Matrix::Random(10, 2);
    const auto tree = fit_rule_tree(X, std::vector<int>(10, 0), 3);
    EXPECT_EQ(tree.nodes.size(), 1u);
    EXPECT_EQ(tree.training_fidelity, 1.0);
    EXPECT_TRUE(extract_rules(tree).empty());
}

TEST(RuleTree, ThreeBlobsIn5DAndLeavesPartitionRows) {
    const auto blobs = testing::three_blobs_5d();
    const auto tree = fit_rule_tree(blobs.data.values(), blobs.truth, 3);
    EXPECT_GE(tree.training_fidelity, 0.95);
    const auto leaves = leaf_rules(tree);
    for (Eigen::Index i = 0; i < blobs.data.values().rows(); ++i) {
        int hits = 0;
        for (const auto& l : leaves) hits += l.matches(blobs.data.values().row(i).transpose());
        EXPECT_EQ(hits, 1);
    }
}

TEST(RuleTree, TieBreaksToLowestFeature) {
    Matrix X(4, 2);
    X << 0, 0, 1, 1, 5, 5, 6, 6;  // both features split equally well
    const auto tree = fit_rule_tree(X, {0, 0, 1, 1}, 2);
    EXPECT_EQ(tree.nodes[0].feature, 0u);
    EXPECT_DOUBLE_EQ(tree.nodes[0].threshold, 3.0);
}

TEST(RuleTree, DepthLimitRespected) {
    const auto blobs = testing::three_blobs_5d(60);
    std::vector<int> noisy = blobs.truth;
    Rng rng(1);
    for (auto& x : noisy) x = static_cast<int>(rng.below(4));
    const auto tree = fit_rule_tree(blobs.data.values(), noisy, 2);
    for (const auto& n : tree.nodes) EXPECT_LE(n.depth, 2);
}

TEST(Describe, OecdStyleQualifiers) {
    AggregateMatrix m;
    m.clusters = {0, 1};
    m.cluster_sizes = {20, 14};
    m.features = {0, 1, 2};
    m.feature_names = {"WorkingLongHours", "EducationalAttainment", "Dwellings"};
    m.cells = {{{0, 2.5, 0.01}, {0, -2.3, 0.01}, {0, 0.9, 0.2}}, {{0, 0, 1}, {0, 0, 1}, {0, 0, 1}}};
    const std::string text = describe_cluster(m, 0);
    EXPECT_NE(text.find("very high WorkingLongHours"), std::string::npos) << text;
    EXPECT_NE(text.find("very low EducationalAttainment"), std::string::npos) << text;
    EXPECT_NE(text.find("moderately high Dwellings"), std::string::npos) << text;
    EXPECT_EQ(text, describe_cluster(m, 0));
    const std::string plain = describe_cluster(m, 1, nullptr, "Portugal");
    EXPECT_EQ(plain, "Portugal has 14 members; no distinctive features.");
    EXPECT_EQ(code_of([&] { describe_cluster(m, 3); }), ErrorCode::UnknownCluster);
}

TEST(Describe, SingleMemberAndRulePath) {
    const Dataset ds = testing::column_dataset({1, 2, 3, 4, 6, 7, 8, 100});
    const auto inst = instance_with(ds, {0, 0, 0, 0, 0, 0, 0, 1});
    const auto m = aggregate_matrix(ds, inst);
    const auto tree = fit_rule_tree(ds, inst, 2);
    const std::string text = describe_cluster(m, 1, &tree);
    EXPECT_NE(text.find("has 1 member"), std::string::npos) << text;
    EXPECT_NE(text.find("Typical rule: f1 > 54"), std::string::npos) << text;
}

TEST(Describe, DefaultNamesUseCentroidNearestRow) {
    const Dataset ds = testing::column_dataset({0, 1, 2, 10, 11, 12.5});
    auto inst = instance_with(ds, {0, 0, 0, 1, 1, 1});
    inst.params.standardize = false;
    const auto names = default_cluster_names(ds, inst);
    EXPECT_EQ(names, (std::vector<std::string>{"r1", "r4"}));
}

TEST(Uncertainty, WellSeparatedBlobsFlagNothing) {
    const auto blobs = testing::three_blobs();
    const auto u = uncertain_points(blobs.data.values(), canonicalize(blobs.truth), Metric::euclidean);
    EXPECT_TRUE(u.flagged.empty());
    for (double c : u.confidence) {
        EXPECT_GE(c, 0.0);
        EXPECT_LE(c, 1.0);
    }
}

TEST(Uncertainty, MidpointIsFlagged) {
    auto blobs = testing::gaussian_blobs({{0, 0}, {10, 0}}, 60, 0.5, 3);
    Matrix X(61, 2);
    X.topRows(60) = blobs.data.values();
    X.row(60) << 5.0, 0.0;
    std::vector<int> labels = blobs.truth;
    labels.push_back(0);
    const auto u = uncertain_points(X, canonicalize(labels), Metric::euclidean);
    EXPECT_TRUE(u.flagged.contains(60));
    EXPECT_NEAR(u.silhouette[60], 0.0, 0.1);
}

TEST(Uncertainty, DecileCap) {
    // 70 points in two tight groups plus 30 points sitting between them.
    Matrix X(100, 1);
    std::vector<int> labels(100);
    for (int i = 0; i < 100; ++i) {
        if (i < 35) {
            X(i, 0) = 0.001 * i;
            labels[static_cast<std::size_t>(i)] = 0;
        } else if (i < 70) {
            X(i, 0) = 10 + 0.001 * i;
            labels[static_cast<std::size_t>(i)] = 1;
        } else {
            X(i, 0) = 5 + 0.001 * (i - 70);
            labels[static_cast<std::size_t>(i)] = i % 2;
        }
    }
    const auto u = uncertain_points(X, canonicalize(labels), Metric::euclidean);
    std::size_t below = 0;
    for (double s : u.silhouette) below += s < kUncertainSilhouette;
    EXPECT_GE(below, 30u);
    EXPECT_EQ(u.flagged.size(), 10u);
}

TEST(Uncertainty, ShrinksAsSeparationGrows) {
    std::size_t previous = std::numeric_limits<std::size_t>::max();
    for (double dist : {1.0, 2.0, 3.0, 5.0, 8.0}) {
        const auto blobs = testing::gaussian_blobs({{0, 0}, {dist, 0}}, 200, 1.0, 9);
        const auto u = uncertain_points(blobs.data.values(), canonicalize(blobs.truth), Metric::euclidean);
        std::size_t below = 0;
        for (double s : u.silhouette) below += s < kUncertainSilhouette;
        EXPECT_LE(below, previous);
        previous = below;
    }
}

TEST(Reassignment, CurrentLabelsRankCurrentParamsFirst) {
    const auto blobs = testing::three_blobs(60);
    ClusteringParams p = default_params(blobs.data);
    p.algorithm = Algorithm::agglomerative;
    p.linkage = Linkage::complete;
    const auto inst = run_clustering(blobs.data, p);
    const auto ranked = reassignment_search(blobs.data, inst, inst.labeling.labels);
    EXPECT_EQ(ranked.size(), 25u);
    EXPECT_EQ(ranked.front().params, p);
    EXPECT_EQ(ranked.front().ami, 1.0);
    for (std::size_t i = 1; i < ranked.size(); ++i) {
        if (!ranked[i].error) EXPECT_GE(ranked[i - 1].ami, ranked[i].ami);
    }
    EXPECT_TRUE(ranked.back().error.has_value());  // ward with a non-euclidean metric
}

TEST(Reassignment, ToyTargetReachedByKMeans) {
    Matrix m(4, 1);
    m << 0, 1, 10, 11;
    const Dataset ds = testing::make_dataset(m);
    ClusteringParams p = default_params(ds, 2);
    p.algorithm = Algorithm::agglomerative;
    p.linkage = Linkage::single;
    const auto inst = run_clustering(ds, p);
    ReassignGrid grid;
    grid.metrics = {Metric::euclidean, Metric::cityblock, Metric::chebyshev};
    grid.linkages = {Linkage::single, Linkage::complete, Linkage::average};
    ASSERT_EQ(grid.expand(p).size(), 12u);
    const auto ranked = reassignment_search(ds, inst, {1, 1, 0, 0}, grid);
    ASSERT_EQ(ranked.size(), 12u);
    EXPECT_EQ(ranked.front().ami, 1.0);
    EXPECT_EQ(code_of([&] { reassignment_search(ds, inst, {1, 0}); }), ErrorCode::LengthMismatch);
}

}  // namespace
}  // namespace ctour
