#include "ctour/cluster.hpp"
#include "ctour/error.hpp"

#include <gtest/gtest.h>

#include <set>

#include "support/synthetic.hpp"

namespace ctour {
namespace {

using testing::column_dataset;

// Brute force over every 2-partition of a small point set: the minimum
// within-cluster sum of squares and the partition achieving it.
std::pair<double, std::vector<int>> best_two_partition(const std::vector<double>& xs) {
    const std::size_t n = xs.size();
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> best_labels;
    for (std::size_t mask = 1; mask + 1 < (std::size_t{1} << n); ++mask) {
        double sum[2] = {0, 0}, cnt[2] = {0, 0};
        for (std::size_t i = 0; i < n; ++i) {
            const int c = (mask >> i) & 1;
            sum[c] += xs[i];
            cnt[c] += 1;
        }
        double ss = 0;
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            const int c = (mask >> i) & 1;
            labels[i] = c;
            const double d = xs[i] - sum[c] / cnt[c];
            ss += d * d;
        }
        if (ss < best) {
            best = ss;
            best_labels = labels;
        }
    }
    return {best, best_labels};
}

bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < a.size(); ++j) {
            if ((a[i] == a[j]) != (b[i] == b[j])) return false;
        }
    }
    return true;
}

ClusteringParams raw_params(const Dataset& ds, Algorithm algo, int k) {
    ClusteringParams p = default_params(ds, k);
    p.algorithm = algo;
    p.standardize = false;
    return p;
}

TEST(Distance, Examples) {
    Vector a(2), b(2);
    a << 0, 0;
    b << 3, 4;
    EXPECT_DOUBLE_EQ(distance(a, b, Metric::euclidean), 5.0);
    EXPECT_DOUBLE_EQ(distance(a, b, Metric::cityblock), 7.0);
    EXPECT_DOUBLE_EQ(distance(a, b, Metric::chebyshev), 4.0);
    Vector v(3);
    v << 1, -2, 5;
    EXPECT_NEAR(distance(v, 2 * v, Metric::cosine), 0.0, 1e-15);
    EXPECT_NEAR(distance(v, 3 * v + Vector::Constant(3, 1.0), Metric::correlation), 0.0, 1e-15);
}

TEST(Distance, ErrorsAndSymmetry) {
    Vector a(2), b(3);
    a << 1, 2;
    b << 1, 2, 3;
    EXPECT_THROW(distance(a, b, Metric::euclidean), Error);
    Vector zero = Vector::Zero(2);
    try {
        distance(a, zero, Metric::cosine);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateVector);
    }
    Rng rng(5);
    for (int t = 0; t < 100; ++t) {
        Vector x(4), y(4);
        for (int i = 0; i < 4; ++i) {
            x(i) = rng.normal();
            y(i) = rng.normal();
        }
        for (auto m : kAllMetrics) {
            EXPECT_NEAR(distance(x, y, m), distance(y, x, m), 1e-12);
            EXPECT_GE(distance(x, y, m), 0.0);
            EXPECT_NEAR(distance(x, x, m), 0.0, 1e-12);
        }
    }
}

TEST(KMeans, FourPointsMatchBruteForce) {
    const std::vector<double> xs{0, 0.1, 10, 10.1};
    const auto [oracle_ss, oracle_labels] = best_two_partition(xs);
    const Dataset ds = column_dataset(xs);
    const auto inst = run_clustering(ds, raw_params(ds, Algorithm::kmeans, 2));
    EXPECT_NEAR(inst.inertia, oracle_ss, 1e-12);
    EXPECT_NEAR(inst.inertia, 0.01, 1e-12);
    EXPECT_TRUE(same_partition(inst.labeling.labels, oracle_labels));
}

TEST(KMeans, KEqualsNGivesSingletons) {
    const Dataset ds = column_dataset({3, 1, 4, 1.5, 9, 2.6});
    const auto inst = run_clustering(ds, raw_params(ds, Algorithm::kmeans, 6));
    EXPECT_EQ(inst.labeling.k_effective, 6);
    EXPECT_NEAR(inst.inertia, 0.0, 1e-24);
}

TEST(KMeans, InertiaNonIncreasingAndFixedPoint) {
    const auto blobs = testing::gaussian_blobs({{0, 0}, {1.5, 0}, {0, 1.5}, {1.5, 1.5}}, 200, 0.6, 9);
    const Matrix X = blobs.data.values();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto r = kmeans(X, 4, Metric::euclidean, seed, 1);
        for (std::size_t i = 1; i < r.history.size(); ++i) EXPECT_LE(r.history[i], r.history[i - 1] + 1e-9);
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            const double own = (X.row(i) - r.centroids.row(r.labels[static_cast<std::size_t>(i)])).norm();
            for (Eigen::Index c = 0; c < r.centroids.rows(); ++c) {
                EXPECT_LE(own, (X.row(i) - r.centroids.row(c)).norm() + 1e-12);
            }
        }
    }
}

TEST(KMeans, RecoversBlobs) {
    const auto blobs = testing::three_blobs();
    const auto inst = run_clustering(blobs.data, default_params(blobs.data, 3));
    EXPECT_TRUE(same_partition(inst.labeling.labels, blobs.truth));
}

TEST(Agglomerative, CompleteLinkageOnFourPoints) {
    // By hand: merges {0,0.1} at 0.1, {10,10.1} at 0.1, then both at 10.1.
    const Dataset ds = column_dataset({0, 0.1, 10, 10.1});
    auto p = raw_params(ds, Algorithm::agglomerative, 2);
    p.linkage = Linkage::complete;
    const auto inst = run_clustering(ds, p);
    EXPECT_EQ(inst.labeling.labels, (std::vector<int>{0, 0, 1, 1}));
    const auto merges = hierarchical_merges(pairwise_distances(ds.values(), Metric::euclidean), Linkage::complete);
    ASSERT_EQ(merges.size(), 3u);
    EXPECT_NEAR(merges[0].height, 0.1, 1e-12);
    EXPECT_NEAR(merges[1].height, 0.1, 1e-12);
    EXPECT_NEAR(merges[2].height, 10.1, 1e-12);
    EXPECT_EQ(merges[2].size, 4u);
}

TEST(Agglomerative, LinkageHeightsMatchDefinitions) {
    // 1-D points 0, 1, 3, 7: single/complete/average heights by hand.
    const Matrix D = pairwise_distances(column_dataset({0, 1, 3, 7}).values(), Metric::euclidean);
    auto heights = [&](Linkage l) {
        std::vector<double> h;
        for (const auto& m : hierarchical_merges(D, l)) h.push_back(m.height);
        return h;
    };
    const auto single = heights(Linkage::single);
    EXPECT_NEAR(single[0], 1, 1e-12);
    EXPECT_NEAR(single[1], 2, 1e-12);
    EXPECT_NEAR(single[2], 4, 1e-12);
    const auto complete = heights(Linkage::complete);
    EXPECT_NEAR(complete[1], 3, 1e-12);
    EXPECT_NEAR(complete[2], 7, 1e-12);
    const auto average = heights(Linkage::average);
    EXPECT_NEAR(average[1], 2.5, 1e-12);        // {0,1} to 3
    EXPECT_NEAR(average[2], (7 + 6 + 4) / 3.0, 1e-12);
    // Ward height: sqrt(2 na nb / (na + nb)) times the centroid distance.
    const auto ward = heights(Linkage::ward);
    EXPECT_NEAR(ward[0], 1, 1e-12);
    const double c01 = 0.5;
    EXPECT_NEAR(ward[1], std::sqrt(2.0 * 2.0 * 1.0 / 3.0) * std::abs(3 - c01), 1e-12);
}

TEST(Agglomerative, ExtremeCuts) {
    const auto blobs = testing::three_blobs(30);
    for (auto l : kAllLinkages) {
        auto p = raw_params(blobs.data, Algorithm::agglomerative, 1);
        p.linkage = l;
        auto one = run_clustering(blobs.data, p);
        EXPECT_EQ(one.labeling.k_effective, 1);
        p.k = 30;
        auto all = run_clustering(blobs.data, p);
        EXPECT_EQ(all.labeling.k_effective, 30);
    }
}

TEST(Agglomerative, WardRequiresEuclidean) {
    const Dataset ds = column_dataset({0, 1, 2});
    auto p = raw_params(ds, Algorithm::agglomerative, 2);
    p.linkage = Linkage::ward;
    p.metric = Metric::cityblock;
    try {
        run_clustering(ds, p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidCombination);
    }
}

TEST(Dbscan, CoreChainsAndNoise) {
    const Dataset ds = column_dataset({0, 0.5, 1.0, 1.5, 10, 10.4, 10.8, 30});
    auto p = raw_params(ds, Algorithm::dbscan, 1);
    p.eps = 0.6;
    p.min_pts = 2;
    const auto inst = run_clustering(ds, p);
    EXPECT_EQ(inst.labeling.labels, (std::vector<int>{0, 0, 0, 0, 1, 1, 1, kNoise}));
    EXPECT_EQ(inst.labeling.k_effective, 2);
    EXPECT_EQ(inst.centroids.rows(), 2);
}

TEST(Dbscan, EveryClusteredPointIsReachableFromACore) {
    const auto blobs = testing::gaussian_blobs({{0, 0}, {3, 3}}, 60, 0.5, 4);
    const Matrix& X = blobs.data.values();
    const double eps = 0.5;
    const int min_pts = 4;
    const auto labels = dbscan(X, eps, min_pts, Metric::euclidean);
    const Matrix D = pairwise_distances(X, Metric::euclidean);
    auto is_core = [&](Eigen::Index i) { return (D.row(i).array() <= eps).count() >= min_pts; };
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const int l = labels[static_cast<std::size_t>(i)];
        if (l == kNoise) {
            // Noise points are not within eps of any core point.
            for (Eigen::Index j = 0; j < X.rows(); ++j) {
                if (is_core(j)) EXPECT_GT(D(i, j), eps);
            }
            continue;
        }
        bool near_core = false;
        for (Eigen::Index j = 0; j < X.rows(); ++j) {
            if (labels[static_cast<std::size_t>(j)] == l && is_core(j) && D(i, j) <= eps) near_core = true;
        }
        EXPECT_TRUE(near_core);
    }
}

TEST(Labeling, CanonicalOrderBySize) {
    const auto l = canonicalize({5, 2, 2, kNoise, 5, 5, 7});
    EXPECT_EQ(l.labels, (std::vector<int>{0, 1, 1, kNoise, 0, 0, 2}));
    EXPECT_EQ(l.k_effective, 3);
    // Equal sizes: the cluster whose first member comes first wins.
    EXPECT_EQ(canonicalize({1, 0, 1, 0}).labels, (std::vector<int>{0, 1, 0, 1}));
}

TEST(RunClustering, DeterministicAndLargestClusterFirst) {
    const auto blobs = testing::gaussian_blobs({{0, 0}, {4, 0}, {0, 4}}, 150, 1.0, 12);
    for (auto algo : {Algorithm::kmeans, Algorithm::agglomerative}) {
        auto p = default_params(blobs.data, 3);
        p.algorithm = algo;
        p.seed = 99;
        const auto a = run_clustering(blobs.data, p);
        const auto b = run_clustering(blobs.data, p);
        EXPECT_EQ(a.labeling, b.labeling);
        EXPECT_EQ(a.cache_key, b.cache_key);
        std::vector<int> sizes(3, 0);
        for (int l : a.labeling.labels) ++sizes[static_cast<std::size_t>(l)];
        EXPECT_GE(sizes[0], sizes[1]);
        EXPECT_GE(sizes[1], sizes[2]);
    }
}

TEST(RunClustering, CentroidsAreMeansInClusteringSpace) {
    const auto blobs = testing::three_blobs(60);
    auto p = default_params(blobs.data, 3);
    const auto inst = run_clustering(blobs.data, p);
    const Matrix X = instance_matrix(blobs.data, inst);
    for (int c = 0; c < 3; ++c) {
        Vector mean = Vector::Zero(X.cols());
        double count = 0;
        for (std::size_t i = 0; i < inst.rows.size(); ++i) {
            if (inst.labeling.labels[i] == c) {
                mean += X.row(static_cast<Eigen::Index>(i)).transpose();
                count += 1;
            }
        }
        EXPECT_TRUE(inst.centroids.row(c).transpose().isApprox(mean / count, 1e-12));
    }
}

TEST(RunClustering, TooFewRows) {
    const Dataset ds = column_dataset({1, 2});
    try {
        auto p = raw_params(ds, Algorithm::kmeans, 2);
        p.k = 3;
        run_clustering(ds, p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TooFewRows);
    }
}

TEST(RunClustering, SampledRowsAreClustered) {
    const auto blobs = testing::three_blobs(300);
    auto p = default_params(blobs.data, 3);
    p.sample_rate = 0.1;
    const auto inst = run_clustering(blobs.data, p);
    EXPECT_EQ(inst.rows.size(), 30u);
    EXPECT_EQ(inst.labeling.labels.size(), 30u);
}

TEST(Isolation, SplitsOneBlobOnly) {
    const auto blobs = testing::three_blobs(90);
    const auto parent = run_clustering(blobs.data, default_params(blobs.data, 3));
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < parent.rows.size(); ++i) {
        if (parent.labeling.labels[i] == 1) members.push_back(parent.rows[i]);
    }
    auto p2 = parent.params;
    p2.k = 2;
    const auto child = isolate_and_recluster(blobs.data, parent, Selection(members), p2);
    EXPECT_EQ(child.rows, members);
    EXPECT_EQ(child.labeling.k_effective, 2);
    EXPECT_EQ(parent.labeling.k_effective, 3);
}

TEST(Isolation, AllRowsEqualsFullRun) {
    const auto blobs = testing::three_blobs(60);
    const auto parent = run_clustering(blobs.data, default_params(blobs.data, 3));
    auto p2 = parent.params;
    p2.k = 4;
    const auto child = isolate_and_recluster(blobs.data, parent, Selection::all(60), p2);
    const auto direct = run_clustering(blobs.data, p2);
    EXPECT_EQ(child.labeling, direct.labeling);
    EXPECT_EQ(child.cache_key, direct.cache_key);
}

TEST(Isolation, SingleRowSingleCluster) {
    const auto blobs = testing::three_blobs(30);
    const auto parent = run_clustering(blobs.data, default_params(blobs.data, 3));
    auto p2 = parent.params;
    p2.k = 1;
    const auto child = isolate_and_recluster(blobs.data, parent, Selection({4}), p2);
    EXPECT_EQ(child.labeling.labels, (std::vector<int>{0}));
    EXPECT_THROW(isolate_and_recluster(blobs.data, parent, Selection{}, p2), Error);
}

}  // namespace
}  // namespace ctour
