#pragma once

#include "ctour/data.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace ctour {

enum class Algorithm { kmeans, agglomerative, dbscan };
enum class Metric { euclidean, cityblock, cosine, chebyshev, correlation };
enum class Linkage { single, complete, average, ward };

inline constexpr std::array kAllAlgorithms{Algorithm::kmeans, Algorithm::agglomerative, Algorithm::dbscan};
inline constexpr std::array kAllMetrics{Metric::euclidean, Metric::cityblock, Metric::cosine, Metric::chebyshev,
                                        Metric::correlation};
inline constexpr std::array kAllLinkages{Linkage::single, Linkage::complete, Linkage::average, Linkage::ward};

std::string_view to_string(Algorithm a);
std::string_view to_string(Metric m);
std::string_view to_string(Linkage l);
Algorithm parse_algorithm(std::string_view s);
Metric parse_metric(std::string_view s);
Linkage parse_linkage(std::string_view s);

struct ClusteringParams {
    Algorithm algorithm = Algorithm::kmeans;
    Metric metric = Metric::euclidean;
    Linkage linkage = Linkage::average;
    int k = 3;
    double eps = 0.5;
    int min_pts = 5;
    std::vector<std::size_t> feature_subset;  // sorted, unique
    double sample_rate = 1.0;
    std::uint64_t seed = 0;
    bool standardize = true;

    bool operator==(const ClusteringParams&) const = default;
};

// Defaults bound to a dataset: every enabled feature, k clamped to the row count.
ClusteringParams default_params(const Dataset& ds, int k = 3);

// Throws InvalidArgument / InvalidCombination for parameter sets that can never run.
void validate_params(const ClusteringParams& p, std::size_t feature_count);

inline constexpr int kNoise = -1;

struct Labeling {
    std::vector<int> labels;
    int k_effective = 0;

    bool operator==(const Labeling&) const = default;
};

// Relabels so non-noise ids are 0..k-1 by descending cluster size, ties going
// to the cluster whose first member comes first. Noise stays -1.
Labeling canonicalize(const std::vector<int>& raw);

struct ClusteringInstance {
    ClusteringParams params;
    std::vector<std::size_t> rows;  // dataset rows that were clustered
    Labeling labeling;
    Matrix centroids;  // k_effective x |feature_subset|, in the clustering space
    double inertia = 0;
    double score = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t dataset_id = 0;
    std::uint64_t cache_key = 0;
};

// The matrix an instance was clustered on: sampled rows, feature subset,
// z-scored when params.standardize is set.
struct PreparedData {
    std::vector<std::size_t> rows;
    Matrix X;
};

// base_rows restricts the candidate rows before sampling (used by isolation).
PreparedData prepare_data(const Dataset& ds, const ClusteringParams& p, const std::vector<std::size_t>* base_rows = nullptr);
// Rebuilds the matrix for the rows an instance was clustered on.
Matrix instance_matrix(const Dataset& ds, const ClusteringInstance& inst);

// Fewest features on which a metric separates anything: angle-based distances
// say nothing on one feature (cosine) or two (correlation).
std::size_t min_features(Metric metric);

double distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b, Metric metric);

// Total version used inside the algorithms: a degenerate vector under cosine
// or correlation is at distance 0 from an identical vector and 1 otherwise.
double metric_distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b, Metric metric) noexcept;

Matrix pairwise_distances(const Matrix& X, Metric metric);

struct KMeansResult {
    std::vector<int> labels;
    Matrix centroids;
    double objective = 0;  // sum of squared metric distances to centroids
    std::vector<double> history;  // objective after each update of the winning run
    int iterations = 0;
};

inline constexpr int kKMeansRestarts = 10;
inline constexpr int kKMeansMaxIter = 300;
inline constexpr double kKMeansTol = 1e-6;

KMeansResult kmeans(const Matrix& X, int k, Metric metric, std::uint64_t seed, int restarts = kKMeansRestarts);

// One merge of a hierarchical clustering. Nodes 0..n-1 are leaves and the
// i-th merge creates node n+i. Heights are non-decreasing.
struct Merge {
    std::size_t a = 0, b = 0;
    double height = 0;
    std::size_t size = 0;
};

// Lance-Williams agglomeration over a full symmetric distance matrix.
std::vector<Merge> hierarchical_merges(const Matrix& distances, Linkage linkage);
// Flat labels after applying the first n-k merges.
std::vector<int> cut_merges(const std::vector<Merge>& merges, std::size_t n, std::size_t k);

std::vector<int> dbscan(const Matrix& X, double eps, int min_pts, Metric metric);

ClusteringInstance run_clustering(const Dataset& ds, const ClusteringParams& p);
ClusteringInstance run_clustering_on_rows(const Dataset& ds, const std::vector<std::size_t>& rows,
                                          const ClusteringParams& p);

// Re-clusters the selected rows of an existing instance; the parent is untouched.
ClusteringInstance isolate_and_recluster(const Dataset& ds, const ClusteringInstance& parent, const Selection& sel,
                                         const ClusteringParams& p2);

std::uint64_t params_hash(const ClusteringParams& p);
std::uint64_t compute_cache_key(std::uint64_t dataset_id, const std::vector<std::size_t>* base_rows,
                                const ClusteringParams& p);

// Number of clusterings actually executed in this process.
std::uint64_t clustering_executions();

}  // namespace ctour
