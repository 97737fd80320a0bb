#pragma once

#include "ctour/cluster.hpp"
#include "ctour/data.hpp"

#include <array>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ctour {

enum class RankMethod { variance, anova_f, correlation_filter, pca_loading };
inline constexpr std::array kAllRankMethods{RankMethod::variance, RankMethod::anova_f, RankMethod::correlation_filter,
                                            RankMethod::pca_loading};
std::string_view to_string(RankMethod m);
RankMethod parse_rank_method(std::string_view s);

struct RankedFeature {
    std::size_t feature = 0;
    std::string name;
    double score = 0;
    std::optional<double> p_value;  // anova_f only
    bool kept = true;               // correlation_filter: false for redundant features
};

struct FeatureRanking {
    RankMethod method = RankMethod::variance;
    std::vector<RankedFeature> ranked;  // score descending, feature index on ties
};

// Ranks the enabled features over the given rows (all rows when empty).
// labels, when given, is aligned with rows; anova_f needs it.
FeatureRanking rank_features(const Dataset& ds, RankMethod method, const std::vector<int>* labels = nullptr,
                             const std::vector<std::size_t>& rows = {});
FeatureRanking rank_features(const Dataset& ds, RankMethod method, const ClusteringInstance& inst);

struct AnovaResult {
    double f = 0;
    double p_value = 1;
};
// One-way ANOVA across the non-noise groups of labels.
AnovaResult anova(const std::vector<double>& values, const std::vector<int>& labels);

struct WelchResult {
    double t = 0;
    double p_value = 1;
};
WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

inline constexpr double kRedundantCorrelation = 0.95;

struct FeatureDendrogram {
    std::vector<std::size_t> features;  // leaf i of the merge list is features[i]
    std::vector<std::string> names;
    std::vector<Merge> merges;
};

FeatureDendrogram feature_agglomeration(const Dataset& ds);

inline constexpr double kZClip = 2.5;

struct AggregateCell {
    double mean = 0;
    double z = 0;  // clipped to [-2.5, 2.5]
    double p_value = 1;
};

struct AggregateMatrix {
    std::vector<int> clusters;  // column order, largest cluster first
    std::vector<std::size_t> cluster_sizes;
    std::vector<std::size_t> features;  // row order, most relevant first
    std::vector<std::string> feature_names;
    std::vector<double> feature_means;
    std::vector<double> feature_stds;
    std::vector<double> feature_p_values;  // ANOVA across clusters
    std::vector<std::vector<AggregateCell>> cells;  // [cluster position][feature position]

    const AggregateCell& cell(int cluster, std::size_t feature) const;
};

// Features default to the top_m enabled features by ANOVA F; pass a list to override.
AggregateMatrix aggregate_matrix(const Dataset& ds, const ClusteringInstance& inst, std::size_t top_m = 10,
                                 const std::vector<std::size_t>& features = {});

struct RuleTreeNode {
    bool leaf = true;
    std::size_t feature = 0;
    double threshold = 0;  // left: value <= threshold, right: value > threshold
    int left = -1, right = -1;
    int prediction = 0;
    std::vector<std::size_t> histogram;  // per class id
    std::size_t samples = 0;
    int depth = 0;
};

struct RuleTree {
    std::vector<RuleTreeNode> nodes;  // root at 0
    std::vector<std::string> feature_names;
    std::vector<int> classes;  // class id for each histogram slot
    int max_depth = 0;
    double training_fidelity = 1.0;

    int predict(const Eigen::Ref<const Vector>& x) const;
    std::size_t leaf_of(const Eigen::Ref<const Vector>& x) const;
};

// CART with Gini impurity. Ties go to the lowest feature index, then the
// lowest threshold. Rows labelled as noise are left out.
RuleTree fit_rule_tree(const Matrix& X, const std::vector<int>& labels, int max_depth,
                       std::vector<std::string> feature_names = {});
RuleTree fit_rule_tree(const Dataset& ds, const ClusteringInstance& inst, int max_depth = 3);

struct RuleCondition {
    std::size_t feature = 0;
    bool less_equal = true;
    double threshold = 0;
};

struct LeafRule {
    std::size_t node = 0;
    int cluster = 0;
    std::size_t samples = 0;
    std::vector<RuleCondition> conditions;  // tightest bound per feature and side
    std::string text;

    bool matches(const Eigen::Ref<const Vector>& x) const;
};

struct ClusterRules {
    int cluster = 0;
    std::vector<LeafRule> paths;  // most populated first
};

std::vector<LeafRule> leaf_rules(const RuleTree& tree);
// Empty when the tree is a single leaf.
std::vector<ClusterRules> extract_rules(const RuleTree& tree);

inline constexpr double kVeryZ = 1.5;
inline constexpr double kModerateZ = 0.75;

std::string describe_cluster(const AggregateMatrix& m, int cluster, const RuleTree* rules = nullptr,
                             const std::string& name = {});

// Row id of the member closest to each cluster centroid, by cluster id.
std::vector<std::string> default_cluster_names(const Dataset& ds, const ClusteringInstance& inst);

inline constexpr double kUncertainSilhouette = 0.1;

struct UncertainPoints {
    Selection flagged;                // positions within the clustered rows
    std::vector<double> confidence;   // (s + 1) / 2
    std::vector<double> silhouette;
};

UncertainPoints uncertain_points(const Matrix& X, const Labeling& labeling, Metric metric);

struct ReassignGrid {
    std::vector<Algorithm> algorithms{Algorithm::kmeans, Algorithm::agglomerative};
    std::vector<Metric> metrics{kAllMetrics.begin(), kAllMetrics.end()};
    std::vector<Linkage> linkages{kAllLinkages.begin(), kAllLinkages.end()};

    // Linkage only multiplies the agglomerative entries.
    std::vector<ClusteringParams> expand(const ClusteringParams& base) const;
};

struct ReassignCandidate {
    ClusteringParams params;
    double ami = -std::numeric_limits<double>::infinity();
    std::optional<std::string> error;
};

// Runs every grid entry on the current instance's rows with k fixed and ranks
// by AMI against the desired labels. Ties keep the current parameters first,
// then grid order; failed entries sit at the tail.
std::vector<ReassignCandidate> reassignment_search(const Dataset& ds, const ClusteringInstance& current,
                                                   const std::vector<int>& desired, const ReassignGrid& grid = {});

}  // namespace ctour
