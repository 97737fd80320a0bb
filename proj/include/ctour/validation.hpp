#pragma once

#include "ctour/cluster.hpp"
#include "ctour/projection.hpp"

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ctour {

enum class MeasureId { silhouette, calinski_harabasz, davies_bouldin, sdbw };
enum class Direction { maximize, minimize };
enum class OptimumRule { max, min, elbow };

inline constexpr std::array kAllMeasures{MeasureId::silhouette, MeasureId::calinski_harabasz,
                                         MeasureId::davies_bouldin, MeasureId::sdbw};

struct MeasureInfo {
    MeasureId id;
    Direction direction;
    OptimumRule rule;
};

MeasureInfo measure_info(MeasureId id);
std::string_view to_string(MeasureId id);
MeasureId parse_measure(std::string_view s);

// Runs one clustering for a parameter set on a fixed dataset. The service
// passes a caching runner; the default calls run_clustering directly.
using ClusterRunner = std::function<ClusteringInstance(const ClusteringParams&)>;
ClusterRunner direct_runner(const Dataset& ds);

struct SilhouetteResult {
    std::vector<double> per_point;  // noise points are 0 and left out of the mean
    double mean = 0;
};

SilhouetteResult silhouette(const Matrix& X, const Labeling& labeling, Metric metric);
SilhouetteResult silhouette_from_distances(const Matrix& distances, const Labeling& labeling);

double internal_measure(const Matrix& X, const Labeling& labeling, MeasureId id, Metric metric = Metric::euclidean);

double ami(const std::vector<int>& a, const std::vector<int>& b);
double ari(const std::vector<int>& a, const std::vector<int>& b);
double ami(const Labeling& a, const Labeling& b);
double ari(const Labeling& a, const Labeling& b);

// Exact expected mutual information of two partitions with the given class
// sizes under the hypergeometric (random permutation) model. Natural log.
double expected_mutual_information(const std::vector<std::size_t>& a_sizes, const std::vector<std::size_t>& b_sizes);

// True when the two label vectors describe the same partition.
bool same_partition(const std::vector<int>& a, const std::vector<int>& b);

// Index of the point farthest from the chord joining the first and last
// points, after scaling both axes to [0,1]. Ties go to the lower index.
std::size_t elbow_index(const std::vector<double>& xs, const std::vector<double>& ys);

enum class Confidence { high, low };
std::string_view to_string(Confidence c);

inline constexpr double kLowConfidenceSilhouette = 0.25;

struct KScan {
    std::vector<int> k_values;
    std::map<MeasureId, std::vector<double>> scores;
    std::vector<double> inertia;
    std::map<MeasureId, int> suggestions;
    int suggested_k = 0;  // by the first requested measure
    int elbow_k = 0;      // elbow of the inertia curve
    Confidence confidence = Confidence::high;
    double best_silhouette = 0;
};

inline constexpr std::size_t kMaxScanValues = 32;

KScan k_scan(const Dataset& ds, const ClusteringParams& base, const std::vector<int>& k_values,
             const std::vector<MeasureId>& measures = {MeasureId::silhouette}, const ClusterRunner& runner = {});

enum class Condition { skewed_distributions, subclusters, varying_density, noise, monotonicity };
inline constexpr std::array kAllConditions{Condition::skewed_distributions, Condition::subclusters,
                                           Condition::varying_density, Condition::noise, Condition::monotonicity};
std::string_view to_string(Condition c);

struct Conditions {
    bool skewed_distributions = false;
    bool subclusters = false;
    bool varying_density = false;
    bool noise = false;
    bool monotonicity = false;

    bool get(Condition c) const;
    void set(Condition c, bool value);
};

// Whether a measure is known to break down under a condition.
bool measure_fails(MeasureId id, Condition c);

inline constexpr double kSkewThreshold = 1.0;
inline constexpr double kDensityRatioThreshold = 3.0;
inline constexpr double kSubclusterSilhouette = 0.4;

// Skew, density and subcluster detectors. Noise and monotonicity are left
// false since they only come from user preferences.
Conditions detect_conditions(const Dataset& ds, const ClusteringInstance& inst);

std::vector<MeasureId> suitable_measures(const Conditions& detected, const Conditions& prefs);

struct InternalScores {
    double silhouette = 0;
    double davies_bouldin = 0;
    double calinski_harabasz = 0;
};

// Measures in the instance's own clustering space and metric; nullopt when
// fewer than two clusters were found.
std::optional<InternalScores> internal_scores(const Dataset& ds, const ClusteringInstance& inst);

std::vector<double> combined_score(const std::vector<std::optional<InternalScores>>& scores);
std::vector<double> combined_score(const Dataset& ds, const std::vector<ClusteringInstance>& candidates);

enum class SuggestKind { metric, linkage };

struct CandidateScore {
    std::string value;
    double score = 0;
    std::optional<std::string> error;  // set when the candidate could not be run
};

struct ParameterSuggestion {
    SuggestKind kind;
    std::string best;
    std::vector<CandidateScore> candidates;  // in canonical value order
};

ParameterSuggestion suggest_parameter(const Dataset& ds, const ClusteringInstance& inst, SuggestKind kind,
                                      const ClusterRunner& runner = {});

double score_projection(const Embedding& e, const Labeling& labeling);

}  // namespace ctour
