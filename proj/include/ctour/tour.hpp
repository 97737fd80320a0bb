#pragma once

#include "ctour/cluster.hpp"
#include "ctour/projection.hpp"
#include "ctour/rng.hpp"
#include "ctour/validation.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace ctour {

enum class TourParam { feature_subset, k, algorithm, metric, linkage, standardize };
inline constexpr std::array kAllTourParams{TourParam::feature_subset, TourParam::k,       TourParam::algorithm,
                                           TourParam::metric,         TourParam::linkage, TourParam::standardize};
inline constexpr std::size_t kTourParamCount = kAllTourParams.size();

std::string_view to_string(TourParam p);
TourParam parse_tour_param(std::string_view s);

// fixed: never changes and takes the constraint value; free: changed in every
// candidate; automatic: left to the tour.
enum class ConstraintMode { automatic, fixed, free };
std::string_view to_string(ConstraintMode m);
ConstraintMode parse_constraint_mode(std::string_view s);

struct TourConstraints {
    std::array<ConstraintMode, kTourParamCount> modes{};
    ClusteringParams values;  // read for fixed parameters only

    ConstraintMode mode(TourParam p) const { return modes[static_cast<std::size_t>(p)]; }
    void fix(TourParam p, const ClusteringParams& from);
    void set(TourParam p, ConstraintMode m) { modes[static_cast<std::size_t>(p)] = m; }
    bool operator==(const TourConstraints&) const = default;
};

struct TourWeights {
    std::array<double, kTourParamCount> w{};

    double operator[](TourParam p) const { return w[static_cast<std::size_t>(p)]; }
    bool operator==(const TourWeights&) const = default;
};

enum class Feedback { none, liked, disliked };
enum class StepKind { generate, like, bad };
enum class TourMode { explore, refine };
std::string_view to_string(Feedback f);
std::string_view to_string(StepKind s);
std::string_view to_string(TourMode m);
StepKind parse_step_kind(std::string_view s);

struct TourNode {
    ClusteringInstance instance;
    std::optional<Embedding> embedding;
    std::optional<std::size_t> parent;
    Feedback feedback = Feedback::none;
};

struct TourEdge {
    std::size_t a = 0, b = 0;
    double delta_p = 0;
    double delta_l = 0;
    std::optional<double> delta_s;  // only scored while refining
};

struct TourStepRecord {
    StepKind kind = StepKind::generate;
    TourMode mode = TourMode::explore;  // mode the step ran in
    std::vector<std::size_t> batch;     // node ids added by a generate step
    std::size_t current = 0;            // current node after the step
};

struct TourConfig {
    std::size_t batch = 8;
    int probes = 3;
    int redraws = 3;
    double tabu_radius = 0.05;
    double bad_target = 0.3;
    int k_max = 10;
    bool compute_embeddings = true;
    std::size_t tsne_max_rows = 1500;

    bool operator==(const TourConfig&) const = default;
};

struct TourState {
    std::vector<TourNode> nodes;
    std::vector<TourEdge> edges;
    TourWeights weights;
    std::optional<std::size_t> weights_node;  // node the weights were estimated at
    TourConstraints constraints;
    TourConfig config;
    std::size_t current = 0;
    TourMode mode = TourMode::explore;
    std::uint64_t seed = 0;
    std::uint64_t step_index = 0;
    std::uint64_t feature_cycle = 0;
    std::vector<std::size_t> tabu;
    std::optional<std::size_t> liked;
    std::optional<std::size_t> last_disliked;
    std::vector<TourParam> frozen;  // parameters held at the liked node's values while refining
    std::vector<TourStepRecord> history;
};

struct KRange {
    int lo = 2;
    int hi = 2;
    double width() const { return hi > lo ? static_cast<double>(hi - lo) : 1.0; }
};
KRange tour_k_range(std::size_t rows, int k_max = 10);

// c_i for one parameter: |dk| / range width for k, Jaccard distance for the
// feature set, 1 for any other change.
double change_magnitude(TourParam p, const ClusteringParams& a, const ClusteringParams& b, const KRange& range);
double delta_p(const ClusteringParams& a, const ClusteringParams& b, const TourWeights& w, const KRange& range);
// 1 - AMI; instances over different rows are maximally apart.
double delta_l(const ClusteringInstance& a, const ClusteringInstance& b);

TourState init_tour(const Dataset& ds, const ClusteringInstance& entry, const TourConstraints& constraints,
                    std::uint64_t seed, const TourConfig& config = {}, const ClusterRunner& runner = {});

TourWeights estimate_weights(const Dataset& ds, const TourState& state, Rng& rng, const ClusterRunner& runner = {});

// Draws, runs and filters one batch around the current node. Advances the
// feature-ranking cycle in state.
std::vector<ClusteringInstance> generate_candidates(const Dataset& ds, TourState& state, Rng& rng,
                                                    const ClusterRunner& runner = {});

struct StepResult {
    std::size_t chosen = 0;
    std::vector<std::size_t> batch;
};

StepResult step(const Dataset& ds, TourState& state, StepKind feedback, const ClusterRunner& runner = {});

Embedding choose_embedding(const Dataset& ds, const ClusteringInstance& inst, std::uint64_t seed,
                           std::size_t tsne_max_rows = 1500);
// cmds uses metric; pca and tsne always work in euclidean space.
Embedding choose_embedding(const Matrix& X, const Labeling& labeling, Metric metric, std::uint64_t seed,
                           std::size_t tsne_max_rows = 1500);

ClusteringParams accept(const TourState& state);

}  // namespace ctour
