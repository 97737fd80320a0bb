#pragma once

#include "ctour/cache.hpp"
#include "ctour/json_io.hpp"
#include "ctour/tour.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ctour {

inline constexpr int kSessionSchemaVersion = 1;

struct LogEntry {
    std::int64_t timestamp = 0;  // milliseconds since the epoch
    std::string op;
    Json params;
    Json inverse;  // {"op": ..., "params": ...}
};

struct View {
    std::uint64_t id = 0;
    ClusteringInstance instance;
    std::map<int, std::string> names;  // user-given names only
    std::optional<std::vector<std::size_t>> base_rows;  // set for isolated views
};

struct TourSlot {
    std::uint64_t id = 0;
    std::uint64_t view = 0;  // view the tour started from and accepts into
    std::optional<std::vector<std::size_t>> base_rows;
    TourState state;
};

// One analysis over one dataset: clustering views, cluster names, tours and
// a linear operation log with undo and redo.
//
// Operations (params in brackets):
//   add_view {params}                    -> {view}
//   remove_view {view}
//   set_active {view}
//   set_params {view, params}
//   set_k {view, k}
//   rename_cluster {view, cluster, name}  empty name restores the default
//   isolate {view, rows, params}         -> {view}
//   set_feature_enabled {feature, enabled}
//   start_tour {view, constraints, seed, config} -> {tour}
//   tour_step {tour, feedback}           -> {chosen, batch}
//   accept_tour {tour}                   -> {view, params}
//   remove_tour {tour}
class Session {
public:
    using Clock = std::function<std::int64_t()>;

    explicit Session(Dataset ds, std::shared_ptr<PrecomputeCache> cache = nullptr, Clock clock = nullptr);

    const Dataset& dataset() const { return ds_; }
    PrecomputeCache& cache() { return *cache_; }

    // Applies and logs one operation; anything after the cursor is dropped.
    Json apply(const std::string& op, const Json& params);
    void undo();
    void redo();
    bool can_undo() const { return cursor_ > 0; }
    bool can_redo() const { return cursor_ < log_.size(); }
    const std::vector<LogEntry>& log() const { return log_; }
    std::size_t cursor() const { return cursor_; }

    const std::vector<View>& views() const { return views_; }
    const View& view(std::uint64_t id) const;
    std::optional<std::uint64_t> active() const { return active_; }
    const std::vector<TourSlot>& tours() const { return tours_; }
    const TourSlot& tour(std::uint64_t id) const;

    // User name if set, else the row id of the member nearest the centroid.
    std::string cluster_name(std::uint64_t view, int cluster) const;
    std::vector<std::string> cluster_names(std::uint64_t view) const;

    // Everything except the log and the dataset values.
    Json state_json() const;
    // Full versioned document: dataset, state and log.
    std::string save() const;
    static Session load(std::string_view bytes, std::shared_ptr<PrecomputeCache> cache = nullptr, Clock clock = nullptr);

    // Rebuilds the session from its initial state by running the logged
    // operations forward and undoing back to the cursor.
    Session replay() const;

private:
    Json apply_at(const std::string& op, const Json& params, std::int64_t timestamp);
    Json run(const std::string& op, const Json& params);
    ClusteringInstance cluster(const ClusteringParams& p, const std::optional<std::vector<std::size_t>>& base_rows);
    Json snapshot(const std::vector<std::string>& parts) const;
    void restore(const Json& parts);
    View& view_mut(std::uint64_t id);
    TourSlot& tour_mut(std::uint64_t id);
    std::uint64_t add_view(ClusteringInstance inst, std::optional<std::vector<std::size_t>> base_rows);

    Dataset ds_;
    std::vector<std::size_t> initial_enabled_;
    std::shared_ptr<PrecomputeCache> cache_;
    Clock clock_;
    std::vector<View> views_;
    std::optional<std::uint64_t> active_;
    std::uint64_t next_view_id_ = 1;
    std::vector<TourSlot> tours_;
    std::uint64_t next_tour_id_ = 1;
    std::vector<LogEntry> log_;
    std::size_t cursor_ = 0;
};

}  // namespace ctour
