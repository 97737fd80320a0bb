#include "ctour/session.hpp"

#include "ctour/error.hpp"
#include "ctour/insight.hpp"

#include <algorithm>
#include <chrono>

namespace ctour {

namespace {

const std::map<std::string, std::vector<std::string>>& op_parts() {
    static const std::map<std::string, std::vector<std::string>> parts{
        {"add_view", {"views", "active", "next_view_id"}},
        {"remove_view", {"views", "active"}},
        {"set_active", {"active"}},
        {"set_params", {"views"}},
        {"set_k", {"views"}},
        {"rename_cluster", {"views"}},
        {"isolate", {"views", "active", "next_view_id"}},
        {"set_feature_enabled", {"enabled"}},
        {"start_tour", {"tours", "next_tour_id"}},
        {"tour_step", {"tours"}},
        {"accept_tour", {"views", "active"}},
        {"remove_tour", {"tours"}},
    };
    return parts;
}

const std::vector<std::string>& parts_of(const std::string& op) {
    const auto it = op_parts().find(op);
    if (it == op_parts().end()) throw Error(ErrorCode::InvalidArgument, "unknown operation '" + op + "'");
    return it->second;
}

std::int64_t wall_clock() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

Json opt_rows(const std::optional<std::vector<std::size_t>>& rows) { return rows ? Json(*rows) : Json(nullptr); }

std::optional<std::vector<std::size_t>> rows_from(const Json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<std::vector<std::size_t>>();
}

Json view_to_json(const View& v) {
    Json names = Json::object();
    for (const auto& [c, n] : v.names) names[std::to_string(c)] = n;
    return Json{{"id", v.id}, {"instance", instance_to_json(v.instance)}, {"names", names}, {"base_rows", opt_rows(v.base_rows)}};
}

View view_from_json(const Json& j) {
    View v;
    v.id = j.at("id").get<std::uint64_t>();
    v.instance = instance_from_json(j.at("instance"));
    for (const auto& [c, n] : j.at("names").items()) v.names[std::stoi(c)] = n.get<std::string>();
    v.base_rows = rows_from(j.at("base_rows"));
    return v;
}

TourConfig config_from_json(const Json& j) {
    TourConfig c;
    if (j.is_null()) return c;
    if (!j.is_object()) throw Error(ErrorCode::MalformedInput, "tour config must be an object");
    if (j.contains("batch")) c.batch = j["batch"].get<std::size_t>();
    if (j.contains("probes")) c.probes = j["probes"].get<int>();
    if (j.contains("redraws")) c.redraws = j["redraws"].get<int>();
    if (j.contains("k_max")) c.k_max = j["k_max"].get<int>();
    if (j.contains("compute_embeddings")) c.compute_embeddings = j["compute_embeddings"].get<bool>();
    if (j.contains("tsne_max_rows")) c.tsne_max_rows = j["tsne_max_rows"].get<std::size_t>();
    if (c.batch == 0 || c.probes < 0 || c.redraws < 0 || c.k_max < 2) {
        throw Error(ErrorCode::InvalidArgument, "invalid tour config");
    }
    return c;
}

std::size_t feature_arg(const Json& j, const Dataset& ds) {
    if (j.is_string()) {
        const auto f = ds.find_feature(j.get<std::string>());
        if (!f) throw Error(ErrorCode::UnknownFeature, "unknown feature '" + j.get<std::string>() + "'");
        return *f;
    }
    const auto f = j.get<std::size_t>();
    if (f >= ds.features()) throw Error(ErrorCode::UnknownFeature, "feature index out of range");
    return f;
}

// nlohmann type errors become input errors at the operation boundary.
template <typename Fn>
auto guard_json(Fn&& fn, ErrorCode code) -> decltype(fn()) {
    try {
        return fn();
    } catch (const nlohmann::json::exception& e) {
        throw Error(code, e.what());
    }
}

}  // namespace

Session::Session(Dataset ds, std::shared_ptr<PrecomputeCache> cache, Clock clock)
    : ds_(std::move(ds)),
      initial_enabled_(ds_.enabled_features()),
      cache_(cache ? std::move(cache) : std::make_shared<PrecomputeCache>()),
      clock_(clock ? std::move(clock) : Clock(wall_clock)) {}

const View& Session::view(std::uint64_t id) const {
    for (const auto& v : views_) {
        if (v.id == id) return v;
    }
    throw Error(ErrorCode::NotFound, "no view " + std::to_string(id));
}

View& Session::view_mut(std::uint64_t id) { return const_cast<View&>(std::as_const(*this).view(id)); }

const TourSlot& Session::tour(std::uint64_t id) const {
    for (const auto& t : tours_) {
        if (t.id == id) return t;
    }
    throw Error(ErrorCode::NotFound, "no tour " + std::to_string(id));
}

TourSlot& Session::tour_mut(std::uint64_t id) { return const_cast<TourSlot&>(std::as_const(*this).tour(id)); }

std::string Session::cluster_name(std::uint64_t view_id, int cluster) const {
    const auto& v = view(view_id);
    if (cluster < 0 || cluster >= v.instance.labeling.k_effective) {
        throw Error(ErrorCode::UnknownCluster, "no cluster " + std::to_string(cluster));
    }
    const auto it = v.names.find(cluster);
    if (it != v.names.end()) return it->second;
    return default_cluster_names(ds_, v.instance)[static_cast<std::size_t>(cluster)];
}

std::vector<std::string> Session::cluster_names(std::uint64_t view_id) const {
    const auto& v = view(view_id);
    auto names = default_cluster_names(ds_, v.instance);
    for (const auto& [c, n] : v.names) {
        if (c >= 0 && static_cast<std::size_t>(c) < names.size()) names[static_cast<std::size_t>(c)] = n;
    }
    return names;
}

ClusteringInstance Session::cluster(const ClusteringParams& p, const std::optional<std::vector<std::size_t>>& base_rows) {
    if (base_rows) return run_clustering_on_rows(ds_, *base_rows, p);
    return cache_->clustering(ds_, p);
}

std::uint64_t Session::add_view(ClusteringInstance inst, std::optional<std::vector<std::size_t>> base_rows) {
    const std::uint64_t id = next_view_id_++;
    views_.push_back(View{id, std::move(inst), {}, std::move(base_rows)});
    active_ = id;
    return id;
}

Json Session::apply(const std::string& op, const Json& params) { return apply_at(op, params, clock_()); }

Json Session::apply_at(const std::string& op, const Json& params, std::int64_t timestamp) {
    const Json before = snapshot(parts_of(op));
    Json result;
    try {
        result = run(op, params);
    } catch (...) {
        restore(before);
        throw;
    }
    log_.resize(cursor_);
    log_.push_back(LogEntry{timestamp, op, params, Json{{"op", "restore"}, {"params", before}}});
    ++cursor_;
    return result;
}

void Session::undo() {
    if (!can_undo()) throw Error(ErrorCode::NothingToUndo, "nothing to undo");
    restore(log_[cursor_ - 1].inverse.at("params"));
    --cursor_;
}

void Session::redo() {
    if (!can_redo()) throw Error(ErrorCode::NothingToRedo, "nothing to redo");
    const auto& e = log_[cursor_];
    const Json before = snapshot(parts_of(e.op));
    try {
        run(e.op, e.params);
    } catch (...) {
        restore(before);
        throw;
    }
    ++cursor_;
}

Json Session::run(const std::string& op, const Json& params) {
    return guard_json(
        [&]() -> Json {
            if (!params.is_object()) throw Error(ErrorCode::MalformedInput, "operation params must be an object");
            if (op == "add_view") {
                const auto p = params_from_request(params.value("params", Json::object()), ds_);
                return Json{{"view", add_view(cluster(p, std::nullopt), std::nullopt)}};
            }
            if (op == "remove_view") {
                const auto id = params.at("view").get<std::uint64_t>();
                view(id);
                std::erase_if(views_, [&](const View& v) { return v.id == id; });
                if (active_ == id) active_ = views_.empty() ? std::nullopt : std::optional(views_.back().id);
                return Json::object();
            }
            if (op == "set_active") {
                const auto id = params.at("view").get<std::uint64_t>();
                view(id);
                active_ = id;
                return Json::object();
            }
            if (op == "set_params" || op == "set_k") {
                auto& v = view_mut(params.at("view").get<std::uint64_t>());
                ClusteringParams p;
                if (op == "set_k") {
                    p = v.instance.params;
                    p.k = params.at("k").get<int>();
                    validate_params(p, ds_.features());
                } else {
                    p = params_from_request(params.at("params"), ds_);
                }
                auto inst = cluster(p, v.base_rows);
                v.instance = std::move(inst);
                v.names.clear();
                return Json{{"view", v.id}};
            }
            if (op == "rename_cluster") {
                auto& v = view_mut(params.at("view").get<std::uint64_t>());
                const int c = params.at("cluster").get<int>();
                if (c < 0 || c >= v.instance.labeling.k_effective) {
                    throw Error(ErrorCode::UnknownCluster, "no cluster " + std::to_string(c));
                }
                const auto name = params.at("name").get<std::string>();
                if (name.empty()) {
                    v.names.erase(c);
                } else {
                    v.names[c] = name;
                }
                return Json::object();
            }
            if (op == "isolate") {
                const auto& parent = view(params.at("view").get<std::uint64_t>());
                const Selection sel(params.at("rows").get<std::vector<std::size_t>>());
                ClusteringParams p = parent.instance.params;
                if (params.contains("params")) {
                    Json merged = params_to_json(p);
                    for (const auto& [key, value] : params["params"].items()) merged[key] = value;
                    p = params_from_request(merged, ds_);
                }
                auto inst = isolate_and_recluster(ds_, parent.instance, sel, p);
                return Json{{"view", add_view(std::move(inst), sel.rows())}};
            }
            if (op == "set_feature_enabled") {
                const auto f = feature_arg(params.at("feature"), ds_);
                ds_.set_enabled(f, params.at("enabled").get<bool>());
                return Json::object();
            }
            if (op == "start_tour") {
                const auto& v = view(params.at("view").get<std::uint64_t>());
                const auto cons = constraints_from_json(params.value("constraints", Json(nullptr)), v.instance.params, &ds_);
                const auto seed = params.value("seed", std::uint64_t{0});
                const auto cfg = config_from_json(params.value("config", Json(nullptr)));
                const auto base_rows = v.base_rows;
                ClusterRunner runner = [&](const ClusteringParams& p) { return cluster(p, base_rows); };
                TourSlot slot{next_tour_id_, v.id, base_rows, init_tour(ds_, v.instance, cons, seed, cfg, runner)};
                ++next_tour_id_;
                tours_.push_back(std::move(slot));
                return Json{{"tour", tours_.back().id}};
            }
            if (op == "tour_step") {
                auto& slot = tour_mut(params.at("tour").get<std::uint64_t>());
                const auto kind = parse_step_kind(params.at("feedback").get<std::string>());
                TourState next = slot.state;
                const auto base_rows = slot.base_rows;
                ClusterRunner runner = [&](const ClusteringParams& p) { return cluster(p, base_rows); };
                const auto r = step(ds_, next, kind, runner);
                slot.state = std::move(next);
                return Json{{"chosen", r.chosen}, {"batch", r.batch}, {"mode", to_string(slot.state.mode)}};
            }
            if (op == "accept_tour") {
                const auto& slot = tour(params.at("tour").get<std::uint64_t>());
                auto& v = view_mut(slot.view);
                v.instance = slot.state.nodes[slot.state.current].instance;
                v.names.clear();
                active_ = v.id;
                return Json{{"view", v.id}, {"params", params_to_json(accept(slot.state))}};
            }
            if (op == "remove_tour") {
                const auto id = params.at("tour").get<std::uint64_t>();
                tour(id);
                std::erase_if(tours_, [&](const TourSlot& t) { return t.id == id; });
                return Json::object();
            }
            throw Error(ErrorCode::InvalidArgument, "unknown operation '" + op + "'");
        },
        ErrorCode::MalformedInput);
}

Json Session::snapshot(const std::vector<std::string>& parts) const {
    Json out = Json::object();
    for (const auto& part : parts) {
        if (part == "views") {
            Json views = Json::array();
            for (const auto& v : views_) views.push_back(view_to_json(v));
            out[part] = std::move(views);
        } else if (part == "active") {
            out[part] = active_ ? Json(*active_) : Json(nullptr);
        } else if (part == "next_view_id") {
            out[part] = next_view_id_;
        } else if (part == "tours") {
            Json tours = Json::array();
            for (const auto& t : tours_) {
                tours.push_back(Json{{"id", t.id}, {"view", t.view}, {"base_rows", opt_rows(t.base_rows)},
                                     {"state", tour_to_json(t.state)}});
            }
            out[part] = std::move(tours);
        } else if (part == "next_tour_id") {
            out[part] = next_tour_id_;
        } else if (part == "enabled") {
            out[part] = ds_.enabled_features();
        }
    }
    return out;
}

void Session::restore(const Json& parts) {
    for (const auto& [part, value] : parts.items()) {
        if (part == "views") {
            std::vector<View> views;
            for (const auto& v : value) views.push_back(view_from_json(v));
            views_ = std::move(views);
        } else if (part == "active") {
            active_ = value.is_null() ? std::nullopt : std::optional(value.get<std::uint64_t>());
        } else if (part == "next_view_id") {
            next_view_id_ = value.get<std::uint64_t>();
        } else if (part == "tours") {
            std::vector<TourSlot> tours;
            for (const auto& t : value) {
                tours.push_back(TourSlot{t.at("id").get<std::uint64_t>(), t.at("view").get<std::uint64_t>(),
                                         rows_from(t.at("base_rows")), tour_from_json(t.at("state"))});
            }
            tours_ = std::move(tours);
        } else if (part == "next_tour_id") {
            next_tour_id_ = value.get<std::uint64_t>();
        } else if (part == "enabled") {
            ds_.set_enabled_features(value.get<std::vector<std::size_t>>());
        } else {
            throw Error(ErrorCode::CorruptPayload, "unknown state part '" + part + "'");
        }
    }
}

Json Session::state_json() const {
    return snapshot({"enabled", "views", "active", "next_view_id", "tours", "next_tour_id"});
}

std::string Session::save() const {
    Json entries = Json::array();
    for (const auto& e : log_) {
        entries.push_back(Json{{"timestamp", e.timestamp}, {"op", e.op}, {"params", e.params}, {"inverse", e.inverse}});
    }
    Json ds = dataset_to_json(ds_);
    ds["enabled"] = initial_enabled_;
    const Json doc{{"schema_version", kSessionSchemaVersion},
                   {"dataset", std::move(ds)},
                   {"state", state_json()},
                   {"log", {{"cursor", cursor_}, {"entries", std::move(entries)}}}};
    return doc.dump();
}

Session Session::load(std::string_view bytes, std::shared_ptr<PrecomputeCache> cache, Clock clock) {
    Json doc;
    try {
        doc = Json::parse(bytes);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptPayload, std::string("session is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("schema_version") || !doc["schema_version"].is_number_integer()) {
        throw Error(ErrorCode::SchemaMismatch, "session has no schema_version");
    }
    if (doc["schema_version"].get<int>() != kSessionSchemaVersion) {
        throw Error(ErrorCode::SchemaMismatch,
                    "unsupported schema_version " + std::to_string(doc["schema_version"].get<long long>()));
    }
    return guard_json(
        [&] {
            Session s(dataset_from_json(doc.at("dataset")), std::move(cache), std::move(clock));
            s.restore(doc.at("state"));
            const auto& log = doc.at("log");
            for (const auto& e : log.at("entries")) {
                const auto op = e.at("op").get<std::string>();
                if (!op_parts().count(op)) throw Error(ErrorCode::CorruptPayload, "unknown logged operation '" + op + "'");
                s.log_.push_back(LogEntry{e.at("timestamp").get<std::int64_t>(), op, e.at("params"), e.at("inverse")});
            }
            s.cursor_ = log.at("cursor").get<std::size_t>();
            if (s.cursor_ > s.log_.size()) throw Error(ErrorCode::CorruptPayload, "log cursor out of range");
            return s;
        },
        ErrorCode::CorruptPayload);
}

Session Session::replay() const {
    Dataset ds = ds_;
    ds.set_enabled_features(initial_enabled_);
    Session r(std::move(ds), cache_, clock_);
    for (const auto& e : log_) r.apply_at(e.op, e.params, e.timestamp);
    while (r.cursor_ > cursor_) r.undo();
    return r;
}

}  // namespace ctour
