#include "ctour/api.hpp"

#include "ctour/error.hpp"
#include "ctour/filter.hpp"
#include "ctour/insight.hpp"
#include "ctour/tour.hpp"
#include "ctour/validation.hpp"

#include <httplib.h>

#include <charconv>
#include <sstream>

namespace ctour {

namespace {

int status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::NotFound: return 404;
        case ErrorCode::NothingToUndo:
        case ErrorCode::NothingToRedo:
        case ErrorCode::PortInUse: return 409;
        default: return is_input_error(code) ? 400 : 422;
    }
}

ApiResponse error_response(const Error& e) {
    Json err{{"code", to_string(e.code())}, {"message", e.what()}};
    if (const auto* pe = dynamic_cast<const ParseError*>(&e)) err["position"] = pe->position();
    return ApiResponse{status_for(e.code()), Json{{"error", std::move(err)}}};
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto end = s.find(sep, start);
        const auto piece = s.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        if (!piece.empty()) out.emplace_back(piece);
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return out;
}

long long parse_int(const std::string& s, const std::string& what) {
    long long v = 0;
    const auto* end = s.data() + s.size();
    const auto r = std::from_chars(s.data(), end, v);
    if (r.ec != std::errc() || r.ptr != end) throw Error(ErrorCode::MalformedInput, "bad integer for " + what + ": '" + s + "'");
    return v;
}

std::optional<std::string> query(const ApiRequest& req, const std::string& key) {
    const auto it = req.query.find(key);
    if (it == req.query.end() || it->second.empty()) return std::nullopt;
    return it->second;
}

long long query_int(const ApiRequest& req, const std::string& key, long long fallback) {
    const auto v = query(req, key);
    return v ? parse_int(*v, key) : fallback;
}

bool query_bool(const ApiRequest& req, const std::string& key) {
    const auto v = query(req, key);
    return v && (*v == "1" || *v == "true" || *v == "yes");
}

Json body_json(const ApiRequest& req) {
    if (req.body.empty()) return Json::object();
    try {
        return Json::parse(req.body);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedInput, std::string("request body is not JSON: ") + e.what());
    }
}

struct ObjectId {
    std::string session;
    char kind = 'v';
    std::uint64_t id = 0;
};

// "d1-v2" -> session d1, view 2.
ObjectId parse_object_id(const std::string& s, char kind) {
    const auto dash = s.rfind('-');
    if (dash == std::string::npos || dash + 2 > s.size() || s[dash + 1] != kind) {
        throw Error(ErrorCode::NotFound, "malformed id '" + s + "'");
    }
    const auto num = s.substr(dash + 2);
    std::uint64_t v = 0;
    const auto r = std::from_chars(num.data(), num.data() + num.size(), v);
    if (r.ec != std::errc() || r.ptr != num.data() + num.size()) throw Error(ErrorCode::NotFound, "malformed id '" + s + "'");
    return {s.substr(0, dash), kind, v};
}

std::string view_ref(const std::string& session, std::uint64_t id) { return session + "-v" + std::to_string(id); }
std::string tour_ref(const std::string& session, std::uint64_t id) { return session + "-t" + std::to_string(id); }

Json instance_body(const Session& s, const std::string& session_id, const View& v) {
    const auto& inst = v.instance;
    Json j = instance_to_json(inst);
    j["id"] = view_ref(session_id, v.id);
    j["dataset_id"] = session_id;
    j["fingerprint"] = inst.dataset_id;
    j["names"] = s.cluster_names(v.id);
    j["isolated"] = v.base_rows.has_value();
    if (const auto scores = internal_scores(s.dataset(), inst)) {
        j["score"] = number_to_json(scores->silhouette);
    }
    return j;
}

Json node_summary(const TourState& st, std::size_t id) {
    const auto& n = st.nodes.at(id);
    return Json{{"node", id},
                {"params", params_to_json(n.instance.params)},
                {"k_effective", n.instance.labeling.k_effective},
                {"labels", n.instance.labeling.labels},
                {"parent", n.parent ? Json(*n.parent) : Json(nullptr)},
                {"feedback", to_string(n.feedback)},
                {"embedding", n.embedding ? Json(to_string(n.embedding->params.method)) : Json(nullptr)}};
}

Json tour_body(const std::string& session_id, const TourSlot& t) {
    const auto& st = t.state;
    Json nodes = Json::array();
    for (std::size_t i = 0; i < st.nodes.size(); ++i) nodes.push_back(node_summary(st, i));
    Json edges = Json::array();
    for (const auto& e : st.edges) {
        edges.push_back(Json{{"a", e.a},
                             {"b", e.b},
                             {"delta_p", e.delta_p},
                             {"delta_l", e.delta_l},
                             {"delta_s", e.delta_s ? number_to_json(*e.delta_s) : Json(nullptr)}});
    }
    Json weights = Json::object();
    for (auto p : kAllTourParams) weights[std::string(to_string(p))] = st.weights[p];
    Json history = Json::array();
    for (const auto& h : st.history) {
        history.push_back(Json{{"kind", to_string(h.kind)}, {"mode", to_string(h.mode)}, {"batch", h.batch},
                               {"current", h.current}});
    }
    return Json{{"id", tour_ref(session_id, t.id)},
                {"instance_id", view_ref(session_id, t.view)},
                {"current", st.current},
                {"mode", to_string(st.mode)},
                {"constraints", constraints_to_json(st.constraints)},
                {"weights", weights},
                {"tabu", st.tabu},
                {"nodes", nodes},
                {"edges", edges},
                {"history", history}};
}

Json stats_body(const std::vector<FeatureStats>& stats, const Dataset& ds) {
    Json out = Json::array();
    for (const auto& s : stats) {
        out.push_back(Json{{"feature", s.feature},
                           {"name", ds.feature_names()[s.feature]},
                           {"count", s.count},
                           {"mean", number_to_json(s.mean)},
                           {"std", number_to_json(s.std)},
                           {"min", number_to_json(s.min)},
                           {"max", number_to_json(s.max)},
                           {"q1", number_to_json(s.q1)},
                           {"median", number_to_json(s.median)},
                           {"q3", number_to_json(s.q3)},
                           {"skewness", number_to_json(s.skewness)},
                           {"histogram", s.histogram},
                           {"histogram_lo", number_to_json(s.histogram_lo)},
                           {"histogram_hi", number_to_json(s.histogram_hi)}});
    }
    return out;
}

std::vector<std::size_t> index_list(const std::string& csv) {
    std::vector<std::size_t> out;
    for (const auto& piece : split(csv, ',')) out.push_back(static_cast<std::size_t>(parse_int(piece, "selection")));
    return out;
}

ClusterRunner view_runner(Session& s, const View& v) {
    if (v.base_rows) {
        const auto rows = *v.base_rows;
        const Dataset& ds = s.dataset();
        return [rows, &ds](const ClusteringParams& p) { return run_clustering_on_rows(ds, rows, p); };
    }
    return s.cache().runner(s.dataset());
}

}  // namespace

Api::Api(std::size_t cache_capacity, Session::Clock clock)
    : cache_(std::make_shared<PrecomputeCache>(cache_capacity)), clock_(std::move(clock)) {}

std::shared_ptr<Api::Entry> Api::find(const std::string& id) {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::NotFound, "no dataset or session '" + id + "'");
    return it->second;
}

std::string Api::create(std::unique_ptr<Session> s, const std::string& id) {
    auto entry = std::make_shared<Entry>();
    entry->session = std::move(s);
    std::lock_guard lock(mutex_);
    std::string key = id;
    while (key.empty() || (id.empty() && sessions_.count(key))) key = "d" + std::to_string(next_id_++);
    sessions_[key] = entry;
    return key;
}

ApiResponse Api::handle(const ApiRequest& req) {
    try {
        return route(req);
    } catch (const Error& e) {
        return error_response(e);
    } catch (const nlohmann::json::exception& e) {
        return error_response(Error(ErrorCode::MalformedInput, e.what()));
    } catch (const std::exception& e) {
        return ApiResponse{500, Json{{"error", {{"code", "Internal"}, {"message", e.what()}}}}};
    }
}

ApiResponse Api::route(const ApiRequest& req) {
    std::string_view path = req.path;
    if (path.substr(0, kApiPrefix.size()) != kApiPrefix) throw Error(ErrorCode::NotFound, "unknown path " + req.path);
    const auto seg = split(path.substr(kApiPrefix.size()), '/');
    const auto& m = req.method;
    const auto not_found = [&] { return Error(ErrorCode::NotFound, "no route for " + m + " " + req.path); };
    if (seg.empty()) throw not_found();

    if (seg[0] == "health" && seg.size() == 1 && m == "GET") return {200, Json{{"status", "ok"}}};

    if (seg[0] == "datasets") {
        if (seg.size() == 1 && m == "POST") {
            auto session = std::make_unique<Session>(load_csv(req.body), cache_, clock_);
            const Dataset& ds = session->dataset();
            Json body{{"rows", ds.rows()},
                      {"features", ds.features()},
                      {"feature_names", ds.feature_names()},
                      {"dropped_rows", ds.dropped_rows()},
                      {"dropped_columns", ds.dropped_columns()},
                      {"fingerprint", ds.fingerprint()}};
            const auto suggestion = sampling_suggestion(ds);
            body["sampling_suggestion"] = suggestion ? Json(*suggestion) : Json(nullptr);
            const std::string id = create(std::move(session));
            body["dataset_id"] = id;
            body["session_id"] = id;
            return {201, body};
        }
        if (seg.size() < 2) throw not_found();
        auto entry = find(seg[1]);
        std::lock_guard lock(entry->mutex);
        Session& s = *entry->session;
        const Dataset& ds = s.dataset();
        if (seg.size() == 2 && m == "GET") {
            return {200, Json{{"dataset_id", seg[1]},
                              {"rows", ds.rows()},
                              {"features", ds.features()},
                              {"feature_names", ds.feature_names()},
                              {"enabled", ds.enabled_features()},
                              {"row_ids", ds.row_ids()}}};
        }
        if (seg.size() != 3) throw not_found();
        if (seg[2] == "stats" && m == "GET") {
            std::optional<Selection> sel;
            if (const auto q = query(req, "selection")) sel = Selection(index_list(*q));
            if (sel) {
                for (auto r : sel->rows()) {
                    if (r >= ds.rows()) throw Error(ErrorCode::InvalidArgument, "selection row out of range");
                }
            }
            return {200, Json{{"stats", stats_body(feature_stats(ds, sel), ds)}}};
        }
        if (seg[2] == "correlations" && m == "GET") {
            Json out = Json::array();
            for (const auto& p : top_correlations(ds, static_cast<std::size_t>(query_int(req, "k", 5)))) {
                out.push_back(Json{{"a", p.name_a}, {"b", p.name_b}, {"r", p.r}});
            }
            return {200, Json{{"pairs", out}}};
        }
        if (seg[2] == "filter" && m == "POST") {
            const auto body = body_json(req);
            const auto sel = evaluate(parse_filter(body.at("expression").get<std::string>()), ds);
            return {200, Json{{"row_indices", sel.rows()}}};
        }
        if (seg[2] == "features" && m == "POST") {
            const auto body = body_json(req);
            s.apply("set_feature_enabled", Json{{"feature", body.at("feature")}, {"enabled", body.at("enabled")}});
            return {200, Json{{"enabled", s.dataset().enabled_features()}}};
        }
        if (seg[2] == "precompute" && m == "POST") {
            const auto body = body_json(req);
            const auto base = params_from_request(body.value("params", Json::object()), ds);
            const auto before = clustering_executions();
            const auto r = precompute_k_range(s.cache(), ds, base, body.value("from", 2), body.value("to", 8));
            return {200, Json{{"k_values", r.k_values},
                              {"computed", r.computed},
                              {"cached", r.cached},
                              {"executions", clustering_executions() - before}}};
        }
        throw not_found();
    }

    if (seg[0] == "instances") {
        if (seg.size() == 1 && m == "POST") {
            const auto body = body_json(req);
            const auto sid = body.at("dataset_id").get<std::string>();
            auto entry = find(sid);
            std::lock_guard lock(entry->mutex);
            Session& s = *entry->session;
            const auto r = s.apply("add_view", Json{{"params", body.value("params", Json::object())}});
            return {201, instance_body(s, sid, s.view(r.at("view").get<std::uint64_t>()))};
        }
        if (seg.size() < 2) throw not_found();
        const auto oid = parse_object_id(seg[1], 'v');
        auto entry = find(oid.session);
        std::lock_guard lock(entry->mutex);
        Session& s = *entry->session;
        const Dataset& ds = s.dataset();
        const View& v = s.view(oid.id);
        const auto& inst = v.instance;

        if (seg.size() == 2) {
            if (m == "GET") return {200, instance_body(s, oid.session, v)};
            if (m == "DELETE") {
                s.apply("remove_view", Json{{"view", oid.id}});
                return {200, Json{{"removed", seg[1]}}};
            }
            throw not_found();
        }
        const auto& action = seg[2];
        if (seg.size() == 3 && action == "params" && (m == "PUT" || m == "POST")) {
            const auto body = body_json(req);
            if (body.contains("params")) {
                s.apply("set_params", Json{{"view", oid.id}, {"params", body["params"]}});
            } else {
                s.apply("set_k", Json{{"view", oid.id}, {"k", body.at("k")}});
            }
            return {200, instance_body(s, oid.session, s.view(oid.id))};
        }
        if (seg.size() == 3 && action == "activate" && m == "POST") {
            s.apply("set_active", Json{{"view", oid.id}});
            return {200, Json{{"active", seg[1]}}};
        }
        if (seg.size() == 3 && action == "aggregate" && m == "GET") {
            const auto am = aggregate_matrix(ds, inst, static_cast<std::size_t>(query_int(req, "top_m", 10)));
            std::optional<RuleTree> tree;
            if (inst.labeling.k_effective >= 2) tree = fit_rule_tree(ds, inst, 3);
            const auto names = s.cluster_names(oid.id);
            Json clusters = Json::array();
            for (std::size_t c = 0; c < am.clusters.size(); ++c) {
                const int cid = am.clusters[c];
                Json cells = Json::array();
                for (const auto& cell : am.cells[c]) {
                    cells.push_back(Json{{"mean", number_to_json(cell.mean)}, {"z", number_to_json(cell.z)},
                                         {"p_value", number_to_json(cell.p_value)}});
                }
                const std::string& name = names[static_cast<std::size_t>(cid)];
                clusters.push_back(Json{{"cluster", cid},
                                        {"name", name},
                                        {"size", am.cluster_sizes[c]},
                                        {"cells", cells},
                                        {"description", describe_cluster(am, cid, tree ? &*tree : nullptr, name)}});
            }
            Json feature_p = Json::array();
            for (double p : am.feature_p_values) feature_p.push_back(number_to_json(p));
            return {200, Json{{"features", am.features},
                              {"feature_names", am.feature_names},
                              {"feature_p_values", feature_p},
                              {"clusters", clusters}}};
        }
        if (seg.size() == 3 && action == "embedding" && m == "GET") {
            const std::string method = query(req, "method").value_or("auto");
            const auto seed = static_cast<std::uint64_t>(query_int(req, "seed", 0));
            Embedding e;
            if (method == "auto") {
                e = choose_embedding(ds, inst, seed);
            } else {
                ProjectionParams pp;
                pp.method = parse_projection(method);
                pp.seed = seed;
                if (pp.method == ProjectionMethod::cmds) pp.metric = inst.params.metric;
                if (const auto q = query(req, "perplexity")) pp.perplexity = std::stod(*q);
                pp.iterations = static_cast<int>(query_int(req, "iterations", pp.iterations));
                e = s.cache().embedding(ds, inst, pp);
            }
            Json coords = Json::array();
            for (Eigen::Index i = 0; i < e.coords.rows(); ++i) coords.push_back({e.coords(i, 0), e.coords(i, 1)});
            return {200, Json{{"method", to_string(e.params.method)},
                              {"rows", inst.rows},
                              {"coords", coords},
                              {"explained_variance", {number_to_json(e.explained_variance.first),
                                                      number_to_json(e.explained_variance.second)}},
                              {"score", inst.labeling.k_effective >= 2 ? number_to_json(score_projection(e, inst.labeling))
                                                                        : Json(nullptr)}}};
        }
        if (seg.size() == 3 && action == "kscan" && m == "GET") {
            const int from = static_cast<int>(query_int(req, "from", 2));
            const int to = static_cast<int>(query_int(req, "to", 10));
            if (to < from) throw Error(ErrorCode::InvalidArgument, "empty k range");
            std::vector<int> ks;
            for (int k = from; k <= to; ++k) ks.push_back(k);
            std::vector<MeasureId> measures;
            if (const auto q = query(req, "measures")) {
                for (const auto& name : split(*q, ',')) measures.push_back(parse_measure(name));
            } else {
                measures.push_back(MeasureId::silhouette);
            }
            const auto scan = k_scan(ds, inst.params, ks, measures, view_runner(s, v));
            Json scores = Json::object();
            for (const auto& [id, vals] : scan.scores) {
                Json arr = Json::array();
                for (double x : vals) arr.push_back(number_to_json(x));
                scores[std::string(to_string(id))] = arr;
            }
            Json suggestions = Json::object();
            for (const auto& [id, k] : scan.suggestions) suggestions[std::string(to_string(id))] = k;
            return {200, Json{{"k_values", scan.k_values},
                              {"scores", scores},
                              {"inertia", scan.inertia},
                              {"suggestions", suggestions},
                              {"suggested_k", scan.suggested_k},
                              {"elbow_k", scan.elbow_k},
                              {"confidence", to_string(scan.confidence)}}};
        }
        if (seg.size() == 3 && action == "rules" && m == "GET") {
            const auto tree = fit_rule_tree(ds, inst, static_cast<int>(query_int(req, "max_depth", 3)));
            const auto names = s.cluster_names(oid.id);
            Json clusters = Json::array();
            for (const auto& cr : extract_rules(tree)) {
                Json paths = Json::array();
                for (const auto& p : cr.paths) paths.push_back(Json{{"text", p.text}, {"samples", p.samples}});
                clusters.push_back(Json{{"cluster", cr.cluster},
                                        {"name", names.at(static_cast<std::size_t>(cr.cluster))},
                                        {"paths", paths}});
            }
            return {200, Json{{"fidelity", tree.training_fidelity}, {"max_depth", tree.max_depth}, {"clusters", clusters}}};
        }
        if (seg.size() == 3 && action == "uncertain" && m == "GET") {
            const auto u = uncertain_points(instance_matrix(ds, inst), inst.labeling, inst.params.metric);
            std::vector<std::size_t> rows;
            for (auto pos : u.flagged.rows()) rows.push_back(inst.rows[pos]);
            return {200, Json{{"row_indices", rows}, {"rows", inst.rows}, {"confidence", u.confidence}}};
        }
        if (seg.size() == 3 && action == "suggest" && m == "GET") {
            const std::string kind = query(req, "kind").value_or("metric");
            if (kind == "metric" || kind == "linkage") {
                const auto sug = suggest_parameter(ds, inst, kind == "metric" ? SuggestKind::metric : SuggestKind::linkage,
                                                   view_runner(s, v));
                Json cands = Json::array();
                for (const auto& c : sug.candidates) {
                    cands.push_back(Json{{"value", c.value},
                                         {"score", number_to_json(c.score)},
                                         {"error", c.error ? Json(*c.error) : Json(nullptr)}});
                }
                return {200, Json{{"kind", kind}, {"best", sug.best}, {"candidates", cands}}};
            }
            if (kind == "projection") {
                const auto e = choose_embedding(ds, inst, static_cast<std::uint64_t>(query_int(req, "seed", 0)));
                return {200, Json{{"kind", kind}, {"best", to_string(e.params.method)}}};
            }
            if (kind == "measures") {
                const auto detected = detect_conditions(ds, inst);
                Conditions prefs;
                prefs.noise = query_bool(req, "noise");
                prefs.monotonicity = query_bool(req, "monotonicity");
                Json conds = Json::object();
                for (auto c : kAllConditions) conds[std::string(to_string(c))] = detected.get(c);
                Json measures = Json::array();
                for (auto id : suitable_measures(detected, prefs)) measures.push_back(to_string(id));
                return {200, Json{{"kind", kind}, {"conditions", conds}, {"measures", measures}}};
            }
            throw Error(ErrorCode::InvalidArgument, "unknown suggestion kind '" + kind + "'");
        }
        if (seg.size() == 3 && action == "isolate" && m == "POST") {
            const auto body = body_json(req);
            Json op{{"view", oid.id}, {"rows", body.at("row_indices")}};
            if (body.contains("params")) op["params"] = body["params"];
            const auto r = s.apply("isolate", op);
            return {201, instance_body(s, oid.session, s.view(r.at("view").get<std::uint64_t>()))};
        }
        if (seg.size() == 3 && action == "reassign" && m == "POST") {
            const auto body = body_json(req);
            const auto ranked = reassignment_search(ds, inst, body.at("desired_labels").get<std::vector<int>>());
            Json out = Json::array();
            for (const auto& c : ranked) {
                out.push_back(Json{{"params", params_to_json(c.params)},
                                   {"ami", number_to_json(c.ami)},
                                   {"error", c.error ? Json(*c.error) : Json(nullptr)}});
            }
            return {200, Json{{"candidates", out}}};
        }
        if (seg.size() == 5 && action == "clusters" && seg[4] == "name" && m == "POST") {
            const auto body = body_json(req);
            const int cid = static_cast<int>(parse_int(seg[3], "cluster"));
            s.apply("rename_cluster", Json{{"view", oid.id}, {"cluster", cid}, {"name", body.at("name")}});
            return {200, Json{{"cluster", cid}, {"name", s.cluster_name(oid.id, cid)}}};
        }
        throw not_found();
    }

    if (seg[0] == "tour") {
        if (seg.size() == 1 && m == "POST") {
            const auto body = body_json(req);
            const auto oid = parse_object_id(body.at("entry_instance_id").get<std::string>(), 'v');
            auto entry = find(oid.session);
            std::lock_guard lock(entry->mutex);
            Session& s = *entry->session;
            Json op{{"view", oid.id}, {"seed", body.value("seed", std::uint64_t{0})}};
            if (body.contains("constraints")) op["constraints"] = body["constraints"];
            if (body.contains("config")) op["config"] = body["config"];
            const auto r = s.apply("start_tour", op);
            return {201, tour_body(oid.session, s.tour(r.at("tour").get<std::uint64_t>()))};
        }
        if (seg.size() < 2) throw not_found();
        const auto oid = parse_object_id(seg[1], 't');
        auto entry = find(oid.session);
        std::lock_guard lock(entry->mutex);
        Session& s = *entry->session;
        if (seg.size() == 2 && m == "GET") return {200, tour_body(oid.session, s.tour(oid.id))};
        if (seg.size() != 3) throw not_found();
        if (seg[2] == "history" && m == "GET") return {200, tour_body(oid.session, s.tour(oid.id))};
        if (seg[2] == "step" && m == "POST") {
            const auto body = body_json(req);
            const auto r = s.apply("tour_step", Json{{"tour", oid.id}, {"feedback", body.at("feedback")}});
            const auto& st = s.tour(oid.id).state;
            return {200, Json{{"chosen", node_summary(st, r.at("chosen").get<std::size_t>())},
                              {"batch", r.at("batch")},
                              {"mode", to_string(st.mode)}}};
        }
        if (seg[2] == "accept" && m == "POST") {
            const auto r = s.apply("accept_tour", Json{{"tour", oid.id}});
            return {200, Json{{"instance_id", view_ref(oid.session, r.at("view").get<std::uint64_t>())},
                              {"params", r.at("params")}}};
        }
        throw not_found();
    }

    if (seg[0] == "sessions" && seg.size() >= 2) {
        if (seg.size() == 2 && m == "PUT") {
            auto loaded = std::make_unique<Session>(Session::load(req.body, cache_, clock_));
            const Json state = loaded->state_json();
            create(std::move(loaded), seg[1]);
            return {200, Json{{"session_id", seg[1]}, {"views", state.at("views").size()}}};
        }
        auto entry = find(seg[1]);
        std::lock_guard lock(entry->mutex);
        Session& s = *entry->session;
        if (seg.size() == 2 && m == "GET") return {200, Json::parse(s.save())};
        if (seg.size() == 3 && m == "GET" && seg[2] == "log") {
            Json entries = Json::array();
            for (const auto& e : s.log()) {
                entries.push_back(Json{{"timestamp", e.timestamp}, {"op", e.op}, {"params", e.params}});
            }
            return {200, Json{{"cursor", s.cursor()}, {"entries", entries}}};
        }
        if (seg.size() == 3 && m == "POST" && (seg[2] == "undo" || seg[2] == "redo")) {
            if (seg[2] == "undo") {
                s.undo();
            } else {
                s.redo();
            }
            return {200, Json{{"cursor", s.cursor()},
                              {"entries", s.log().size()},
                              {"can_undo", s.can_undo()},
                              {"can_redo", s.can_redo()}}};
        }
        throw not_found();
    }
    throw not_found();
}

struct HttpServer::Impl {
    httplib::Server server;
};

HttpServer::HttpServer(Api& api, const std::string& host, int port) : impl_(std::make_unique<Impl>()) {
    auto handler = [&api](const httplib::Request& req, httplib::Response& res) {
        ApiRequest r;
        r.method = req.method;
        r.path = req.path;
        for (const auto& [k, v] : req.params) r.query.emplace(k, v);
        r.body = req.body;
        const auto out = api.handle(r);
        res.status = out.status;
        res.set_content(out.body.dump(), "application/json");
    };
    impl_->server.Get(".*", handler);
    impl_->server.Post(".*", handler);
    impl_->server.Put(".*", handler);
    impl_->server.Delete(".*", handler);
    // httplib's default adds SO_REUSEPORT, which lets a second server share a busy port
    impl_->server.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
    });
    if (port == 0) {
        port_ = impl_->server.bind_to_any_port(host);
        if (port_ <= 0) throw Error(ErrorCode::PortInUse, "could not bind " + host);
    } else {
        if (!impl_->server.bind_to_port(host, port)) {
            throw Error(ErrorCode::PortInUse, "port " + std::to_string(port) + " is not available");
        }
        port_ = port;
    }
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::start() {
    thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    impl_->server.stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace ctour
