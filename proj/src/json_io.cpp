#include "ctour/json_io.hpp"

#include "ctour/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ctour {

namespace {

template <typename T>
Json opt_to_json(const std::optional<T>& v) {
    return v ? Json(*v) : Json(nullptr);
}

template <typename T>
std::optional<T> opt_from_json(const Json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<T>();
}

std::size_t feature_from_request(const Json& j, const Dataset& ds) {
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        const auto f = ds.find_feature(name);
        if (!f) throw Error(ErrorCode::UnknownFeature, "unknown feature '" + name + "'");
        return *f;
    }
    const auto f = j.get<std::size_t>();
    if (f >= ds.features()) throw Error(ErrorCode::UnknownFeature, "feature index " + std::to_string(f) + " out of range");
    return f;
}

std::vector<std::size_t> features_from_request(const Json& j, const Dataset& ds) {
    std::vector<std::size_t> out;
    for (const auto& f : j) out.push_back(feature_from_request(f, ds));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

Json param_value_to_json(TourParam p, const ClusteringParams& v) {
    switch (p) {
        case TourParam::feature_subset: return v.feature_subset;
        case TourParam::k: return v.k;
        case TourParam::algorithm: return to_string(v.algorithm);
        case TourParam::metric: return to_string(v.metric);
        case TourParam::linkage: return to_string(v.linkage);
        case TourParam::standardize: return v.standardize;
    }
    return nullptr;
}

void param_value_from_json(TourParam p, const Json& j, ClusteringParams& v, const Dataset* ds) {
    switch (p) {
        case TourParam::feature_subset:
            if (ds) {
                v.feature_subset = features_from_request(j, *ds);
            } else {
                v.feature_subset = j.get<std::vector<std::size_t>>();
            }
            break;
        case TourParam::k: v.k = j.get<int>(); break;
        case TourParam::algorithm: v.algorithm = parse_algorithm(j.get<std::string>()); break;
        case TourParam::metric: v.metric = parse_metric(j.get<std::string>()); break;
        case TourParam::linkage: v.linkage = parse_linkage(j.get<std::string>()); break;
        case TourParam::standardize: v.standardize = j.get<bool>(); break;
    }
}

Json node_to_json(const TourNode& n) {
    return Json{{"instance", instance_to_json(n.instance)},
                {"embedding", n.embedding ? embedding_to_json(*n.embedding) : Json(nullptr)},
                {"parent", opt_to_json(n.parent)},
                {"feedback", to_string(n.feedback)}};
}

Feedback parse_feedback(const std::string& s) {
    for (auto f : {Feedback::none, Feedback::liked, Feedback::disliked}) {
        if (to_string(f) == s) return f;
    }
    throw Error(ErrorCode::CorruptPayload, "unknown feedback '" + s + "'");
}

}  // namespace

Json number_to_json(double v) {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

double number_from_json(const Json& j) {
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        throw Error(ErrorCode::CorruptPayload, "not a number: '" + s + "'");
    }
    return j.get<double>();
}

Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(number_to_json(m(i, c)));
        rows.push_back(std::move(row));
    }
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

Matrix matrix_from_json(const Json& j) {
    const auto r = j.at("rows").get<Eigen::Index>();
    const auto c = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != r) throw Error(ErrorCode::CorruptPayload, "matrix row count mismatch");
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        const auto& row = data[static_cast<std::size_t>(i)];
        if (static_cast<Eigen::Index>(row.size()) != c) throw Error(ErrorCode::CorruptPayload, "matrix column count mismatch");
        for (Eigen::Index k = 0; k < c; ++k) m(i, k) = number_from_json(row[static_cast<std::size_t>(k)]);
    }
    return m;
}

Json params_to_json(const ClusteringParams& p) {
    return Json{{"algorithm", to_string(p.algorithm)},
                {"metric", to_string(p.metric)},
                {"linkage", to_string(p.linkage)},
                {"k", p.k},
                {"eps", p.eps},
                {"min_pts", p.min_pts},
                {"features", p.feature_subset},
                {"sample_rate", p.sample_rate},
                {"seed", p.seed},
                {"standardize", p.standardize}};
}

ClusteringParams params_from_json(const Json& j) {
    ClusteringParams p;
    p.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
    p.metric = parse_metric(j.at("metric").get<std::string>());
    p.linkage = parse_linkage(j.at("linkage").get<std::string>());
    p.k = j.at("k").get<int>();
    p.eps = j.at("eps").get<double>();
    p.min_pts = j.at("min_pts").get<int>();
    p.feature_subset = j.at("features").get<std::vector<std::size_t>>();
    p.sample_rate = j.at("sample_rate").get<double>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.standardize = j.at("standardize").get<bool>();
    return p;
}

ClusteringParams params_from_request(const Json& j, const Dataset& ds) {
    if (!j.is_object()) throw Error(ErrorCode::MalformedInput, "params must be an object");
    ClusteringParams p = default_params(ds, j.contains("k") ? j["k"].get<int>() : 3);
    if (j.contains("k")) p.k = j["k"].get<int>();
    if (j.contains("algorithm")) p.algorithm = parse_algorithm(j["algorithm"].get<std::string>());
    if (j.contains("metric")) p.metric = parse_metric(j["metric"].get<std::string>());
    if (j.contains("linkage")) p.linkage = parse_linkage(j["linkage"].get<std::string>());
    if (j.contains("eps")) p.eps = j["eps"].get<double>();
    if (j.contains("min_pts")) p.min_pts = j["min_pts"].get<int>();
    if (j.contains("features")) p.feature_subset = features_from_request(j["features"], ds);
    if (j.contains("sample_rate")) p.sample_rate = j["sample_rate"].get<double>();
    if (j.contains("seed")) p.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("standardize")) p.standardize = j["standardize"].get<bool>();
    validate_params(p, ds.features());
    return p;
}

Json instance_to_json(const ClusteringInstance& inst) {
    return Json{{"params", params_to_json(inst.params)},
                {"rows", inst.rows},
                {"labels", inst.labeling.labels},
                {"k_effective", inst.labeling.k_effective},
                {"centroids", matrix_to_json(inst.centroids)},
                {"inertia", number_to_json(inst.inertia)},
                {"score", number_to_json(inst.score)},
                {"dataset_id", inst.dataset_id},
                {"cache_key", inst.cache_key}};
}

ClusteringInstance instance_from_json(const Json& j) {
    ClusteringInstance inst;
    inst.params = params_from_json(j.at("params"));
    inst.rows = j.at("rows").get<std::vector<std::size_t>>();
    inst.labeling.labels = j.at("labels").get<std::vector<int>>();
    inst.labeling.k_effective = j.at("k_effective").get<int>();
    if (inst.labeling.labels.size() != inst.rows.size()) {
        throw Error(ErrorCode::CorruptPayload, "label count does not match row count");
    }
    inst.centroids = matrix_from_json(j.at("centroids"));
    inst.inertia = number_from_json(j.at("inertia"));
    inst.score = number_from_json(j.at("score"));
    inst.dataset_id = j.at("dataset_id").get<std::uint64_t>();
    inst.cache_key = j.at("cache_key").get<std::uint64_t>();
    return inst;
}

Json embedding_to_json(const Embedding& e) {
    Json kl = Json::array();
    for (double v : e.kl_history) kl.push_back(number_to_json(v));
    return Json{{"method", to_string(e.params.method)},
                {"metric", to_string(e.params.metric)},
                {"perplexity", e.params.perplexity},
                {"iterations", e.params.iterations},
                {"seed", e.params.seed},
                {"coords", matrix_to_json(e.coords)},
                {"explained_variance", {number_to_json(e.explained_variance.first),
                                        number_to_json(e.explained_variance.second)}},
                {"kl_history", std::move(kl)}};
}

Embedding embedding_from_json(const Json& j) {
    Embedding e;
    e.params.method = parse_projection(j.at("method").get<std::string>());
    e.params.metric = parse_metric(j.at("metric").get<std::string>());
    e.params.perplexity = j.at("perplexity").get<double>();
    e.params.iterations = j.at("iterations").get<int>();
    e.params.seed = j.at("seed").get<std::uint64_t>();
    e.coords = matrix_from_json(j.at("coords"));
    const auto& ev = j.at("explained_variance");
    e.explained_variance = {number_from_json(ev.at(0)), number_from_json(ev.at(1))};
    for (const auto& v : j.at("kl_history")) e.kl_history.push_back(number_from_json(v));
    return e;
}

Json constraints_to_json(const TourConstraints& c) {
    Json out = Json::object();
    for (auto p : kAllTourParams) {
        Json entry{{"mode", to_string(c.mode(p))}};
        if (c.mode(p) == ConstraintMode::fixed) entry["value"] = param_value_to_json(p, c.values);
        out[std::string(to_string(p))] = std::move(entry);
    }
    return out;
}

TourConstraints constraints_from_json(const Json& j, const ClusteringParams& base, const Dataset* ds) {
    TourConstraints c;
    c.values = base;
    if (j.is_null()) return c;
    if (!j.is_object()) throw Error(ErrorCode::MalformedInput, "constraints must be an object");
    for (const auto& [key, value] : j.items()) {
        const TourParam p = parse_tour_param(key);
        if (value.is_string()) {
            c.set(p, parse_constraint_mode(value.get<std::string>()));
            continue;
        }
        c.set(p, parse_constraint_mode(value.at("mode").get<std::string>()));
        if (value.contains("value")) param_value_from_json(p, value["value"], c.values, ds);
    }
    return c;
}

Json tour_to_json(const TourState& s) {
    Json nodes = Json::array();
    for (const auto& n : s.nodes) nodes.push_back(node_to_json(n));
    Json edges = Json::array();
    for (const auto& e : s.edges) {
        edges.push_back(Json{{"a", e.a},
                             {"b", e.b},
                             {"delta_p", number_to_json(e.delta_p)},
                             {"delta_l", number_to_json(e.delta_l)},
                             {"delta_s", e.delta_s ? number_to_json(*e.delta_s) : Json(nullptr)}});
    }
    Json weights = Json::object();
    for (auto p : kAllTourParams) weights[std::string(to_string(p))] = s.weights[p];
    Json frozen = Json::array();
    for (auto p : s.frozen) frozen.push_back(to_string(p));
    Json history = Json::array();
    for (const auto& h : s.history) {
        history.push_back(Json{{"kind", to_string(h.kind)},
                               {"mode", to_string(h.mode)},
                               {"batch", h.batch},
                               {"current", h.current}});
    }
    const auto& cfg = s.config;
    return Json{{"nodes", std::move(nodes)},
                {"edges", std::move(edges)},
                {"weights", std::move(weights)},
                {"weights_node", opt_to_json(s.weights_node)},
                {"constraints", constraints_to_json(s.constraints)},
                {"config", {{"batch", cfg.batch},
                            {"probes", cfg.probes},
                            {"redraws", cfg.redraws},
                            {"tabu_radius", cfg.tabu_radius},
                            {"bad_target", cfg.bad_target},
                            {"k_max", cfg.k_max},
                            {"compute_embeddings", cfg.compute_embeddings},
                            {"tsne_max_rows", cfg.tsne_max_rows}}},
                {"current", s.current},
                {"mode", to_string(s.mode)},
                {"seed", s.seed},
                {"step_index", s.step_index},
                {"feature_cycle", s.feature_cycle},
                {"tabu", s.tabu},
                {"liked", opt_to_json(s.liked)},
                {"last_disliked", opt_to_json(s.last_disliked)},
                {"frozen", std::move(frozen)},
                {"history", std::move(history)}};
}

TourState tour_from_json(const Json& j) {
    TourState s;
    for (const auto& n : j.at("nodes")) {
        TourNode node;
        node.instance = instance_from_json(n.at("instance"));
        if (!n.at("embedding").is_null()) node.embedding = embedding_from_json(n.at("embedding"));
        node.parent = opt_from_json<std::size_t>(n.at("parent"));
        node.feedback = parse_feedback(n.at("feedback").get<std::string>());
        s.nodes.push_back(std::move(node));
    }
    for (const auto& e : j.at("edges")) {
        TourEdge edge;
        edge.a = e.at("a").get<std::size_t>();
        edge.b = e.at("b").get<std::size_t>();
        edge.delta_p = number_from_json(e.at("delta_p"));
        edge.delta_l = number_from_json(e.at("delta_l"));
        if (!e.at("delta_s").is_null()) edge.delta_s = number_from_json(e.at("delta_s"));
        s.edges.push_back(edge);
    }
    for (auto p : kAllTourParams) s.weights.w[static_cast<std::size_t>(p)] = j.at("weights").at(std::string(to_string(p))).get<double>();
    s.weights_node = opt_from_json<std::size_t>(j.at("weights_node"));
    const auto& c = j.at("constraints");
    for (auto p : kAllTourParams) {
        const auto& entry = c.at(std::string(to_string(p)));
        s.constraints.set(p, parse_constraint_mode(entry.at("mode").get<std::string>()));
        if (entry.contains("value")) param_value_from_json(p, entry["value"], s.constraints.values, nullptr);
    }
    const auto& cfg = j.at("config");
    s.config.batch = cfg.at("batch").get<std::size_t>();
    s.config.probes = cfg.at("probes").get<int>();
    s.config.redraws = cfg.at("redraws").get<int>();
    s.config.tabu_radius = cfg.at("tabu_radius").get<double>();
    s.config.bad_target = cfg.at("bad_target").get<double>();
    s.config.k_max = cfg.at("k_max").get<int>();
    s.config.compute_embeddings = cfg.at("compute_embeddings").get<bool>();
    s.config.tsne_max_rows = cfg.at("tsne_max_rows").get<std::size_t>();
    s.current = j.at("current").get<std::size_t>();
    s.mode = j.at("mode").get<std::string>() == "refine" ? TourMode::refine : TourMode::explore;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.step_index = j.at("step_index").get<std::uint64_t>();
    s.feature_cycle = j.at("feature_cycle").get<std::uint64_t>();
    s.tabu = j.at("tabu").get<std::vector<std::size_t>>();
    s.liked = opt_from_json<std::size_t>(j.at("liked"));
    s.last_disliked = opt_from_json<std::size_t>(j.at("last_disliked"));
    for (const auto& p : j.at("frozen")) s.frozen.push_back(parse_tour_param(p.get<std::string>()));
    for (const auto& h : j.at("history")) {
        TourStepRecord r;
        r.kind = parse_step_kind(h.at("kind").get<std::string>());
        r.mode = h.at("mode").get<std::string>() == "refine" ? TourMode::refine : TourMode::explore;
        r.batch = h.at("batch").get<std::vector<std::size_t>>();
        r.current = h.at("current").get<std::size_t>();
        s.history.push_back(std::move(r));
    }
    if (s.nodes.empty() || s.current >= s.nodes.size()) throw Error(ErrorCode::CorruptPayload, "tour has no valid current node");
    for (const auto& n : s.nodes) {
        if (n.parent && *n.parent >= s.nodes.size()) throw Error(ErrorCode::CorruptPayload, "tour parent out of range");
    }
    return s;
}

Json dataset_to_json(const Dataset& ds) {
    return Json{{"fingerprint", ds.fingerprint()},
                {"feature_names", ds.feature_names()},
                {"row_ids", ds.row_ids()},
                {"values", matrix_to_json(ds.values())},
                {"enabled", ds.enabled_features()},
                {"dropped_rows", ds.dropped_rows()},
                {"dropped_columns", ds.dropped_columns()}};
}

Dataset dataset_from_json(const Json& j) {
    Dataset ds(j.at("feature_names").get<std::vector<std::string>>(), j.at("row_ids").get<std::vector<std::string>>(),
               matrix_from_json(j.at("values")), j.at("dropped_rows").get<std::size_t>(),
               j.at("dropped_columns").get<std::vector<std::string>>());
    ds.set_enabled_features(j.at("enabled").get<std::vector<std::size_t>>());
    if (ds.fingerprint() != j.at("fingerprint").get<std::uint64_t>()) {
        throw Error(ErrorCode::CorruptPayload, "dataset fingerprint does not match its content");
    }
    return ds;
}

}  // namespace ctour
