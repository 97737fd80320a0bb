#include "ctour/api.hpp"
#include "ctour/cache.hpp"
#include "ctour/error.hpp"
#include "ctour/insight.hpp"
#include "ctour/session.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <fstream>
#include <sstream>

#include "support/session_ops.hpp"
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

Session::Clock counting_clock() {
    auto t = std::make_shared<std::int64_t>(1000);
    return [t] { return (*t)++; };
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const Json kQuickTour = testing::quick_tour_config();

// Cache

TEST(Cache, HitReturnsIdenticalInstance) {
    const auto b = testing::three_blobs(90, 0.2, 5.0, 3);
    PrecomputeCache cache;
    const auto p = default_params(b.data, 3);
    const auto first = cache.clustering(b.data, p);
    const auto runs = clustering_executions();
    const auto second = cache.clustering(b.data, p);
    EXPECT_EQ(clustering_executions(), runs);
    EXPECT_EQ(cache.hits(), 1u);
    EXPECT_EQ(first.labeling, second.labeling);
    EXPECT_EQ(first.cache_key, second.cache_key);
    EXPECT_EQ(first.inertia, second.inertia);
    const auto fresh = run_clustering(b.data, p);
    EXPECT_EQ(fresh.labeling, second.labeling);
    EXPECT_TRUE(fresh.centroids == second.centroids);
}

TEST(Cache, EvictsLeastRecentlyUsed) {
    PrecomputeCache cache(2);
    ClusteringInstance a, b, c;
    a.inertia = 1;
    b.inertia = 2;
    c.inertia = 3;
    cache.insert(1, a);
    cache.insert(2, b);
    ASSERT_TRUE(cache.find_instance(1));  // 1 is now most recent
    cache.insert(3, c);
    EXPECT_EQ(cache.size(), 2u);
    EXPECT_TRUE(cache.find_instance(1));
    EXPECT_FALSE(cache.find_instance(2));
    EXPECT_TRUE(cache.find_instance(3));
}

TEST(Cache, DefaultBoundIs256) {
    PrecomputeCache cache;
    EXPECT_EQ(cache.capacity(), 256u);
    for (std::uint64_t k = 0; k < 300; ++k) cache.insert(k, ClusteringInstance{});
    EXPECT_EQ(cache.size(), 256u);
    EXPECT_FALSE(cache.find_instance(0));
    EXPECT_TRUE(cache.find_instance(299));
}

TEST(Cache, PrecomputeRangeThenSliderHits) {
    const auto b = testing::three_blobs(120, 0.2, 5.0, 5);
    PrecomputeCache cache;
    const auto base = default_params(b.data, 3);
    const auto r1 = precompute_k_range(cache, b.data, base, 2, 8);
    EXPECT_EQ(r1.k_values.size(), 7u);
    EXPECT_EQ(r1.computed, 7u);
    EXPECT_EQ(cache.size(), 7u);
    const auto r2 = precompute_k_range(cache, b.data, base, 2, 8);
    EXPECT_EQ(r2.computed, 0u);
    EXPECT_EQ(r2.cached, 7u);
    const auto runs = clustering_executions();
    for (int k = 2; k <= 8; ++k) {
        auto p = base;
        p.k = k;
        EXPECT_EQ(cache.clustering(b.data, p).params.k, k);
    }
    EXPECT_EQ(clustering_executions(), runs);
}

TEST(Cache, EmbeddingsAreCached) {
    const auto b = testing::three_blobs(60, 0.2, 5.0, 5);
    PrecomputeCache cache;
    const auto inst = cache.clustering(b.data, default_params(b.data, 3));
    ProjectionParams pp;
    pp.method = ProjectionMethod::cmds;
    const auto e1 = cache.embedding(b.data, inst, pp);
    const auto hits = cache.hits();
    const auto e2 = cache.embedding(b.data, inst, pp);
    EXPECT_EQ(cache.hits(), hits + 1);
    EXPECT_TRUE(e1.coords == e2.coords);
}

// Session

struct SessionFixture {
    testing::Blobs blobs = testing::three_blobs_5d(60, 0.5, 2);
    Session session{blobs.data, nullptr, counting_clock()};
};

TEST(SessionOps, SetKThenUndoRestoresK) {
    SessionFixture f;
    auto& s = f.session;
    const auto v = s.apply("add_view", Json{{"params", {{"k", 3}}}}).at("view").get<std::uint64_t>();
    s.apply("set_k", Json{{"view", v}, {"k", 5}});
    EXPECT_EQ(s.view(v).instance.params.k, 5);
    s.undo();
    EXPECT_EQ(s.view(v).instance.params.k, 3);
    s.redo();
    EXPECT_EQ(s.view(v).instance.params.k, 5);
}

TEST(SessionOps, NewOpDiscardsRedoTail) {
    SessionFixture f;
    auto& s = f.session;
    const auto v = s.apply("add_view", Json{{"params", {{"k", 3}}}}).at("view").get<std::uint64_t>();
    s.apply("set_k", Json{{"view", v}, {"k", 4}});  // B
    s.undo();
    s.apply("set_k", Json{{"view", v}, {"k", 2}});  // C
    EXPECT_FALSE(s.can_redo());
    EXPECT_EQ(code_of([&] { s.redo(); }), ErrorCode::NothingToRedo);
    EXPECT_EQ(s.log().size(), 2u);
    EXPECT_EQ(s.log().back().params.at("k"), 2);
}

TEST(SessionOps, UndoOnFreshSessionFails) {
    SessionFixture f;
    EXPECT_EQ(code_of([&] { f.session.undo(); }), ErrorCode::NothingToUndo);
}

TEST(SessionOps, FailedOpLeavesStateAndLogUntouched) {
    SessionFixture f;
    auto& s = f.session;
    const auto v = s.apply("add_view", Json{{"params", {{"k", 3}}}}).at("view").get<std::uint64_t>();
    const auto before = s.state_json().dump();
    EXPECT_EQ(code_of([&] { s.apply("set_k", Json{{"view", v}, {"k", 0}}); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { s.apply("rename_cluster", Json{{"view", v}, {"cluster", 9}, {"name", "x"}}); }),
              ErrorCode::UnknownCluster);
    EXPECT_EQ(code_of([&] { s.apply("frobnicate", Json::object()); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(s.state_json().dump(), before);
    EXPECT_EQ(s.log().size(), 1u);
}

TEST(SessionOps, ClusterNamesDefaultToRepresentativeRow) {
    SessionFixture f;
    auto& s = f.session;
    const auto v = s.apply("add_view", Json{{"params", {{"k", 3}}}}).at("view").get<std::uint64_t>();
    const auto defaults = default_cluster_names(s.dataset(), s.view(v).instance);
    EXPECT_EQ(s.cluster_name(v, 0), defaults[0]);
    s.apply("rename_cluster", Json{{"view", v}, {"cluster", 0}, {"name", "core"}});
    EXPECT_EQ(s.cluster_name(v, 0), "core");
    s.undo();
    EXPECT_EQ(s.cluster_name(v, 0), defaults[0]);
}

TEST(SessionOps, IsolatedViewReclustersItsOwnRows) {
    SessionFixture f;
    auto& s = f.session;
    const auto v = s.apply("add_view", Json{{"params", {{"k", 3}}}}).at("view").get<std::uint64_t>();
    std::vector<std::size_t> rows;
    const auto inst = s.view(v).instance;
    for (std::size_t i = 0; i < inst.rows.size(); ++i) {
        if (inst.labeling.labels[i] == 0) rows.push_back(inst.rows[i]);
    }
    const auto iso = s.apply("isolate", Json{{"view", v}, {"rows", rows}, {"params", {{"k", 2}}}}).at("view").get<std::uint64_t>();
    EXPECT_EQ(s.view(iso).instance.rows, rows);
    EXPECT_EQ(s.view(v).instance.labeling, inst.labeling);
    s.apply("set_k", Json{{"view", iso}, {"k", 3}});
    EXPECT_EQ(s.view(iso).instance.rows, rows);
    EXPECT_EQ(*s.active(), iso);
}

TEST(SessionOps, TourOpsAreLoggedAndUndoable) {
    SessionFixture f;
    auto& s = f.session;
    const auto v = s.apply("add_view", Json{{"params", {{"k", 3}}}}).at("view").get<std::uint64_t>();
    const auto t = s.apply("start_tour", Json{{"view", v}, {"seed", 5}, {"config", kQuickTour}}).at("tour").get<std::uint64_t>();
    const auto before_step = s.state_json().dump();
    s.apply("tour_step", Json{{"tour", t}, {"feedback", "generate"}});
    EXPECT_GT(s.tour(t).state.nodes.size(), 1u);
    s.apply("accept_tour", Json{{"tour", t}});
    EXPECT_EQ(s.view(v).instance.params, accept(s.tour(t).state));
    s.undo();
    s.undo();
    EXPECT_EQ(s.state_json().dump(), before_step);
}

TEST(SessionProperty, HundredRandomOpsThenHundredUndos) {
    const auto blobs = testing::three_blobs_5d(45, 0.5, 4);
    Session s(blobs.data, nullptr, counting_clock());
    const std::string initial = s.state_json().dump();
    Rng rng(2024);
    const auto applied = testing::apply_random_ops(s, rng, 100);
    ASSERT_EQ(applied, 100u);
    EXPECT_EQ(s.cursor(), 100u);

    const std::string saved = s.save();
    const Session loaded = Session::load(saved);
    EXPECT_EQ(loaded.save(), saved);
    EXPECT_EQ(s.replay().state_json().dump(), s.state_json().dump());

    for (int i = 0; i < 100; ++i) s.undo();
    EXPECT_EQ(s.state_json().dump(), initial);
    EXPECT_FALSE(s.can_undo());
}

TEST(SessionFile, FreshRoundTrip) {
    SessionFixture f;
    const auto bytes = f.session.save();
    const auto loaded = Session::load(bytes);
    EXPECT_EQ(loaded.save(), bytes);
    EXPECT_EQ(loaded.dataset().fingerprint(), f.session.dataset().fingerprint());
}

TEST(SessionFile, TwoViewsAndTourRoundTrip) {
    SessionFixture f;
    auto& s = f.session;
    const auto v = s.apply("add_view", Json{{"params", {{"k", 3}}}}).at("view").get<std::uint64_t>();
    s.apply("add_view", Json{{"params", {{"k", 4}, {"algorithm", "agglomerative"}}}});
    const auto t = s.apply("start_tour", Json{{"view", v}, {"seed", 3}, {"config", {{"batch", 3}}}}).at("tour").get<std::uint64_t>();
    s.apply("tour_step", Json{{"tour", t}, {"feedback", "generate"}});
    s.apply("rename_cluster", Json{{"view", v}, {"cluster", 1}, {"name", "north"}});
    const auto bytes = s.save();
    const auto loaded = Session::load(bytes);
    EXPECT_EQ(loaded.save(), bytes);
    EXPECT_EQ(loaded.views().size(), 2u);
    EXPECT_EQ(loaded.cluster_name(v, 1), "north");
    ASSERT_TRUE(loaded.tour(t).state.nodes[loaded.tour(t).state.current].embedding);
}

TEST(SessionFile, LoadedSessionKeepsUndoing) {
    SessionFixture f;
    auto& s = f.session;
    const auto v = s.apply("add_view", Json{{"params", {{"k", 3}}}}).at("view").get<std::uint64_t>();
    s.apply("set_k", Json{{"view", v}, {"k", 4}});
    auto loaded = Session::load(s.save());
    loaded.undo();
    EXPECT_EQ(loaded.view(v).instance.params.k, 3);
    loaded.redo();
    EXPECT_EQ(loaded.view(v).instance.params.k, 4);
}

TEST(SessionFile, WrongSchemaVersion) {
    SessionFixture f;
    auto doc = Json::parse(f.session.save());
    doc["schema_version"] = 999;
    EXPECT_EQ(code_of([&] { Session::load(doc.dump()); }), ErrorCode::SchemaMismatch);
    doc.erase("schema_version");
    EXPECT_EQ(code_of([&] { Session::load(doc.dump()); }), ErrorCode::SchemaMismatch);
}

TEST(SessionFile, CorruptPayloads) {
    SessionFixture f;
    EXPECT_EQ(code_of([&] { Session::load("{not json"); }), ErrorCode::CorruptPayload);
    auto doc = Json::parse(f.session.save());
    doc["dataset"]["values"]["data"][0][0] = 12345.0;
    EXPECT_EQ(code_of([&] { Session::load(doc.dump()); }), ErrorCode::CorruptPayload);
    doc = Json::parse(f.session.save());
    doc.erase("log");
    EXPECT_EQ(code_of([&] { Session::load(doc.dump()); }), ErrorCode::CorruptPayload);
}

// API

ApiResponse call(Api& api, const std::string& method, const std::string& path, const Json& body = nullptr,
                 std::map<std::string, std::string> query = {}) {
    ApiRequest r;
    r.method = method;
    r.path = std::string(kApiPrefix) + path;
    r.query = std::move(query);
    if (!body.is_null()) r.body = body.dump();
    return api.handle(r);
}

ApiResponse upload(Api& api, const std::string& csv) {
    ApiRequest r;
    r.method = "POST";
    r.path = std::string(kApiPrefix) + "/datasets";
    r.body = csv;
    return api.handle(r);
}

const std::string& oecd_csv() {
    static const std::string csv = read_file(std::string(CTOUR_TEST_DATA_DIR) + "/oecd_like.csv");
    return csv;
}

TEST(ApiRoutes, Health) {
    Api api;
    const auto r = call(api, "GET", "/health");
    EXPECT_EQ(r.status, 200);
    EXPECT_EQ(r.body.at("status"), "ok");
}

TEST(ApiRoutes, UploadOecdStyleCsv) {
    Api api;
    const auto r = upload(api, oecd_csv());
    ASSERT_EQ(r.status, 201) << r.body.dump();
    EXPECT_EQ(r.body.at("rows"), 34);
    EXPECT_EQ(r.body.at("dataset_id"), "d1");
    EXPECT_TRUE(r.body.at("sampling_suggestion").is_null());
}

TEST(ApiRoutes, UnknownRoutesAndIds) {
    Api api;
    EXPECT_EQ(call(api, "GET", "/nope").status, 404);
    EXPECT_EQ(call(api, "GET", "/instances/d9-v1").status, 404);
    EXPECT_EQ(call(api, "GET", "/instances/garbage").status, 404);
    ApiRequest r{"GET", "/elsewhere", {}, {}};
    EXPECT_EQ(api.handle(r).status, 404);
}

TEST(ApiRoutes, DatasetEndpoints) {
    Api api;
    upload(api, oecd_csv());
    const auto stats = call(api, "GET", "/datasets/d1/stats", nullptr, {{"selection", "0,1,2"}});
    ASSERT_EQ(stats.status, 200) << stats.body.dump();
    EXPECT_EQ(stats.body.at("stats")[0].at("count"), 3);
    const auto corr = call(api, "GET", "/datasets/d1/correlations", nullptr, {{"k", "2"}});
    EXPECT_EQ(corr.body.at("pairs").size(), 2u);
    const auto bad = call(api, "POST", "/datasets/d1/filter", Json{{"expression", "nosuch > 1"}});
    EXPECT_EQ(bad.status, 400);
    EXPECT_EQ(bad.body.at("error").at("code"), "UnknownFeature");
    const auto parse = call(api, "POST", "/datasets/d1/filter", Json{{"expression", "(a > "}});
    EXPECT_EQ(parse.status, 400);
    EXPECT_EQ(parse.body.at("error").at("code"), "ParseError");
    EXPECT_TRUE(parse.body.at("error").contains("position"));
}

TEST(ApiRoutes, InstanceAnalysisEndpoints) {
    Api api;
    upload(api, oecd_csv());
    const auto created = call(api, "POST", "/instances", Json{{"dataset_id", "d1"}, {"params", {{"k", 3}}}});
    ASSERT_EQ(created.status, 201) << created.body.dump();
    const std::string id = created.body.at("id");
    EXPECT_EQ(id, "d1-v1");
    EXPECT_EQ(created.body.at("labels").size(), 34u);
    EXPECT_FALSE(created.body.at("score").is_null());

    EXPECT_EQ(call(api, "GET", "/instances/" + id + "/aggregate", nullptr, {{"top_m", "4"}}).status, 200);
    const auto emb = call(api, "GET", "/instances/" + id + "/embedding", nullptr, {{"method", "pca"}});
    ASSERT_EQ(emb.status, 200) << emb.body.dump();
    EXPECT_EQ(emb.body.at("coords").size(), 34u);
    const auto scan = call(api, "GET", "/instances/" + id + "/kscan", nullptr,
                           {{"from", "2"}, {"to", "6"}, {"measures", "silhouette,davies_bouldin"}});
    ASSERT_EQ(scan.status, 200) << scan.body.dump();
    EXPECT_EQ(scan.body.at("k_values").size(), 5u);
    EXPECT_EQ(call(api, "GET", "/instances/" + id + "/rules", nullptr, {{"max_depth", "2"}}).status, 200);
    EXPECT_EQ(call(api, "GET", "/instances/" + id + "/uncertain").status, 200);
    for (const char* kind : {"metric", "projection", "measures"}) {
        const auto sug = call(api, "GET", "/instances/" + id + "/suggest", nullptr, {{"kind", kind}});
        EXPECT_EQ(sug.status, 200) << kind << " " << sug.body.dump();
    }
    const auto linkage = call(api, "GET", "/instances/" + id + "/suggest", nullptr, {{"kind", "linkage"}});
    EXPECT_EQ(linkage.status, 400);
    EXPECT_EQ(linkage.body.at("error").at("code"), "NotApplicable");
    std::vector<int> desired(34, 0);
    for (std::size_t i = 17; i < 34; ++i) desired[i] = 1;
    const auto re = call(api, "POST", "/instances/" + id + "/reassign", Json{{"desired_labels", desired}});
    ASSERT_EQ(re.status, 200) << re.body.dump();
    EXPECT_FALSE(re.body.at("candidates").empty());
    const auto name = call(api, "POST", "/instances/" + id + "/clusters/0/name", Json{{"name", "Nordics"}});
    EXPECT_EQ(name.body.at("name"), "Nordics");
    const auto iso = call(api, "POST", "/instances/" + id + "/isolate", Json{{"row_indices", {0, 1, 2, 3, 4, 5}}, {"params", {{"k", 2}}}});
    ASSERT_EQ(iso.status, 201) << iso.body.dump();
    EXPECT_EQ(iso.body.at("id"), "d1-v2");
    EXPECT_EQ(iso.body.at("rows").size(), 6u);
}

TEST(ApiRoutes, PrecomputeThenSliderIsServedFromCache) {
    Api api;
    upload(api, oecd_csv());
    const auto created = call(api, "POST", "/instances", Json{{"dataset_id", "d1"}, {"params", {{"k", 3}}}});
    const std::string id = created.body.at("id");
    const auto pre = call(api, "POST", "/datasets/d1/precompute", Json{{"params", {{"k", 3}}}, {"from", 2}, {"to", 8}});
    ASSERT_EQ(pre.status, 200) << pre.body.dump();
    EXPECT_EQ(pre.body.at("k_values").size(), 7u);
    const auto again = call(api, "POST", "/datasets/d1/precompute", Json{{"params", {{"k", 3}}}, {"from", 2}, {"to", 8}});
    EXPECT_EQ(again.body.at("computed"), 0);
    const auto runs = clustering_executions();
    for (int k = 2; k <= 8; ++k) {
        const auto r = call(api, "PUT", "/instances/" + id + "/params", Json{{"k", k}});
        ASSERT_EQ(r.status, 200) << r.body.dump();
        EXPECT_EQ(r.body.at("params").at("k"), k);
    }
    EXPECT_EQ(clustering_executions(), runs);
}

TEST(ApiRoutes, UndoRedoAndSessionDocument) {
    Api api;
    upload(api, oecd_csv());
    call(api, "POST", "/instances", Json{{"dataset_id", "d1"}, {"params", {{"k", 3}}}});
    call(api, "PUT", "/instances/d1-v1/params", Json{{"k", 5}});
    EXPECT_EQ(call(api, "POST", "/sessions/d1/undo").status, 200);
    EXPECT_EQ(call(api, "GET", "/instances/d1-v1").body.at("params").at("k"), 3);
    EXPECT_EQ(call(api, "POST", "/sessions/d1/redo").status, 200);
    EXPECT_EQ(call(api, "POST", "/sessions/d1/redo").status, 409);
    const auto log = call(api, "GET", "/sessions/d1/log");
    EXPECT_EQ(log.body.at("entries").size(), 2u);

    const auto doc = call(api, "GET", "/sessions/d1");
    ASSERT_EQ(doc.status, 200);
    ApiRequest put{"PUT", std::string(kApiPrefix) + "/sessions/copy", {}, doc.body.dump()};
    ASSERT_EQ(api.handle(put).status, 200);
    EXPECT_EQ(call(api, "GET", "/sessions/copy").body, doc.body);
    EXPECT_EQ(call(api, "GET", "/instances/copy-v1").body.at("params").at("k"), 5);

    auto bad = doc.body;
    bad["schema_version"] = 999;
    ApiRequest put_bad{"PUT", std::string(kApiPrefix) + "/sessions/bad", {}, bad.dump()};
    const auto r = api.handle(put_bad);
    EXPECT_EQ(r.status, 400);
    EXPECT_EQ(r.body.at("error").at("code"), "SchemaMismatch");
}

TEST(ApiRoutes, TourStepsReplayIdentically) {
    auto run = [] {
        Api api(kCacheCapacity, counting_clock());
        upload(api, oecd_csv());
        call(api, "POST", "/instances", Json{{"dataset_id", "d1"}, {"params", {{"k", 3}}}});
        const auto tour = call(api, "POST", "/tour",
                               Json{{"entry_instance_id", "d1-v1"}, {"seed", 17}, {"config", kQuickTour},
                                    {"constraints", {{"k", {{"mode", "fixed"}, {"value", 4}}}}}});
        EXPECT_EQ(tour.status, 201) << tour.body.dump();
        const std::string id = tour.body.at("id");
        std::vector<Json> chosen;
        for (const char* fb : {"generate", "like", "generate", "like"}) {
            const auto r = call(api, "POST", "/tour/" + id + "/step", Json{{"feedback", fb}});
            EXPECT_EQ(r.status, 200) << r.body.dump();
            chosen.push_back(r.body.at("chosen").at("params"));
        }
        const auto hist = call(api, "GET", "/tour/" + id + "/history");
        for (const auto& n : hist.body.at("nodes")) {
            if (!n.at("parent").is_null()) EXPECT_EQ(n.at("params").at("k"), 4);
        }
        const auto acc = call(api, "POST", "/tour/" + id + "/accept");
        EXPECT_EQ(acc.status, 200);
        EXPECT_EQ(acc.body.at("params"), chosen.back());
        return chosen;
    };
    EXPECT_EQ(run(), run());
}

TEST(ApiRoutes, LargeUploadSuggestsSampling) {
    std::ostringstream csv;
    csv << "id,a,b\n";
    Rng rng(1);
    for (int i = 0; i < 20000; ++i) csv << "r" << i << "," << rng.normal() << "," << rng.normal() << "\n";
    Api api;
    const auto r = upload(api, csv.str());
    ASSERT_EQ(r.status, 201);
    EXPECT_DOUBLE_EQ(r.body.at("sampling_suggestion").get<double>(), 0.1);
}

// HTTP over a real socket

TEST(HttpServerTest, ServesApiOverSocket) {
    Api api;
    HttpServer server(api, "127.0.0.1", 0);
    ASSERT_GT(server.port(), 0);
    server.start();
    httplib::Client client("127.0.0.1", server.port());
    const auto health = client.Get("/api/v1/health");
    ASSERT_TRUE(health);
    EXPECT_EQ(health->status, 200);
    EXPECT_EQ(Json::parse(health->body).at("status"), "ok");

    const auto up = client.Post("/api/v1/datasets", oecd_csv(), "text/csv");
    ASSERT_TRUE(up);
    EXPECT_EQ(up->status, 201);
    EXPECT_EQ(Json::parse(up->body).at("rows"), 34);

    const auto inst = client.Post("/api/v1/instances", Json{{"dataset_id", "d1"}, {"params", {{"k", 2}}}}.dump(),
                                  "application/json");
    ASSERT_TRUE(inst);
    EXPECT_EQ(inst->status, 201);
    const auto agg = client.Get("/api/v1/instances/d1-v1/aggregate?top_m=3");
    ASSERT_TRUE(agg);
    EXPECT_EQ(agg->status, 200);
    EXPECT_EQ(Json::parse(agg->body).at("features").size(), 3u);
    server.stop();
}

TEST(HttpServerTest, BusyPortIsReported) {
    Api api;
    HttpServer first(api, "127.0.0.1", 0);
    EXPECT_EQ(code_of([&] { HttpServer second(api, "127.0.0.1", first.port()); }), ErrorCode::PortInUse);
}

}  // namespace
}  // namespace ctour
