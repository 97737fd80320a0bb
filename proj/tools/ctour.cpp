// ctour command line: one-shot clustering, headless tours, the HTTP server
// and session replay. Exit codes: 0 ok, 2 bad input, 3 computation failure.

#include "ctour/api.hpp"
#include "ctour/error.hpp"
#include "ctour/json_io.hpp"
#include "ctour/session.hpp"
#include "ctour/tour.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace ctour;

constexpr int kExitInput = 2;
constexpr int kExitCompute = 3;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::NotFound, "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
    out << text;
}

// "a,b,3" -> ["a", "b", 3]; numeric tokens are feature indices.
Json feature_list(const std::string& spec) {
    Json out = Json::array();
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        std::size_t idx = 0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), idx);
        if (ec == std::errc() && ptr == tok.data() + tok.size()) {
            out.push_back(idx);
        } else {
            out.push_back(tok);
        }
    }
    return out;
}

struct ClusterOptions {
    std::string data;
    std::string algo = "kmeans";
    int k = 3;
    std::string metric = "euclidean";
    std::string linkage;
    std::string features;
    std::uint64_t seed = 0;
    double eps = 0.5;
    int min_pts = 5;
    bool raw = false;
};

void add_cluster_options(CLI::App* app, ClusterOptions& o) {
    app->add_option("--data", o.data, "CSV file")->required();
    app->add_option("--algo", o.algo, "kmeans | agglomerative | dbscan");
    app->add_option("--k", o.k, "number of clusters");
    app->add_option("--metric", o.metric, "euclidean | cityblock | cosine | chebyshev | correlation");
    app->add_option("--linkage", o.linkage, "single | complete | average | ward");
    app->add_option("--features", o.features, "comma-separated feature names or indices");
    app->add_option("--seed", o.seed, "random seed");
    app->add_option("--eps", o.eps, "dbscan radius");
    app->add_option("--min-pts", o.min_pts, "dbscan core size");
    app->add_flag("--raw", o.raw, "skip z-scoring");
}

ClusteringParams params_from(const ClusterOptions& o, const Dataset& ds) {
    Json j{{"algorithm", o.algo}, {"k", o.k}, {"metric", o.metric}, {"seed", o.seed},
           {"eps", o.eps},        {"min_pts", o.min_pts}, {"standardize", !o.raw}};
    if (!o.linkage.empty()) j["linkage"] = o.linkage;
    if (!o.features.empty()) j["features"] = feature_list(o.features);
    return params_from_request(j, ds);
}

int cmd_run(const ClusterOptions& o, const std::string& out) {
    const auto ds = load_csv(read_file(o.data));
    const auto inst = run_clustering(ds, params_from(o, ds));
    std::ostringstream csv;
    csv << "row_id,label\n";
    for (std::size_t i = 0; i < inst.rows.size(); ++i) {
        csv << ds.row_ids()[inst.rows[i]] << ',' << inst.labeling.labels[i] << '\n';
    }
    write_output(out, csv.str());
    return 0;
}

// like-after:N and bad-after:N send the feedback after every N generate steps.
struct Policy {
    StepKind feedback = StepKind::generate;
    std::size_t every = 0;

    StepKind at(std::size_t step) const {
        if (every == 0) return StepKind::generate;
        return (step + 1) % (every + 1) == 0 ? feedback : StepKind::generate;
    }
};

Policy parse_policy(const std::string& s) {
    if (s == "always-generate") return {};
    for (const auto& [prefix, kind] : {std::pair{std::string("like-after:"), StepKind::like},
                                       std::pair{std::string("bad-after:"), StepKind::bad}}) {
        if (s.rfind(prefix, 0) != 0) continue;
        const std::string num = s.substr(prefix.size());
        std::size_t n = 0;
        const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), n);
        if (ec != std::errc() || ptr != num.data() + num.size() || n == 0) break;
        return {kind, n};
    }
    throw Error(ErrorCode::InvalidArgument, "unknown policy '" + s + "'");
}

Json node_summary(const TourState& s, std::size_t i) {
    const auto& n = s.nodes[i];
    return {{"node", i},
            {"params", params_to_json(n.instance.params)},
            {"k_effective", n.instance.labeling.k_effective},
            {"score", number_to_json(n.instance.score)}};
}

int cmd_tour(const ClusterOptions& o, std::size_t steps, const std::string& policy_spec, std::uint64_t tour_seed,
             const std::string& constraints, std::size_t batch, bool embeddings, const std::string& out) {
    const auto policy = parse_policy(policy_spec);
    const auto ds = load_csv(read_file(o.data));
    const auto base = params_from(o, ds);
    const auto entry = run_clustering(ds, base);
    TourConfig cfg;
    cfg.batch = batch;
    cfg.compute_embeddings = embeddings;
    Json cj = Json::object();
    if (!constraints.empty()) {
        try {
            cj = Json::parse(constraints);
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::MalformedInput, std::string("constraints: ") + e.what());
        }
    }
    auto state = init_tour(ds, entry, constraints_from_json(cj, base, &ds), tour_seed, cfg);

    Json trace{{"seed", tour_seed}, {"policy", policy_spec}, {"entry", node_summary(state, 0)}};
    Json records = Json::array();
    for (std::size_t i = 0; i < steps; ++i) {
        const auto kind = policy.at(i);
        const auto before = state.current;
        const auto r = step(ds, state, kind, {});
        Json rec{{"step", i}, {"feedback", to_string(kind)}, {"from", before},
                 {"mode", to_string(state.mode)}, {"current", node_summary(state, state.current)}};
        if (kind == StepKind::generate) {
            Json b = Json::array();
            for (const auto idx : r.batch) {
                const auto& e = state.edges;
                Json item = node_summary(state, idx);
                for (const auto& edge : e) {
                    if (edge.a == before && edge.b == idx) {
                        item["delta_p"] = number_to_json(edge.delta_p);
                        item["delta_l"] = number_to_json(edge.delta_l);
                        if (edge.delta_s) item["delta_s"] = number_to_json(*edge.delta_s);
                    }
                }
                b.push_back(std::move(item));
            }
            rec["batch"] = std::move(b);
        }
        records.push_back(std::move(rec));
    }
    trace["steps"] = std::move(records);
    trace["accepted"] = params_to_json(accept(state));
    trace["nodes"] = state.nodes.size();
    write_output(out, trace.dump(2) + "\n");
    return 0;
}

int cmd_serve(const std::string& host, int port) {
    Api api;
    HttpServer server(api, host, port);
    std::cerr << "listening on http://" << host << ':' << server.port() << kApiPrefix << '\n';
    server.run();
    return 0;
}

int cmd_replay(const std::string& file, const std::string& out) {
    const auto bytes = read_file(file);
    const auto loaded = Session::load(bytes);
    const auto replayed = loaded.replay();
    const bool same = replayed.state_json() == loaded.state_json();
    const Json report{{"operations", loaded.log().size()},
                      {"cursor", loaded.cursor()},
                      {"views", loaded.views().size()},
                      {"tours", loaded.tours().size()},
                      {"reproduced", same}};
    write_output(out, report.dump(2) + "\n");
    if (!same) {
        std::cerr << "replayed state differs from the saved state\n";
        return kExitCompute;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ctour: clustering analysis and guided parameter tours"};
    app.require_subcommand(1);

    ClusterOptions run_opts;
    std::string run_out;
    auto* run = app.add_subcommand("run", "cluster a CSV once and write labels");
    add_cluster_options(run, run_opts);
    run->add_option("--out", run_out, "labels CSV (default stdout)");

    ClusterOptions tour_opts;
    std::size_t steps = 10;
    std::string policy = "always-generate";
    std::uint64_t tour_seed = 0;
    std::string constraints;
    std::size_t batch = TourConfig{}.batch;
    bool no_embed = false;
    std::string tour_out;
    auto* tour = app.add_subcommand("tour", "run a tour with scripted feedback and print a JSON trace");
    add_cluster_options(tour, tour_opts);
    tour->add_option("--steps", steps, "number of steps");
    tour->add_option("--policy", policy, "always-generate | like-after:N | bad-after:N");
    tour->add_option("--tour-seed", tour_seed, "tour seed (defaults to --seed)");
    tour->add_option("--constraints", constraints, R"(JSON, e.g. {"k":{"mode":"fixed","value":4}})");
    tour->add_option("--batch", batch, "candidates per generate step")->check(CLI::PositiveNumber);
    tour->add_flag("--no-embeddings", no_embed, "skip per-node projections");
    tour->add_option("--out", tour_out, "trace file (default stdout)");

    std::string host = "127.0.0.1";
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "serve the HTTP API");
    serve->add_option("--host", host, "bind address");
    serve->add_option("--port", port, "port (0 picks a free one)")->check(CLI::Range(0, 65535));

    std::string session_file;
    std::string replay_out;
    auto* session = app.add_subcommand("session", "session file tools");
    session->require_subcommand(1);
    auto* replay = session->add_subcommand("replay", "re-run a saved session's log and check it reproduces");
    replay->add_option("--file", session_file, "session file")->required();
    replay->add_option("--out", replay_out, "report file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (*run) return cmd_run(run_opts, run_out);
        if (*tour) {
            const auto seed = tour->count("--tour-seed") ? tour_seed : tour_opts.seed;
            return cmd_tour(tour_opts, steps, policy, seed, constraints, batch, !no_embed, tour_out);
        }
        if (*serve) return cmd_serve(host, port);
        if (*replay) return cmd_replay(session_file, replay_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return is_input_error(e.code()) ? kExitInput : kExitCompute;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitCompute;
    }
    return 0;
}
