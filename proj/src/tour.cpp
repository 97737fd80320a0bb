#include "ctour/tour.hpp"

#include "ctour/error.hpp"
#include "ctour/insight.hpp"
#include "ctour/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace ctour {

namespace {

constexpr std::array kTourAlgorithms{Algorithm::kmeans, Algorithm::agglomerative};

std::size_t idx(TourParam p) { return static_cast<std::size_t>(p); }

bool same_value(TourParam p, const ClusteringParams& a, const ClusteringParams& b) {
    switch (p) {
        case TourParam::feature_subset: return a.feature_subset == b.feature_subset;
        case TourParam::k: return a.k == b.k;
        case TourParam::algorithm: return a.algorithm == b.algorithm;
        case TourParam::metric: return a.metric == b.metric;
        case TourParam::linkage: return a.linkage == b.linkage;
        case TourParam::standardize: return a.standardize == b.standardize;
    }
    return true;
}

void copy_value(TourParam p, ClusteringParams& to, const ClusteringParams& from) {
    switch (p) {
        case TourParam::feature_subset: to.feature_subset = from.feature_subset; break;
        case TourParam::k: to.k = from.k; break;
        case TourParam::algorithm: to.algorithm = from.algorithm; break;
        case TourParam::metric: to.metric = from.metric; break;
        case TourParam::linkage: to.linkage = from.linkage; break;
        case TourParam::standardize: to.standardize = from.standardize; break;
    }
}

template <typename T>
T pick(const std::vector<T>& values, Rng& rng) {
    return values[rng.below(values.size())];
}

// Everything a draw needs to know about the node being perturbed.
class DrawContext {
public:
    DrawContext(const Dataset& ds, const ClusteringInstance& current, const TourConfig& config)
        : ds_(ds), current_(current), range_(tour_k_range(current.rows.size(), config.k_max)) {}

    const KRange& range() const { return range_; }
    const ClusteringInstance& current() const { return current_; }

    bool changeable(TourParam p) const {
        switch (p) {
            case TourParam::feature_subset: return ds_.enabled_features().size() >= 2;
            case TourParam::k: return range_.hi > range_.lo || current_.params.k != range_.lo;
            default: return true;
        }
    }

    // Replaces p in params with a different admissible value. Returns false
    // when no alternative exists.
    bool draw(TourParam p, ClusteringParams& params, Rng& rng, std::uint64_t cycle) {
        switch (p) {
            case TourParam::k: {
                std::vector<int> ks;
                for (int k = range_.lo; k <= range_.hi; ++k) {
                    if (k != params.k) ks.push_back(k);
                }
                if (ks.empty()) return false;
                params.k = pick(ks, rng);
                return true;
            }
            case TourParam::algorithm: {
                std::vector<Algorithm> algs;
                for (auto a : kTourAlgorithms) {
                    if (a != params.algorithm) algs.push_back(a);
                }
                params.algorithm = pick(algs, rng);
                return true;
            }
            case TourParam::metric: {
                std::vector<Metric> metrics;
                for (auto m : kAllMetrics) {
                    if (m != params.metric && min_features(m) <= params.feature_subset.size()) metrics.push_back(m);
                }
                if (metrics.empty()) return false;
                params.metric = pick(metrics, rng);
                return true;
            }
            case TourParam::linkage: {
                std::vector<Linkage> links;
                for (auto l : kAllLinkages) {
                    if (l != params.linkage) links.push_back(l);
                }
                params.linkage = pick(links, rng);
                return true;
            }
            case TourParam::standardize: params.standardize = !params.standardize; return true;
            case TourParam::feature_subset: return draw_features(params, rng, cycle);
        }
        return false;
    }

private:
    const FeatureRanking& ranking(RankMethod m) {
        auto& slot = rankings_[static_cast<std::size_t>(m)];
        if (!slot) slot = rank_features(ds_, m, current_);
        return *slot;
    }

    bool draw_features(ClusteringParams& params, Rng& rng, std::uint64_t cycle) {
        RankMethod method = kAllRankMethods[cycle % kAllRankMethods.size()];
        if (method == RankMethod::anova_f && current_.labeling.k_effective < 2) method = RankMethod::variance;
        std::vector<std::size_t> order;
        for (const auto& r : ranking(method).ranked) order.push_back(r.feature);
        const std::size_t d = order.size();
        if (d < 2) return false;
        const std::size_t lo = (d + 1) / 2;
        const std::size_t size = lo + rng.below(d - lo + 1);
        if (rng.bernoulli(0.5)) {
            order.erase(order.begin() + static_cast<std::ptrdiff_t>(rng.below(std::min<std::size_t>(3, d))));
        }
        order.resize(std::min(size, order.size()));
        std::sort(order.begin(), order.end());
        params.feature_subset = std::move(order);
        return true;
    }

    const Dataset& ds_;
    const ClusteringInstance& current_;
    KRange range_;
    std::array<std::optional<FeatureRanking>, kAllRankMethods.size()> rankings_;
};

void apply_fixed(ClusteringParams& p, const TourConstraints& c) {
    for (auto tp : kAllTourParams) {
        if (c.mode(tp) == ConstraintMode::fixed) copy_value(tp, p, c.values);
    }
}

// Resolves combinations the clustering would reject. False when the fixed
// values leave no way out.
bool repair(ClusteringParams& p, const TourConstraints& c) {
    const auto fixed = [&](TourParam tp) { return c.mode(tp) == ConstraintMode::fixed; };
    if (p.feature_subset.size() < min_features(p.metric)) {
        if (fixed(TourParam::metric)) return false;
        p.metric = Metric::euclidean;
    }
    if (p.algorithm == Algorithm::agglomerative && p.linkage == Linkage::ward && p.metric != Metric::euclidean) {
        if (!fixed(TourParam::linkage)) {
            p.linkage = Linkage::average;
        } else if (!fixed(TourParam::metric)) {
            p.metric = Metric::euclidean;
        } else {
            return false;
        }
    }
    return true;
}

std::vector<std::size_t> weighted_without_replacement(std::vector<double> weights, std::size_t m, Rng& rng) {
    std::vector<std::size_t> out;
    std::vector<std::size_t> ids(weights.size());
    std::iota(ids.begin(), ids.end(), 0);
    while (out.size() < m && !ids.empty()) {
        const std::size_t j = rng.weighted(weights);
        out.push_back(ids[j]);
        ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(j));
        weights.erase(weights.begin() + static_cast<std::ptrdiff_t>(j));
    }
    return out;
}

TourWeights uniform_weights(const TourConstraints& c) {
    TourWeights w;
    std::size_t free = 0;
    for (auto p : kAllTourParams) free += c.mode(p) != ConstraintMode::fixed;
    for (auto p : kAllTourParams) {
        if (c.mode(p) != ConstraintMode::fixed) w.w[idx(p)] = 1.0 / static_cast<double>(free);
    }
    return w;
}

// Draws the parameter set of one candidate; nullopt when the draw cannot
// satisfy the constraints.
std::optional<ClusteringParams> draw_candidate(DrawContext& ctx, TourState& state, Rng& rng) {
    const auto& cons = state.constraints;
    ClusteringParams params = ctx.current().params;
    apply_fixed(params, cons);

    std::vector<TourParam> change;
    std::vector<TourParam> pool;
    for (auto p : kAllTourParams) {
        const auto mode = cons.mode(p);
        if (mode == ConstraintMode::free) {
            change.push_back(p);
        } else if (mode == ConstraintMode::automatic && ctx.changeable(p)) {
            if (state.mode == TourMode::refine &&
                std::find(state.frozen.begin(), state.frozen.end(), p) != state.frozen.end()) {
                continue;
            }
            pool.push_back(p);
        }
    }
    if (!pool.empty()) {
        const std::size_t most = state.mode == TourMode::explore ? 3 : 2;
        const std::size_t m = std::min(pool.size(), 1 + rng.below(most));
        std::vector<double> w;
        for (auto p : pool) w.push_back(state.weights[p]);
        if (state.mode == TourMode::refine) std::fill(w.begin(), w.end(), 1.0);
        for (auto j : weighted_without_replacement(w, m, rng)) change.push_back(pool[j]);
    }
    if (change.empty()) return std::nullopt;
    // Features first so the metric draw sees the new subset size.
    std::sort(change.begin(), change.end());
    for (auto p : change) {
        if (!ctx.draw(p, params, rng, state.feature_cycle)) return std::nullopt;
        if (p == TourParam::feature_subset) ++state.feature_cycle;
    }
    if (!repair(params, cons)) return std::nullopt;
    for (auto p : kAllTourParams) {
        if (cons.mode(p) == ConstraintMode::free && same_value(p, params, ctx.current().params)) return std::nullopt;
    }
    if (state.mode == TourMode::refine && state.liked) {
        const auto& liked = state.nodes[*state.liked].instance.params;
        for (auto p : state.frozen) {
            if (!same_value(p, params, liked)) return std::nullopt;
        }
    }
    return params;
}

std::vector<TourParam> frozen_params(const TourState& state) {
    std::vector<TourParam> autos;
    for (auto p : kAllTourParams) {
        if (state.constraints.mode(p) == ConstraintMode::automatic) autos.push_back(p);
    }
    std::stable_sort(autos.begin(), autos.end(),
                     [&](TourParam a, TourParam b) { return state.weights[a] > state.weights[b]; });
    std::vector<TourParam> out(autos.begin(), autos.begin() + static_cast<std::ptrdiff_t>((autos.size() + 1) / 2));
    for (auto p : {TourParam::feature_subset, TourParam::k}) {
        if (state.constraints.mode(p) == ConstraintMode::automatic &&
            std::find(out.begin(), out.end(), p) == out.end()) {
            out.push_back(p);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

ClusterRunner resolve(const Dataset& ds, const ClusterRunner& runner) { return runner ? runner : direct_runner(ds); }

void ensure_weights(const Dataset& ds, TourState& state, Rng& rng, const ClusterRunner& runner) {
    if (state.weights_node == state.current) return;
    state.weights = estimate_weights(ds, state, rng, runner);
    state.weights_node = state.current;
}

std::optional<Embedding> maybe_embed(const Dataset& ds, const TourState& state, std::size_t node) {
    if (!state.config.compute_embeddings) return std::nullopt;
    return choose_embedding(ds, state.nodes[node].instance, mix_seed(state.seed, 0x10000 + node),
                            state.config.tsne_max_rows);
}

}  // namespace

std::string_view to_string(TourParam p) {
    switch (p) {
        case TourParam::feature_subset: return "feature_subset";
        case TourParam::k: return "k";
        case TourParam::algorithm: return "algorithm";
        case TourParam::metric: return "metric";
        case TourParam::linkage: return "linkage";
        case TourParam::standardize: return "standardize";
    }
    return "?";
}

TourParam parse_tour_param(std::string_view s) {
    for (auto p : kAllTourParams) {
        if (to_string(p) == s) return p;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown tour parameter '" + std::string(s) + "'");
}

std::string_view to_string(ConstraintMode m) {
    switch (m) {
        case ConstraintMode::automatic: return "auto";
        case ConstraintMode::fixed: return "fixed";
        case ConstraintMode::free: return "free";
    }
    return "?";
}

ConstraintMode parse_constraint_mode(std::string_view s) {
    for (auto m : {ConstraintMode::automatic, ConstraintMode::fixed, ConstraintMode::free}) {
        if (to_string(m) == s) return m;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown constraint mode '" + std::string(s) + "'");
}

void TourConstraints::fix(TourParam p, const ClusteringParams& from) {
    set(p, ConstraintMode::fixed);
    copy_value(p, values, from);
}

std::string_view to_string(Feedback f) {
    switch (f) {
        case Feedback::none: return "none";
        case Feedback::liked: return "liked";
        case Feedback::disliked: return "disliked";
    }
    return "?";
}

std::string_view to_string(StepKind s) {
    switch (s) {
        case StepKind::generate: return "generate";
        case StepKind::like: return "like";
        case StepKind::bad: return "bad";
    }
    return "?";
}

std::string_view to_string(TourMode m) { return m == TourMode::explore ? "explore" : "refine"; }

StepKind parse_step_kind(std::string_view s) {
    for (auto k : {StepKind::generate, StepKind::like, StepKind::bad}) {
        if (to_string(k) == s) return k;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown feedback '" + std::string(s) + "'");
}

KRange tour_k_range(std::size_t rows, int k_max) {
    KRange r;
    r.hi = std::max(r.lo, std::min(k_max, static_cast<int>(std::min<std::size_t>(rows, 1 << 20)) - 1));
    return r;
}

double change_magnitude(TourParam p, const ClusteringParams& a, const ClusteringParams& b, const KRange& range) {
    switch (p) {
        case TourParam::k: return std::abs(a.k - b.k) / range.width();
        case TourParam::feature_subset: {
            std::vector<std::size_t> both;
            std::set_intersection(a.feature_subset.begin(), a.feature_subset.end(), b.feature_subset.begin(),
                                  b.feature_subset.end(), std::back_inserter(both));
            const std::size_t uni = a.feature_subset.size() + b.feature_subset.size() - both.size();
            return uni == 0 ? 0.0 : 1.0 - static_cast<double>(both.size()) / static_cast<double>(uni);
        }
        default: return same_value(p, a, b) ? 0.0 : 1.0;
    }
}

double delta_p(const ClusteringParams& a, const ClusteringParams& b, const TourWeights& w, const KRange& range) {
    double total = 0;
    for (auto p : kAllTourParams) total += w[p] * change_magnitude(p, a, b, range);
    return total;
}

double delta_l(const ClusteringInstance& a, const ClusteringInstance& b) {
    if (a.rows != b.rows) return 1.0;
    if (a.rows.size() < 2) return 0.0;
    return 1.0 - ami(a.labeling, b.labeling);
}

TourState init_tour(const Dataset& ds, const ClusteringInstance& entry, const TourConstraints& constraints,
                    std::uint64_t seed, const TourConfig& config, const ClusterRunner&) {
    const bool all_fixed = std::all_of(kAllTourParams.begin(), kAllTourParams.end(),
                                       [&](TourParam p) { return constraints.mode(p) == ConstraintMode::fixed; });
    if (all_fixed) throw Error(ErrorCode::AllParamsFixed, "every tour parameter is fixed");
    if (entry.rows.empty()) throw Error(ErrorCode::InvalidArgument, "entry instance has no rows");
    if (config.batch == 0) throw Error(ErrorCode::InvalidArgument, "batch size must be positive");
    TourState state;
    state.constraints = constraints;
    state.config = config;
    state.seed = seed;
    state.weights = uniform_weights(constraints);
    state.nodes.push_back(TourNode{entry, std::nullopt, std::nullopt, Feedback::none});
    state.nodes[0].embedding = maybe_embed(ds, state, 0);
    return state;
}

TourWeights estimate_weights(const Dataset& ds, const TourState& state, Rng& rng, const ClusterRunner& runner) {
    const ClusterRunner run = resolve(ds, runner);
    const auto& current = state.nodes.at(state.current).instance;
    DrawContext ctx(ds, current, state.config);
    const std::size_t probes = static_cast<std::size_t>(std::max(0, state.config.probes));

    struct Probe {
        TourParam param;
        std::optional<ClusteringParams> params;
    };
    std::vector<Probe> jobs;
    for (auto p : kAllTourParams) {
        if (state.constraints.mode(p) == ConstraintMode::fixed || !ctx.changeable(p)) continue;
        for (std::size_t j = 0; j < probes; ++j) {
            ClusteringParams params = current.params;
            const bool ok = ctx.draw(p, params, rng, state.feature_cycle + j);
            jobs.push_back({p, ok ? std::optional(params) : std::nullopt});
        }
    }
    std::vector<double> dl(jobs.size(), 0.0);
    parallel_for(jobs.size(), [&](std::size_t i) {
        if (!jobs[i].params) return;
        try {
            dl[i] = std::max(0.0, delta_l(current, run(*jobs[i].params)));
        } catch (const Error&) {
            dl[i] = 0.0;
        }
    });
    TourWeights w;
    double total = 0;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        w.w[idx(jobs[i].param)] += dl[i] / static_cast<double>(probes);
        total += dl[i] / static_cast<double>(probes);
    }
    if (!(total > 1e-12)) return uniform_weights(state.constraints);
    for (auto& x : w.w) x /= total;
    return w;
}

std::vector<ClusteringInstance> generate_candidates(const Dataset& ds, TourState& state, Rng& rng,
                                                    const ClusterRunner& runner) {
    const ClusterRunner run = resolve(ds, runner);
    const auto& current = state.nodes.at(state.current).instance;
    DrawContext ctx(ds, current, state.config);
    const std::size_t batch = state.config.batch;
    const int rounds = 1 + std::max(0, state.config.redraws);

    std::vector<std::optional<ClusteringInstance>> slots(batch);
    std::vector<std::optional<ClusteringParams>> drawn(batch);
    for (int round = 0; round < rounds; ++round) {
        const bool last_round = round + 1 == rounds;
        std::vector<std::size_t> pending;
        for (std::size_t s = 0; s < batch; ++s) {
            if (!slots[s]) pending.push_back(s);
        }
        if (pending.empty()) break;
        for (auto s : pending) {
            drawn[s] = draw_candidate(ctx, state, rng);
            if (!drawn[s]) continue;
            const auto& p = *drawn[s];
            const bool known = std::any_of(state.nodes.begin(), state.nodes.end(),
                                           [&](const TourNode& n) { return n.instance.params == p; });
            bool taken = false;
            for (std::size_t o = 0; o < batch && !taken; ++o) {
                if (o == s) continue;
                if (slots[o] && slots[o]->params == p) taken = true;
                if (!slots[o] && o < s && drawn[o] && *drawn[o] == p) taken = true;
            }
            if (known || taken) drawn[s].reset();
        }
        std::vector<std::optional<ClusteringInstance>> ran(batch);
        parallel_for(pending.size(), [&](std::size_t i) {
            const std::size_t s = pending[i];
            if (!drawn[s]) return;
            try {
                ran[s] = run(*drawn[s]);
            } catch (const Error&) {
            }
        });
        for (auto s : pending) {
            if (!ran[s]) continue;
            bool keep = true;
            for (auto t : state.tabu) {
                if (delta_l(*ran[s], state.nodes[t].instance) < state.config.tabu_radius) keep = false;
            }
            if (keep && state.last_disliked && !last_round &&
                delta_l(*ran[s], state.nodes[*state.last_disliked].instance) < state.config.bad_target) {
                keep = false;
            }
            if (keep) slots[s] = std::move(ran[s]);
        }
    }
    std::vector<ClusteringInstance> out;
    for (auto& s : slots) {
        if (s) out.push_back(std::move(*s));
    }
    if (out.empty()) throw Error(ErrorCode::NoViableCandidate, "no candidate survived the redraw budget");
    return out;
}

StepResult step(const Dataset& ds, TourState& state, StepKind feedback, const ClusterRunner& runner) {
    Rng rng(mix_seed(state.seed, state.step_index));
    ++state.step_index;
    StepResult result;
    TourStepRecord record;
    record.kind = feedback;
    record.mode = state.mode;

    switch (feedback) {
        case StepKind::generate: {
            ensure_weights(ds, state, rng, runner);
            std::vector<ClusteringInstance> batch;
            try {
                batch = generate_candidates(ds, state, rng, runner);
            } catch (const Error& e) {
                // the frozen neighbourhood is used up: leave refine and explore instead
                if (e.code() != ErrorCode::NoViableCandidate || state.mode != TourMode::refine) throw;
                state.mode = TourMode::explore;
                state.liked.reset();
                state.frozen.clear();
                record.mode = state.mode;
                batch = generate_candidates(ds, state, rng, runner);
            }
            const std::size_t from = state.current;
            const auto& cur = state.nodes[from].instance;
            const KRange range = tour_k_range(cur.rows.size(), state.config.k_max);

            std::vector<double> dl(batch.size()), dp(batch.size());
            std::vector<std::optional<double>> ds_scores(batch.size());
            for (std::size_t i = 0; i < batch.size(); ++i) {
                dl[i] = delta_l(cur, batch[i]);
                dp[i] = delta_p(cur.params, batch[i].params, state.weights, range);
            }
            std::size_t best = 0;
            if (state.mode == TourMode::refine) {
                std::vector<ClusteringInstance> pool;
                pool.reserve(batch.size() + 1);
                pool.push_back(cur);
                pool.insert(pool.end(), batch.begin(), batch.end());
                const auto s = combined_score(ds, pool);
                for (std::size_t i = 0; i < batch.size(); ++i) {
                    ds_scores[i] = s[i + 1] - s[0];
                    if (*ds_scores[i] > *ds_scores[best]) best = i;
                }
            } else {
                for (std::size_t i = 1; i < batch.size(); ++i) {
                    if (dl[i] > dl[best]) best = i;
                }
            }
            for (std::size_t i = 0; i < batch.size(); ++i) {
                const std::size_t id = state.nodes.size();
                state.nodes.push_back(TourNode{std::move(batch[i]), std::nullopt, from, Feedback::none});
                state.edges.push_back(TourEdge{from, id, dp[i], dl[i], ds_scores[i]});
                result.batch.push_back(id);
            }
            state.current = result.batch[best];
            state.nodes[state.current].embedding = maybe_embed(ds, state, state.current);
            state.last_disliked.reset();
            break;
        }
        case StepKind::like: {
            ensure_weights(ds, state, rng, runner);
            state.nodes[state.current].feedback = Feedback::liked;
            state.liked = state.current;
            state.mode = TourMode::refine;
            state.frozen = frozen_params(state);
            break;
        }
        case StepKind::bad: {
            auto& node = state.nodes[state.current];
            node.feedback = Feedback::disliked;
            if (std::find(state.tabu.begin(), state.tabu.end(), state.current) == state.tabu.end()) {
                state.tabu.push_back(state.current);
            }
            state.last_disliked = state.current;
            if (node.parent) state.current = *node.parent;
            state.mode = TourMode::explore;
            state.liked.reset();
            state.frozen.clear();
            break;
        }
    }
    result.chosen = state.current;
    record.batch = result.batch;
    record.current = state.current;
    state.history.push_back(std::move(record));
    return result;
}

Embedding choose_embedding(const Matrix& X, const Labeling& labeling, Metric metric, std::uint64_t seed,
                           std::size_t tsne_max_rows) {
    const std::size_t n = static_cast<std::size_t>(X.rows());
    ProjectionParams pp;
    pp.seed = seed;
    pp.method = ProjectionMethod::pca;
    Embedding best = project(X, pp);
    if (labeling.k_effective < 2) return best;
    double best_score = score_projection(best, labeling);

    std::vector<ProjectionParams> others;
    pp.method = ProjectionMethod::cmds;
    pp.metric = metric;
    others.push_back(pp);
    const double perplexity = std::min(30.0, (static_cast<double>(n) - 1.0) / 3.0 - 1.0);
    if (n <= tsne_max_rows && perplexity >= 2.0) {
        pp.method = ProjectionMethod::tsne;
        pp.metric = Metric::euclidean;
        pp.perplexity = perplexity;
        others.push_back(pp);
    }
    std::vector<std::optional<Embedding>> results(others.size());
    parallel_for(others.size(), [&](std::size_t i) {
        try {
            results[i] = project(X, others[i]);
        } catch (const Error&) {
        }
    });
    for (auto& r : results) {
        if (!r) continue;
        const double s = score_projection(*r, labeling);
        if (s > best_score + 1e-9) {  // earlier methods win near-ties
            best_score = s;
            best = std::move(*r);
        }
    }
    return best;
}

Embedding choose_embedding(const Dataset& ds, const ClusteringInstance& inst, std::uint64_t seed,
                           std::size_t tsne_max_rows) {
    return choose_embedding(instance_matrix(ds, inst), inst.labeling, inst.params.metric, seed, tsne_max_rows);
}

ClusteringParams accept(const TourState& state) { return state.nodes.at(state.current).instance.params; }

}  // namespace ctour
