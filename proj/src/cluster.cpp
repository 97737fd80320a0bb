#include "ctour/cluster.hpp"

#include "ctour/error.hpp"
#include "ctour/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

namespace ctour {

namespace {
std::atomic<std::uint64_t> g_executions{0};
}

std::uint64_t clustering_executions() { return g_executions.load(); }

std::string_view to_string(Algorithm a) {
    switch (a) {
        case Algorithm::kmeans: return "kmeans";
        case Algorithm::agglomerative: return "agglomerative";
        case Algorithm::dbscan: return "dbscan";
    }
    return "?";
}

std::string_view to_string(Metric m) {
    switch (m) {
        case Metric::euclidean: return "euclidean";
        case Metric::cityblock: return "cityblock";
        case Metric::cosine: return "cosine";
        case Metric::chebyshev: return "chebyshev";
        case Metric::correlation: return "correlation";
    }
    return "?";
}

std::string_view to_string(Linkage l) {
    switch (l) {
        case Linkage::single: return "single";
        case Linkage::complete: return "complete";
        case Linkage::average: return "average";
        case Linkage::ward: return "ward";
    }
    return "?";
}

Algorithm parse_algorithm(std::string_view s) {
    for (auto a : kAllAlgorithms) {
        if (to_string(a) == s) return a;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown algorithm '" + std::string(s) + "'");
}

Metric parse_metric(std::string_view s) {
    for (auto m : kAllMetrics) {
        if (to_string(m) == s) return m;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown metric '" + std::string(s) + "'");
}

Linkage parse_linkage(std::string_view s) {
    for (auto l : kAllLinkages) {
        if (to_string(l) == s) return l;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown linkage '" + std::string(s) + "'");
}

ClusteringParams default_params(const Dataset& ds, int k) {
    ClusteringParams p;
    p.feature_subset = ds.enabled_features();
    p.k = std::max(1, std::min<int>(k, static_cast<int>(ds.rows())));
    return p;
}

void validate_params(const ClusteringParams& p, std::size_t feature_count) {
    if (p.feature_subset.empty()) throw Error(ErrorCode::InvalidArgument, "feature subset is empty");
    for (std::size_t i = 0; i < p.feature_subset.size(); ++i) {
        if (p.feature_subset[i] >= feature_count) throw Error(ErrorCode::UnknownFeature, "feature index out of range");
        if (i > 0 && p.feature_subset[i] <= p.feature_subset[i - 1]) {
            throw Error(ErrorCode::InvalidArgument, "feature subset must be sorted and unique");
        }
    }
    if (!(p.sample_rate > 0.0 && p.sample_rate <= 1.0)) throw Error(ErrorCode::InvalidRate, "sample rate must be in (0, 1]");
    if (p.algorithm == Algorithm::dbscan) {
        if (!(p.eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "eps must be positive");
        if (p.min_pts < 1) throw Error(ErrorCode::InvalidArgument, "min_pts must be at least 1");
    } else if (p.k < 1) {
        throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
    }
    if (p.algorithm == Algorithm::agglomerative && p.linkage == Linkage::ward && p.metric != Metric::euclidean) {
        throw Error(ErrorCode::InvalidCombination, "ward linkage requires the euclidean metric");
    }
}

Labeling canonicalize(const std::vector<int>& raw) {
    int max_id = -1;
    for (int l : raw) max_id = std::max(max_id, l);
    const auto m = static_cast<std::size_t>(max_id + 1);
    std::vector<std::size_t> size(m, 0), first(m, raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] < 0) continue;
        const auto c = static_cast<std::size_t>(raw[i]);
        ++size[c];
        first[c] = std::min(first[c], i);
    }
    std::vector<std::size_t> order;
    for (std::size_t c = 0; c < m; ++c) {
        if (size[c] > 0) order.push_back(c);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (size[x] != size[y]) return size[x] > size[y];
        return first[x] < first[y];
    });
    std::vector<int> remap(m, kNoise);
    for (std::size_t i = 0; i < order.size(); ++i) remap[order[i]] = static_cast<int>(i);
    Labeling out;
    out.labels.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out.labels[i] = raw[i] < 0 ? kNoise : remap[static_cast<std::size_t>(raw[i])];
    out.k_effective = static_cast<int>(order.size());
    return out;
}

// ---------------------------------------------------------------------------
// Distances

namespace {

bool is_degenerate(const Eigen::Ref<const Vector>& v, Metric metric) {
    if (metric == Metric::cosine) return !(v.squaredNorm() > 0);
    if (metric == Metric::correlation) return !((v.array() - v.mean()).matrix().squaredNorm() > 0);
    return false;
}

double raw_distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b, Metric metric) {
    switch (metric) {
        case Metric::euclidean: return (a - b).norm();
        case Metric::cityblock: return (a - b).cwiseAbs().sum();
        case Metric::chebyshev: return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
        case Metric::cosine: {
            const double c = a.dot(b) / std::sqrt(a.squaredNorm() * b.squaredNorm());
            return std::max(0.0, 1.0 - std::clamp(c, -1.0, 1.0));
        }
        case Metric::correlation: {
            const Vector da = a.array() - a.mean();
            const Vector db = b.array() - b.mean();
            const double c = da.dot(db) / std::sqrt(da.squaredNorm() * db.squaredNorm());
            return std::max(0.0, 1.0 - std::clamp(c, -1.0, 1.0));
        }
    }
    return 0.0;
}

}  // namespace

std::size_t min_features(Metric metric) {
    switch (metric) {
        case Metric::cosine: return 2;
        case Metric::correlation: return 3;
        default: return 1;
    }
}

double distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b, Metric metric) {
    if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "vectors differ in dimension");
    if (is_degenerate(a, metric) || is_degenerate(b, metric)) {
        throw Error(ErrorCode::DegenerateVector, std::string(to_string(metric)) + " distance undefined for this vector");
    }
    return raw_distance(a, b, metric);
}

double metric_distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b, Metric metric) noexcept {
    if (is_degenerate(a, metric) || is_degenerate(b, metric)) return a == b ? 0.0 : 1.0;
    return raw_distance(a, b, metric);
}

Matrix pairwise_distances(const Matrix& X, Metric metric) {
    const Eigen::Index n = X.rows();
    const Matrix Xt = X.transpose();
    Matrix D = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double d = metric == Metric::euclidean ? (Xt.col(i) - Xt.col(j)).norm()
                                                         : metric_distance(Xt.col(i), Xt.col(j), metric);
            D(i, j) = D(j, i) = d;
        }
    }
    return D;
}

// ---------------------------------------------------------------------------
// k-means
//
// The loops below work on transposed copies (one column per point / centre)
// so that each vector handed to metric_distance is contiguous.

namespace {

double column_distance(const Matrix& A, Eigen::Index i, const Matrix& B, Eigen::Index j, Metric metric) {
    if (metric == Metric::euclidean) return (A.col(i) - B.col(j)).norm();
    return metric_distance(A.col(i), B.col(j), metric);
}

bool assign_nearest(const Matrix& Xt, const Matrix& Ct, Metric metric, std::vector<int>& labels,
                    std::vector<double>& dist) {
    bool changed = false;
    for (Eigen::Index i = 0; i < Xt.cols(); ++i) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < Ct.cols(); ++c) {
            const double d = column_distance(Xt, i, Ct, c, metric);
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(c);
            }
        }
        const auto ui = static_cast<std::size_t>(i);
        if (labels[ui] != best) {
            labels[ui] = best;
            changed = true;
        }
        dist[ui] = best_d;
    }
    return changed;
}

void update_centroids(const Matrix& Xt, std::vector<int>& labels, const std::vector<double>& dist, Matrix& Ct) {
    const auto n = static_cast<std::size_t>(Xt.cols());
    const auto uk = static_cast<std::size_t>(Ct.cols());
    std::vector<std::size_t> counts(uk, 0);
    Matrix sums = Matrix::Zero(Xt.rows(), Ct.cols());
    for (std::size_t i = 0; i < n; ++i) {
        sums.col(labels[i]) += Xt.col(static_cast<Eigen::Index>(i));
        ++counts[static_cast<std::size_t>(labels[i])];
    }
    // An empty cluster takes the point farthest from its current centroid,
    // drawn from a cluster that keeps at least one member.
    std::vector<bool> moved(n, false);
    for (std::size_t c = 0; c < uk; ++c) {
        if (counts[c] > 0) continue;
        std::size_t far = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (moved[i] || counts[static_cast<std::size_t>(labels[i])] <= 1) continue;
            if (far == n || dist[i] > dist[far]) far = i;
        }
        if (far == n || !(dist[far] > 0)) continue;
        const auto old = static_cast<std::size_t>(labels[far]);
        sums.col(static_cast<Eigen::Index>(old)) -= Xt.col(static_cast<Eigen::Index>(far));
        --counts[old];
        sums.col(static_cast<Eigen::Index>(c)) = Xt.col(static_cast<Eigen::Index>(far));
        counts[c] = 1;
        labels[far] = static_cast<int>(c);
        moved[far] = true;
    }
    for (std::size_t c = 0; c < uk; ++c) {
        const auto ic = static_cast<Eigen::Index>(c);
        if (counts[c] > 0) Ct.col(ic) = sums.col(ic) / static_cast<double>(counts[c]);
    }
}

double objective(const Matrix& Xt, const Matrix& Ct, Metric metric, const std::vector<int>& labels) {
    double total = 0;
    for (Eigen::Index i = 0; i < Xt.cols(); ++i) {
        const double d = column_distance(Xt, i, Ct, labels[static_cast<std::size_t>(i)], metric);
        total += d * d;
    }
    return total;
}

Matrix plus_plus_init(const Matrix& Xt, int k, Metric metric, Rng& rng) {
    const auto n = static_cast<std::size_t>(Xt.cols());
    Matrix Ct(Xt.rows(), k);
    std::vector<bool> chosen(n, false);
    const std::size_t first = rng.below(n);
    Ct.col(0) = Xt.col(static_cast<Eigen::Index>(first));
    chosen[first] = true;
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = column_distance(Xt, static_cast<Eigen::Index>(i), Ct, 0, metric);
        d2[i] = d * d;
    }
    for (int c = 1; c < k; ++c) {
        std::size_t pick;
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        if (total > 0) {
            pick = rng.weighted(d2);
        } else {
            // Every point coincides with a centre; take an unused row.
            std::vector<std::size_t> free_rows;
            for (std::size_t i = 0; i < n; ++i) {
                if (!chosen[i]) free_rows.push_back(i);
            }
            pick = free_rows.empty() ? rng.below(n) : free_rows[rng.below(free_rows.size())];
        }
        chosen[pick] = true;
        Ct.col(c) = Xt.col(static_cast<Eigen::Index>(pick));
        for (std::size_t i = 0; i < n; ++i) {
            const double d = column_distance(Xt, static_cast<Eigen::Index>(i), Ct, c, metric);
            d2[i] = std::min(d2[i], d * d);
        }
    }
    return Ct;
}

KMeansResult kmeans_single(const Matrix& Xt, int k, Metric metric, std::uint64_t seed) {
    Rng rng(seed);
    const auto n = static_cast<std::size_t>(Xt.cols());
    KMeansResult r;
    Matrix Ct = plus_plus_init(Xt, k, metric, rng);
    r.labels.assign(n, -1);
    std::vector<double> dist(n, 0.0);
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < kKMeansMaxIter; ++it) {
        const bool changed = assign_nearest(Xt, Ct, metric, r.labels, dist);
        r.iterations = it + 1;
        if (!changed && it > 0) break;
        update_centroids(Xt, r.labels, dist, Ct);
        const double obj = objective(Xt, Ct, metric, r.labels);
        r.history.push_back(obj);
        if (std::isfinite(prev) && prev - obj <= kKMeansTol * prev) {
            // Converged by tolerance; settle the assignment against the final
            // centres so the result is a fixed point when possible.
            if (!assign_nearest(Xt, Ct, metric, r.labels, dist)) break;
            update_centroids(Xt, r.labels, dist, Ct);
            r.history.push_back(objective(Xt, Ct, metric, r.labels));
        }
        prev = r.history.back();
    }
    r.objective = objective(Xt, Ct, metric, r.labels);
    r.centroids = Ct.transpose();
    return r;
}

}  // namespace

KMeansResult kmeans(const Matrix& X, int k, Metric metric, std::uint64_t seed, int restarts) {
    if (k < 1 || static_cast<Eigen::Index>(k) > X.rows()) throw Error(ErrorCode::TooFewRows, "k exceeds row count");
    const Matrix Xt = X.transpose();
    KMeansResult best;
    bool have = false;
    for (int r = 0; r < std::max(1, restarts); ++r) {
        KMeansResult cur = kmeans_single(Xt, k, metric, mix_seed(seed, static_cast<std::uint64_t>(r)));
        if (!have || cur.objective < best.objective) {
            best = std::move(cur);
            have = true;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Hierarchical

namespace {

double lance_williams(Linkage linkage, double d_ik, double d_jk, double d_ij, double ni, double nj, double nk) {
    switch (linkage) {
        case Linkage::single: return std::min(d_ik, d_jk);
        case Linkage::complete: return std::max(d_ik, d_jk);
        case Linkage::average: return (ni * d_ik + nj * d_jk) / (ni + nj);
        case Linkage::ward: {
            const double t = ni + nj + nk;
            const double v = ((ni + nk) * d_ik * d_ik + (nj + nk) * d_jk * d_jk - nk * d_ij * d_ij) / t;
            return std::sqrt(std::max(0.0, v));
        }
    }
    return 0.0;
}

struct UnionFind {
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    std::vector<std::size_t> parent;
};

}  // namespace

std::vector<Merge> hierarchical_merges(const Matrix& distances, Linkage linkage) {
    const auto n = static_cast<std::size_t>(distances.rows());
    if (distances.cols() != distances.rows()) throw Error(ErrorCode::DimensionMismatch, "distance matrix must be square");
    if (n < 2) return {};
    Matrix D = distances;
    std::vector<double> size(n, 1.0);
    std::vector<bool> active(n, true);
    struct RawMerge {
        std::size_t a, b;
        double h;
    };
    std::vector<RawMerge> raw;
    raw.reserve(n - 1);
    std::vector<std::size_t> chain;
    chain.reserve(n);

    // Nearest-neighbour chain: valid for every reducible linkage, which
    // covers all four supported ones.
    std::size_t remaining = n;
    while (remaining > 1) {
        if (chain.empty()) {
            for (std::size_t i = 0; i < n; ++i) {
                if (active[i]) {
                    chain.push_back(i);
                    break;
                }
            }
        }
        while (true) {
            const std::size_t x = chain.back();
            const std::size_t prev = chain.size() >= 2 ? chain[chain.size() - 2] : n;
            std::size_t y = n;
            double best = std::numeric_limits<double>::infinity();
            if (prev != n) {
                y = prev;
                best = D(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(prev));
            }
            for (std::size_t i = 0; i < n; ++i) {
                if (!active[i] || i == x) continue;
                const double d = D(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(i));
                if (d < best) {
                    best = d;
                    y = i;
                }
            }
            if (y == prev) break;
            chain.push_back(y);
        }
        const std::size_t b = chain.back();
        chain.pop_back();
        const std::size_t a = chain.back();
        chain.pop_back();
        const std::size_t keep = std::min(a, b), drop = std::max(a, b);
        const double h = D(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        raw.push_back({keep, drop, h});
        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k] || k == a || k == b) continue;
            const auto ik = static_cast<Eigen::Index>(k);
            const double v = lance_williams(linkage, D(static_cast<Eigen::Index>(keep), ik), D(static_cast<Eigen::Index>(drop), ik), h,
                                            size[keep], size[drop], size[k]);
            D(static_cast<Eigen::Index>(keep), ik) = D(ik, static_cast<Eigen::Index>(keep)) = v;
        }
        size[keep] += size[drop];
        active[drop] = false;
        --remaining;
    }

    std::stable_sort(raw.begin(), raw.end(), [](const RawMerge& x, const RawMerge& y) { return x.h < y.h; });
    UnionFind uf(n);
    std::vector<std::size_t> node_of(n), count(n, 1);
    std::iota(node_of.begin(), node_of.end(), std::size_t{0});
    std::vector<Merge> merges;
    merges.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const std::size_t ra = uf.find(raw[i].a), rb = uf.find(raw[i].b);
        Merge m;
        m.a = std::min(node_of[ra], node_of[rb]);
        m.b = std::max(node_of[ra], node_of[rb]);
        m.height = raw[i].h;
        m.size = count[ra] + count[rb];
        merges.push_back(m);
        uf.parent[rb] = ra;
        count[ra] = m.size;
        node_of[ra] = n + i;
    }
    return merges;
}

std::vector<int> cut_merges(const std::vector<Merge>& merges, std::size_t n, std::size_t k) {
    if (k < 1 || k > n) throw Error(ErrorCode::TooFewRows, "cluster count out of range");
    // Map every node id to a representative leaf, then union leaves.
    std::vector<std::size_t> leaf_of(n + merges.size());
    std::iota(leaf_of.begin(), leaf_of.begin() + static_cast<std::ptrdiff_t>(n), std::size_t{0});
    UnionFind uf(n);
    for (std::size_t i = 0; i < merges.size(); ++i) {
        const std::size_t la = leaf_of[merges[i].a], lb = leaf_of[merges[i].b];
        leaf_of[n + i] = la;
        if (i < n - k) uf.parent[uf.find(lb)] = uf.find(la);
    }
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(uf.find(i));
    return labels;
}

// ---------------------------------------------------------------------------
// DBSCAN

std::vector<int> dbscan(const Matrix& X, double eps, int min_pts, Metric metric) {
    const auto n = static_cast<std::size_t>(X.rows());
    const Matrix D = pairwise_distances(X, metric);
    std::vector<std::vector<std::size_t>> neighbors(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) <= eps) neighbors[i].push_back(j);
        }
    }
    std::vector<bool> core(n);
    for (std::size_t i = 0; i < n; ++i) core[i] = neighbors[i].size() >= static_cast<std::size_t>(min_pts);
    std::vector<int> labels(n, kNoise);
    int next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!core[i] || labels[i] != kNoise) continue;
        const int id = next++;
        std::vector<std::size_t> frontier{i};
        labels[i] = id;
        while (!frontier.empty()) {
            const std::size_t p = frontier.back();
            frontier.pop_back();
            if (!core[p]) continue;
            for (std::size_t q : neighbors[p]) {
                if (labels[q] != kNoise) continue;
                labels[q] = id;
                if (core[q]) frontier.push_back(q);
            }
        }
    }
    return labels;
}

// ---------------------------------------------------------------------------
// Driver

PreparedData prepare_data(const Dataset& ds, const ClusteringParams& p, const std::vector<std::size_t>* base_rows) {
    validate_params(p, ds.features());
    std::vector<std::size_t> candidates;
    if (base_rows) {
        candidates = *base_rows;
    } else {
        candidates.resize(ds.rows());
        std::iota(candidates.begin(), candidates.end(), std::size_t{0});
    }
    PreparedData out;
    const Selection picked = sample_rows(candidates.size(), p.sample_rate, p.seed);
    out.rows.reserve(picked.size());
    for (auto i : picked.rows()) out.rows.push_back(candidates[i]);

    const auto n = static_cast<Eigen::Index>(out.rows.size());
    const auto d = static_cast<Eigen::Index>(p.feature_subset.size());
    out.X.resize(n, d);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) {
            out.X(r, c) = ds.values()(static_cast<Eigen::Index>(out.rows[static_cast<std::size_t>(r)]),
                                      static_cast<Eigen::Index>(p.feature_subset[static_cast<std::size_t>(c)]));
        }
    }
    if (p.standardize && n > 0) {
        for (Eigen::Index c = 0; c < d; ++c) {
            const double mean = out.X.col(c).mean();
            out.X.col(c).array() -= mean;
            const double sd = std::sqrt(out.X.col(c).squaredNorm() / static_cast<double>(n));
            if (sd > 0) out.X.col(c) /= sd;
        }
    }
    return out;
}

Matrix instance_matrix(const Dataset& ds, const ClusteringInstance& inst) {
    ClusteringParams p = inst.params;
    p.sample_rate = 1.0;
    return prepare_data(ds, p, &inst.rows).X;
}

std::uint64_t params_hash(const ClusteringParams& p) {
    Fnv1a h;
    h.add(static_cast<std::uint64_t>(p.algorithm));
    h.add(static_cast<std::uint64_t>(p.metric));
    // Linkage and k do not influence every algorithm, but they are part of the
    // parameter identity the user sees, so they stay in the key.
    h.add(static_cast<std::uint64_t>(p.linkage));
    h.add(static_cast<std::int64_t>(p.k));
    h.add(p.eps);
    h.add(static_cast<std::int64_t>(p.min_pts));
    h.add(static_cast<std::uint64_t>(p.feature_subset.size()));
    for (auto f : p.feature_subset) h.add(static_cast<std::uint64_t>(f));
    h.add(p.sample_rate);
    h.add(p.seed);
    h.add(static_cast<std::uint64_t>(p.standardize));
    return h.value();
}

std::uint64_t compute_cache_key(std::uint64_t dataset_id, const std::vector<std::size_t>* base_rows,
                                const ClusteringParams& p) {
    Fnv1a h;
    h.add(dataset_id);
    if (base_rows) {
        h.add(static_cast<std::uint64_t>(base_rows->size()));
        for (auto r : *base_rows) h.add(static_cast<std::uint64_t>(r));
    } else {
        h.add(std::string_view("all"));
    }
    h.add(params_hash(p));
    return h.value();
}

namespace {

ClusteringInstance cluster_prepared(const Dataset& ds, PreparedData data, const ClusteringParams& p,
                                    const std::vector<std::size_t>* base_rows) {
    const auto n = static_cast<std::size_t>(data.X.rows());
    if (n == 0) throw Error(ErrorCode::TooFewRows, "no rows to cluster");
    if (p.algorithm == Algorithm::dbscan) {
        if (n < static_cast<std::size_t>(p.min_pts)) throw Error(ErrorCode::TooFewRows, "fewer rows than min_pts");
    } else if (n < static_cast<std::size_t>(p.k)) {
        throw Error(ErrorCode::TooFewRows, "fewer rows than clusters");
    }
    ++g_executions;

    std::vector<int> raw;
    switch (p.algorithm) {
        case Algorithm::kmeans:
            raw = kmeans(data.X, p.k, p.metric, p.seed).labels;
            break;
        case Algorithm::agglomerative: {
            const auto merges = hierarchical_merges(pairwise_distances(data.X, p.metric), p.linkage);
            raw = cut_merges(merges, n, static_cast<std::size_t>(p.k));
            break;
        }
        case Algorithm::dbscan:
            raw = dbscan(data.X, p.eps, p.min_pts, p.metric);
            break;
    }

    ClusteringInstance inst;
    inst.params = p;
    inst.labeling = canonicalize(raw);
    inst.rows = std::move(data.rows);
    inst.dataset_id = ds.fingerprint();
    inst.cache_key = compute_cache_key(inst.dataset_id, base_rows, p);
    const int k = inst.labeling.k_effective;
    inst.centroids = Matrix::Zero(k, data.X.cols());
    std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const int l = inst.labeling.labels[i];
        if (l < 0) continue;
        inst.centroids.row(l) += data.X.row(static_cast<Eigen::Index>(i));
        counts[static_cast<std::size_t>(l)] += 1.0;
    }
    for (int c = 0; c < k; ++c) inst.centroids.row(c) /= counts[static_cast<std::size_t>(c)];
    inst.inertia = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const int l = inst.labeling.labels[i];
        if (l < 0) continue;
        inst.inertia += (data.X.row(static_cast<Eigen::Index>(i)) - inst.centroids.row(l)).squaredNorm();
    }
    return inst;
}

}  // namespace

ClusteringInstance run_clustering(const Dataset& ds, const ClusteringParams& p) {
    return cluster_prepared(ds, prepare_data(ds, p), p, nullptr);
}

ClusteringInstance run_clustering_on_rows(const Dataset& ds, const std::vector<std::size_t>& rows,
                                          const ClusteringParams& p) {
    std::vector<std::size_t> sorted = rows;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (sorted.size() == ds.rows()) return run_clustering(ds, p);
    return cluster_prepared(ds, prepare_data(ds, p, &sorted), p, &sorted);
}

ClusteringInstance isolate_and_recluster(const Dataset& ds, const ClusteringInstance& parent, const Selection& sel,
                                         const ClusteringParams& p2) {
    if (sel.empty()) throw Error(ErrorCode::EmptySelection, "isolation needs at least one row");
    std::vector<std::size_t> parent_rows = parent.rows;
    std::sort(parent_rows.begin(), parent_rows.end());
    for (auto r : sel.rows()) {
        if (!std::binary_search(parent_rows.begin(), parent_rows.end(), r)) {
            throw Error(ErrorCode::InvalidArgument, "selected row " + std::to_string(r) + " is not part of the instance");
        }
    }
    return run_clustering_on_rows(ds, sel.rows(), p2);
}

}  // namespace ctour
