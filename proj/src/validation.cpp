#include "ctour/validation.hpp"

#include "ctour/error.hpp"
#include "ctour/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace ctour {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Groups {
    std::vector<int> labels;  // -1 for noise, else 0..k-1
    std::vector<std::size_t> sizes;
    std::size_t members = 0;  // non-noise points

    std::size_t k() const { return sizes.size(); }
};

Groups make_groups(const Labeling& l, std::size_t n) {
    if (l.labels.size() != n) throw Error(ErrorCode::LengthMismatch, "labeling length differs from row count");
    Groups g;
    g.labels = l.labels;
    int top = -1;
    for (int x : l.labels) top = std::max(top, x);
    g.sizes.assign(static_cast<std::size_t>(top + 1), 0);
    for (int x : l.labels) {
        if (x >= 0) {
            ++g.sizes[static_cast<std::size_t>(x)];
            ++g.members;
        }
    }
    // Drop empty ids so k counts only populated clusters.
    std::vector<int> remap(g.sizes.size(), -1);
    std::vector<std::size_t> sizes;
    for (std::size_t c = 0; c < g.sizes.size(); ++c) {
        if (g.sizes[c] > 0) {
            remap[c] = static_cast<int>(sizes.size());
            sizes.push_back(g.sizes[c]);
        }
    }
    for (int& x : g.labels) {
        if (x >= 0) x = remap[static_cast<std::size_t>(x)];
    }
    g.sizes = std::move(sizes);
    if (g.k() < 2) throw Error(ErrorCode::SingleCluster, "measure needs at least two clusters");
    return g;
}

template <typename Dist>
SilhouetteResult silhouette_impl(std::size_t n, const Labeling& labeling, Dist&& dist) {
    const Groups g = make_groups(labeling, n);
    SilhouetteResult r;
    r.per_point.assign(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
        const int own = g.labels[i];
        if (own < 0) return;
        if (g.sizes[static_cast<std::size_t>(own)] == 1) return;
        std::vector<double> sums(g.k(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i || g.labels[j] < 0) continue;
            sums[static_cast<std::size_t>(g.labels[j])] += dist(i, j);
        }
        const double a = sums[static_cast<std::size_t>(own)] / static_cast<double>(g.sizes[static_cast<std::size_t>(own)] - 1);
        double b = kInf;
        for (std::size_t c = 0; c < g.k(); ++c) {
            if (static_cast<int>(c) == own) continue;
            b = std::min(b, sums[c] / static_cast<double>(g.sizes[c]));
        }
        const double m = std::max(a, b);
        r.per_point[i] = m > 0 ? std::clamp((b - a) / m, -1.0, 1.0) : 0.0;
    });
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (g.labels[i] >= 0) total += r.per_point[i];
    }
    r.mean = total / static_cast<double>(g.members);
    return r;
}

// Centroids as coordinate means of each cluster.
Matrix cluster_means(const Matrix& X, const Groups& g) {
    Matrix c = Matrix::Zero(static_cast<Eigen::Index>(g.k()), X.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const int l = g.labels[static_cast<std::size_t>(i)];
        if (l >= 0) c.row(l) += X.row(i);
    }
    for (std::size_t k = 0; k < g.k(); ++k) c.row(static_cast<Eigen::Index>(k)) /= static_cast<double>(g.sizes[k]);
    return c;
}

double calinski_harabasz(const Matrix& X, const Groups& g, Metric metric) {
    const Matrix c = cluster_means(X, g);
    Vector overall = Vector::Zero(X.cols());
    for (std::size_t k = 0; k < g.k(); ++k) overall += c.row(static_cast<Eigen::Index>(k)).transpose() * static_cast<double>(g.sizes[k]);
    overall /= static_cast<double>(g.members);
    double between = 0, within = 0;
    for (std::size_t k = 0; k < g.k(); ++k) {
        const double d = metric_distance(c.row(static_cast<Eigen::Index>(k)).transpose(), overall, metric);
        between += static_cast<double>(g.sizes[k]) * d * d;
    }
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const int l = g.labels[static_cast<std::size_t>(i)];
        if (l < 0) continue;
        const double d = metric_distance(X.row(i).transpose(), c.row(l).transpose(), metric);
        within += d * d;
    }
    if (within <= 0) return between > 0 ? kInf : 0.0;
    const double k = static_cast<double>(g.k());
    const double n = static_cast<double>(g.members);
    return (between / (k - 1.0)) / (within / (n - k));
}

double davies_bouldin(const Matrix& X, const Groups& g, Metric metric) {
    const Matrix c = cluster_means(X, g);
    std::vector<double> scatter(g.k(), 0.0);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const int l = g.labels[static_cast<std::size_t>(i)];
        if (l >= 0) scatter[static_cast<std::size_t>(l)] += metric_distance(X.row(i).transpose(), c.row(l).transpose(), metric);
    }
    for (std::size_t k = 0; k < g.k(); ++k) scatter[k] /= static_cast<double>(g.sizes[k]);
    double total = 0;
    for (std::size_t i = 0; i < g.k(); ++i) {
        double worst = 0;
        for (std::size_t j = 0; j < g.k(); ++j) {
            if (i == j) continue;
            const double m = metric_distance(c.row(static_cast<Eigen::Index>(i)).transpose(),
                                             c.row(static_cast<Eigen::Index>(j)).transpose(), metric);
            const double s = scatter[i] + scatter[j];
            const double r = m > 0 ? s / m : (s > 0 ? kInf : 0.0);
            worst = std::max(worst, r);
        }
        total += worst;
    }
    return total / static_cast<double>(g.k());
}

// Scattering plus inter-cluster density, with density counted inside a
// hypersphere of radius equal to the average cluster standard deviation.
double sdbw(const Matrix& X, const Groups& g, Metric metric) {
    const Matrix c = cluster_means(X, g);
    const Eigen::Index d = X.cols();
    Vector overall_mean = Vector::Zero(d);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        if (g.labels[static_cast<std::size_t>(i)] >= 0) overall_mean += X.row(i).transpose();
    }
    overall_mean /= static_cast<double>(g.members);
    Vector overall_var = Vector::Zero(d);
    Matrix cluster_var = Matrix::Zero(static_cast<Eigen::Index>(g.k()), d);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const int l = g.labels[static_cast<std::size_t>(i)];
        if (l < 0) continue;
        overall_var += (X.row(i).transpose() - overall_mean).array().square().matrix();
        cluster_var.row(l) += (X.row(i) - c.row(l)).array().square().matrix();
    }
    overall_var /= static_cast<double>(g.members);
    for (std::size_t k = 0; k < g.k(); ++k) cluster_var.row(static_cast<Eigen::Index>(k)) /= static_cast<double>(g.sizes[k]);

    const double k = static_cast<double>(g.k());
    const double overall_norm = overall_var.norm();
    double scat = 0, norm_sum = 0;
    for (std::size_t i = 0; i < g.k(); ++i) {
        const double nv = cluster_var.row(static_cast<Eigen::Index>(i)).norm();
        norm_sum += nv;
        if (overall_norm > 0) scat += nv / overall_norm;
    }
    scat /= k;
    const double stdev = std::sqrt(norm_sum) / k;

    std::vector<std::vector<std::size_t>> members(g.k());
    for (std::size_t i = 0; i < g.labels.size(); ++i) {
        if (g.labels[i] >= 0) members[static_cast<std::size_t>(g.labels[i])].push_back(i);
    }
    auto density = [&](const Vector& u, std::size_t a, std::size_t b) {
        std::size_t count = 0;
        for (std::size_t cl : {a, b}) {
            for (std::size_t i : members[cl]) {
                if (metric_distance(X.row(static_cast<Eigen::Index>(i)).transpose(), u, metric) <= stdev) ++count;
            }
        }
        return static_cast<double>(count);
    };
    double dens = 0;
    for (std::size_t i = 0; i < g.k(); ++i) {
        for (std::size_t j = 0; j < g.k(); ++j) {
            if (i == j) continue;
            const Vector vi = c.row(static_cast<Eigen::Index>(i)).transpose();
            const Vector vj = c.row(static_cast<Eigen::Index>(j)).transpose();
            const double top = std::max(density(vi, i, j), density(vj, i, j));
            if (top > 0) dens += density((vi + vj) / 2.0, i, j) / top;
        }
    }
    dens /= k * (k - 1.0);
    return scat + dens;
}

// Dense relabeling 0..m-1 in order of first appearance.
std::vector<std::size_t> dense(const std::vector<int>& labels, std::size_t& classes) {
    std::unordered_map<int, std::size_t> ids;
    std::vector<std::size_t> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto [it, inserted] = ids.emplace(labels[i], ids.size());
        out[i] = it->second;
    }
    classes = ids.size();
    return out;
}

struct Contingency {
    std::size_t n = 0;
    std::vector<std::size_t> a, b;  // marginals
    std::vector<std::vector<std::size_t>> table;
};

Contingency contingency(const std::vector<int>& x, const std::vector<int>& y) {
    if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "labelings differ in length");
    if (x.size() < 2) throw Error(ErrorCode::InvalidArgument, "labelings need at least two points");
    std::size_t ka = 0, kb = 0;
    const auto da = dense(x, ka);
    const auto db = dense(y, kb);
    Contingency c;
    c.n = x.size();
    c.a.assign(ka, 0);
    c.b.assign(kb, 0);
    c.table.assign(ka, std::vector<std::size_t>(kb, 0));
    for (std::size_t i = 0; i < x.size(); ++i) {
        ++c.a[da[i]];
        ++c.b[db[i]];
        ++c.table[da[i]][db[i]];
    }
    return c;
}

double entropy(const std::vector<std::size_t>& sizes, std::size_t n) {
    double h = 0;
    for (auto s : sizes) {
        if (s == 0) continue;
        const double p = static_cast<double>(s) / static_cast<double>(n);
        h -= p * std::log(p);
    }
    return h;
}

double comb2(std::size_t x) { return static_cast<double>(x) * (static_cast<double>(x) - 1.0) / 2.0; }

// Min-max normalisation that also copes with infinite entries: -inf maps to
// 0, +inf to 1, and finite values sit between whatever bounds remain.
std::vector<double> normalize(const std::vector<double>& xs) {
    std::vector<double> out(xs.size(), 0.5);
    if (xs.empty()) return out;
    const double lo = *std::min_element(xs.begin(), xs.end());
    const double hi = *std::max_element(xs.begin(), xs.end());
    if (lo == hi) return out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double x = xs[i];
        if (x == kInf) {
            out[i] = 1.0;
        } else if (x == -kInf) {
            out[i] = 0.0;
        } else if (hi == kInf && lo == -kInf) {
            out[i] = 0.5;
        } else if (hi == kInf) {
            out[i] = 0.0;
        } else if (lo == -kInf) {
            out[i] = 1.0;
        } else {
            out[i] = (x - lo) / (hi - lo);
        }
    }
    return out;
}

}  // namespace

MeasureInfo measure_info(MeasureId id) {
    switch (id) {
        case MeasureId::silhouette: return {id, Direction::maximize, OptimumRule::max};
        case MeasureId::calinski_harabasz: return {id, Direction::maximize, OptimumRule::max};
        case MeasureId::davies_bouldin: return {id, Direction::minimize, OptimumRule::min};
        case MeasureId::sdbw: return {id, Direction::minimize, OptimumRule::min};
    }
    return {id, Direction::maximize, OptimumRule::max};
}

std::string_view to_string(MeasureId id) {
    switch (id) {
        case MeasureId::silhouette: return "silhouette";
        case MeasureId::calinski_harabasz: return "calinski_harabasz";
        case MeasureId::davies_bouldin: return "davies_bouldin";
        case MeasureId::sdbw: return "sdbw";
    }
    return "?";
}

MeasureId parse_measure(std::string_view s) {
    for (auto m : kAllMeasures) {
        if (to_string(m) == s) return m;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown measure '" + std::string(s) + "'");
}

std::string_view to_string(Confidence c) { return c == Confidence::high ? "high" : "low"; }

std::string_view to_string(Condition c) {
    switch (c) {
        case Condition::skewed_distributions: return "skewed_distributions";
        case Condition::subclusters: return "subclusters";
        case Condition::varying_density: return "varying_density";
        case Condition::noise: return "noise";
        case Condition::monotonicity: return "monotonicity";
    }
    return "?";
}

ClusterRunner direct_runner(const Dataset& ds) {
    return [&ds](const ClusteringParams& p) { return run_clustering(ds, p); };
}

SilhouetteResult silhouette(const Matrix& X, const Labeling& labeling, Metric metric) {
    const Matrix Xt = X.transpose();
    return silhouette_impl(static_cast<std::size_t>(X.rows()), labeling, [&](std::size_t i, std::size_t j) {
        return metric_distance(Xt.col(static_cast<Eigen::Index>(i)), Xt.col(static_cast<Eigen::Index>(j)), metric);
    });
}

SilhouetteResult silhouette_from_distances(const Matrix& D, const Labeling& labeling) {
    if (D.rows() != D.cols()) throw Error(ErrorCode::DimensionMismatch, "distance matrix must be square");
    return silhouette_impl(static_cast<std::size_t>(D.rows()), labeling, [&](std::size_t i, std::size_t j) {
        return D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    });
}

double internal_measure(const Matrix& X, const Labeling& labeling, MeasureId id, Metric metric) {
    switch (id) {
        case MeasureId::silhouette: return silhouette(X, labeling, metric).mean;
        case MeasureId::calinski_harabasz:
            return calinski_harabasz(X, make_groups(labeling, static_cast<std::size_t>(X.rows())), metric);
        case MeasureId::davies_bouldin:
            return davies_bouldin(X, make_groups(labeling, static_cast<std::size_t>(X.rows())), metric);
        case MeasureId::sdbw: return sdbw(X, make_groups(labeling, static_cast<std::size_t>(X.rows())), metric);
    }
    return kNaN;
}

bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) return false;
    std::unordered_map<int, int> ab, ba;
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto [x, xin] = ab.emplace(a[i], b[i]);
        auto [y, yin] = ba.emplace(b[i], a[i]);
        if (x->second != b[i] || y->second != a[i]) return false;
    }
    return true;
}

double expected_mutual_information(const std::vector<std::size_t>& a_sizes, const std::vector<std::size_t>& b_sizes) {
    const std::size_t n = std::accumulate(a_sizes.begin(), a_sizes.end(), std::size_t{0});
    if (n == 0) return 0.0;
    std::vector<double> lg(n + 2);
    for (std::size_t i = 0; i < lg.size(); ++i) lg[i] = std::lgamma(static_cast<double>(i) + 1.0);  // log(i!)
    const double N = static_cast<double>(n);
    double emi = 0;
    for (auto ai : a_sizes) {
        for (auto bj : b_sizes) {
            if (ai == 0 || bj == 0) continue;
            const std::size_t start = ai + bj > n ? ai + bj - n : 1;
            const std::size_t end = std::min(ai, bj);
            const double fixed = lg[ai] + lg[bj] + lg[n - ai] + lg[n - bj] - lg[n];
            for (std::size_t nij = std::max<std::size_t>(start, 1); nij <= end; ++nij) {
                const double x = static_cast<double>(nij);
                const double term = x / N * std::log(N * x / (static_cast<double>(ai) * static_cast<double>(bj)));
                const double logp = fixed - lg[nij] - lg[ai - nij] - lg[bj - nij] - lg[n - ai - bj + nij];
                emi += term * std::exp(logp);
            }
        }
    }
    return emi;
}

double ami(const std::vector<int>& a, const std::vector<int>& b) {
    const Contingency c = contingency(a, b);
    if (same_partition(a, b)) return 1.0;
    const double N = static_cast<double>(c.n);
    double mi = 0;
    for (std::size_t i = 0; i < c.a.size(); ++i) {
        for (std::size_t j = 0; j < c.b.size(); ++j) {
            const auto nij = c.table[i][j];
            if (nij == 0) continue;
            const double x = static_cast<double>(nij);
            mi += x / N * std::log(N * x / (static_cast<double>(c.a[i]) * static_cast<double>(c.b[j])));
        }
    }
    const double emi = expected_mutual_information(c.a, c.b);
    const double denom = std::max(entropy(c.a, c.n), entropy(c.b, c.n)) - emi;
    if (std::abs(denom) < 1e-12) return 0.0;
    return (mi - emi) / denom;
}

double ari(const std::vector<int>& a, const std::vector<int>& b) {
    const Contingency c = contingency(a, b);
    if (same_partition(a, b)) return 1.0;
    double index = 0, sa = 0, sb = 0;
    for (const auto& row : c.table) {
        for (auto v : row) index += comb2(v);
    }
    for (auto v : c.a) sa += comb2(v);
    for (auto v : c.b) sb += comb2(v);
    const double expected = sa * sb / comb2(c.n);
    const double max_index = (sa + sb) / 2.0;
    const double denom = max_index - expected;
    if (std::abs(denom) < 1e-12) return 0.0;
    return (index - expected) / denom;
}

double ami(const Labeling& a, const Labeling& b) { return ami(a.labels, b.labels); }
double ari(const Labeling& a, const Labeling& b) { return ari(a.labels, b.labels); }

std::size_t elbow_index(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw Error(ErrorCode::LengthMismatch, "curve coordinates differ in length");
    if (xs.empty()) throw Error(ErrorCode::InvalidArgument, "empty curve");
    if (xs.size() < 3) return 0;
    auto scaled = [](const std::vector<double>& v) {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        std::vector<double> out(v.size(), 0.0);
        if (*hi > *lo) {
            for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / (*hi - *lo);
        }
        return out;
    };
    const auto x = scaled(xs);
    const auto y = scaled(ys);
    const double dx = x.back() - x.front(), dy = y.back() - y.front();
    const double len = std::hypot(dx, dy);
    std::size_t best = 0;
    double best_d = -1;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = len > 0 ? std::abs(dy * (x[i] - x.front()) - dx * (y[i] - y.front())) / len : 0.0;
        if (d > best_d + 1e-12) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

KScan k_scan(const Dataset& ds, const ClusteringParams& base, const std::vector<int>& k_values,
             const std::vector<MeasureId>& measures, const ClusterRunner& runner) {
    if (base.algorithm == Algorithm::dbscan) throw Error(ErrorCode::NotApplicable, "dbscan has no k to scan");
    std::vector<int> ks = k_values;
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    if (ks.empty() || ks.size() > kMaxScanValues) {
        throw Error(ErrorCode::InvalidArgument, "k range must hold between 1 and 32 values");
    }
    const int n = static_cast<int>(ds.rows());
    if (ks.front() < 2 || ks.back() > n - 1) {
        throw Error(ErrorCode::InvalidArgument, "k range must lie within [2, " + std::to_string(n - 1) + "]");
    }
    std::vector<MeasureId> wanted;
    for (auto m : measures.empty() ? std::vector<MeasureId>{MeasureId::silhouette} : measures) {
        if (std::find(wanted.begin(), wanted.end(), m) == wanted.end()) wanted.push_back(m);
    }
    const ClusterRunner run = runner ? runner : direct_runner(ds);

    std::vector<ClusteringInstance> instances(ks.size());
    parallel_for(ks.size(), [&](std::size_t i) {
        ClusteringParams p = base;
        p.k = ks[i];
        instances[i] = run(p);
    });

    KScan scan;
    scan.k_values = ks;
    std::vector<MeasureId> computed = wanted;
    if (std::find(computed.begin(), computed.end(), MeasureId::silhouette) == computed.end()) {
        computed.push_back(MeasureId::silhouette);
    }
    for (auto m : computed) scan.scores[m].assign(ks.size(), kNaN);
    scan.inertia.resize(ks.size());
    for (std::size_t i = 0; i < ks.size(); ++i) {
        const auto& inst = instances[i];
        scan.inertia[i] = inst.inertia;
        if (inst.labeling.k_effective < 2) continue;
        const Matrix X = instance_matrix(ds, inst);
        for (auto m : computed) scan.scores[m][i] = internal_measure(X, inst.labeling, m, inst.params.metric);
    }
    for (auto m : computed) {
        const auto& s = scan.scores[m];
        const bool maximize = measure_info(m).direction == Direction::maximize;
        std::optional<std::size_t> best;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (std::isnan(s[i])) continue;
            if (!best || (maximize ? s[i] > s[*best] : s[i] < s[*best])) best = i;
        }
        scan.suggestions[m] = ks[best.value_or(0)];
    }
    {
        std::vector<double> xs(ks.begin(), ks.end());
        scan.elbow_k = ks[elbow_index(xs, scan.inertia)];
    }
    scan.suggested_k = scan.suggestions[wanted.front()];
    double best_sil = -kInf;
    for (double v : scan.scores[MeasureId::silhouette]) {
        if (!std::isnan(v)) best_sil = std::max(best_sil, v);
    }
    scan.best_silhouette = std::isfinite(best_sil) ? best_sil : 0.0;
    scan.confidence = scan.best_silhouette < kLowConfidenceSilhouette ? Confidence::low : Confidence::high;
    // Measures that were only computed for the confidence call stay out of the result.
    for (auto m : computed) {
        if (std::find(wanted.begin(), wanted.end(), m) == wanted.end()) {
            scan.scores.erase(m);
            scan.suggestions.erase(m);
        }
    }
    return scan;
}

bool Conditions::get(Condition c) const {
    switch (c) {
        case Condition::skewed_distributions: return skewed_distributions;
        case Condition::subclusters: return subclusters;
        case Condition::varying_density: return varying_density;
        case Condition::noise: return noise;
        case Condition::monotonicity: return monotonicity;
    }
    return false;
}

void Conditions::set(Condition c, bool value) {
    switch (c) {
        case Condition::skewed_distributions: skewed_distributions = value; break;
        case Condition::subclusters: subclusters = value; break;
        case Condition::varying_density: varying_density = value; break;
        case Condition::noise: noise = value; break;
        case Condition::monotonicity: monotonicity = value; break;
    }
}

bool measure_fails(MeasureId id, Condition c) {
    switch (id) {
        case MeasureId::silhouette: return c == Condition::subclusters;
        case MeasureId::calinski_harabasz: return c == Condition::noise;
        case MeasureId::davies_bouldin: return c == Condition::subclusters;
        case MeasureId::sdbw: return false;
    }
    return false;
}

namespace {
constexpr std::size_t kMinSubclusterSize = 10;
}

Conditions detect_conditions(const Dataset& ds, const ClusteringInstance& inst) {
    Conditions c;
    for (const auto& s : feature_stats(ds, Selection(inst.rows))) {
        if (ds.is_enabled(s.feature) && std::abs(s.skewness) > kSkewThreshold) c.skewed_distributions = true;
    }
    if (inst.labeling.k_effective < 1) return c;
    const Matrix X = instance_matrix(ds, inst);
    const Matrix Xt = X.transpose();
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(inst.labeling.k_effective));
    for (std::size_t i = 0; i < inst.labeling.labels.size(); ++i) {
        const int l = inst.labeling.labels[i];
        if (l >= 0) members[static_cast<std::size_t>(l)].push_back(i);
    }

    std::vector<double> spreads;
    for (const auto& m : members) {
        if (m.size() < 2) continue;
        double total = 0;
        for (std::size_t a = 0; a < m.size(); ++a) {
            for (std::size_t b = a + 1; b < m.size(); ++b) {
                total += metric_distance(Xt.col(static_cast<Eigen::Index>(m[a])), Xt.col(static_cast<Eigen::Index>(m[b])),
                                         inst.params.metric);
            }
        }
        spreads.push_back(total / comb2(m.size()));
    }
    if (spreads.size() >= 2) {
        const auto [lo, hi] = std::minmax_element(spreads.begin(), spreads.end());
        c.varying_density = *lo > 0 ? *hi / *lo > kDensityRatioThreshold : *hi > 0;
    }

    for (const auto& m : members) {
        if (m.size() < kMinSubclusterSize) continue;
        Matrix sub(static_cast<Eigen::Index>(m.size()), X.cols());
        for (std::size_t i = 0; i < m.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(m[i]));
        const auto km = kmeans(sub, 2, inst.params.metric, inst.params.seed);
        const Labeling split = canonicalize(km.labels);
        if (split.k_effective < 2) continue;
        if (silhouette(sub, split, inst.params.metric).mean > kSubclusterSilhouette) {
            c.subclusters = true;
            break;
        }
    }
    return c;
}

std::vector<MeasureId> suitable_measures(const Conditions& detected, const Conditions& prefs) {
    std::vector<MeasureId> out;
    for (auto m : kAllMeasures) {
        bool ok = true;
        for (auto c : kAllConditions) {
            if ((detected.get(c) || prefs.get(c)) && measure_fails(m, c)) ok = false;
        }
        if (ok) out.push_back(m);
    }
    return out;
}

std::optional<InternalScores> internal_scores(const Dataset& ds, const ClusteringInstance& inst) {
    if (inst.labeling.k_effective < 2) return std::nullopt;
    const Matrix X = instance_matrix(ds, inst);
    const Groups g = make_groups(inst.labeling, static_cast<std::size_t>(X.rows()));
    InternalScores s;
    s.silhouette = silhouette(X, inst.labeling, inst.params.metric).mean;
    s.davies_bouldin = davies_bouldin(X, g, inst.params.metric);
    s.calinski_harabasz = calinski_harabasz(X, g, inst.params.metric);
    return s;
}

std::vector<double> combined_score(const std::vector<std::optional<InternalScores>>& scores) {
    std::vector<std::size_t> valid;
    std::vector<double> sil, db, ch;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!scores[i]) continue;
        valid.push_back(i);
        sil.push_back(scores[i]->silhouette);
        db.push_back(-scores[i]->davies_bouldin);
        ch.push_back(scores[i]->calinski_harabasz);
    }
    std::vector<double> out(scores.size(), 0.0);
    const auto ns = normalize(sil), nd = normalize(db), nc = normalize(ch);
    for (std::size_t v = 0; v < valid.size(); ++v) out[valid[v]] = (ns[v] + nd[v] + nc[v]) / 3.0;
    return out;
}

std::vector<double> combined_score(const Dataset& ds, const std::vector<ClusteringInstance>& candidates) {
    std::vector<std::optional<InternalScores>> scores(candidates.size());
    parallel_for(candidates.size(), [&](std::size_t i) { scores[i] = internal_scores(ds, candidates[i]); });
    return combined_score(scores);
}

ParameterSuggestion suggest_parameter(const Dataset& ds, const ClusteringInstance& inst, SuggestKind kind,
                                      const ClusterRunner& runner) {
    std::vector<ClusteringParams> variants;
    std::vector<std::string> names;
    if (kind == SuggestKind::linkage) {
        if (inst.params.algorithm != Algorithm::agglomerative) {
            throw Error(ErrorCode::NotApplicable, "linkage only applies to agglomerative clustering");
        }
        for (auto l : kAllLinkages) {
            ClusteringParams p = inst.params;
            p.linkage = l;
            variants.push_back(p);
            names.emplace_back(to_string(l));
        }
    } else {
        for (auto m : kAllMetrics) {
            ClusteringParams p = inst.params;
            p.metric = m;
            variants.push_back(p);
            names.emplace_back(to_string(m));
        }
    }
    const ClusterRunner run = runner ? runner : direct_runner(ds);
    const std::size_t features = inst.params.feature_subset.size();
    std::vector<std::optional<ClusteringInstance>> runs(variants.size());
    std::vector<std::optional<std::string>> errors(variants.size());
    parallel_for(variants.size(), [&](std::size_t i) {
        const std::size_t needed = min_features(variants[i].metric);
        if (features < needed) {
            errors[i] = std::string(to_string(variants[i].metric)) + " needs at least " + std::to_string(needed) + " features";
            return;
        }
        try {
            runs[i] = run(variants[i]);
            if (runs[i]->labeling.k_effective < 2) errors[i] = "fewer than two clusters";
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    });
    // Candidates that reproduce an earlier candidate's partition share its score.
    std::vector<std::optional<InternalScores>> scores(variants.size());
    std::vector<std::optional<std::size_t>> same_as(variants.size());
    for (std::size_t i = 0; i < variants.size(); ++i) {
        if (errors[i]) continue;
        for (std::size_t j = 0; j < i && !same_as[i]; ++j) {
            if (!errors[j] && runs[j]->rows == runs[i]->rows && same_partition(runs[j]->labeling.labels, runs[i]->labeling.labels)) {
                same_as[i] = same_as[j].value_or(j);
            }
        }
    }
    parallel_for(variants.size(), [&](std::size_t i) {
        if (!errors[i] && !same_as[i]) scores[i] = internal_scores(ds, *runs[i]);
    });
    for (std::size_t i = 0; i < variants.size(); ++i) {
        if (same_as[i]) scores[i] = scores[*same_as[i]];
    }
    const auto combined = combined_score(scores);
    ParameterSuggestion out{kind, {}, {}};
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < variants.size(); ++i) {
        out.candidates.push_back({names[i], combined[i], errors[i]});
        if (!errors[i] && (!best || combined[i] > combined[*best])) best = i;
    }
    if (!best) throw Error(ErrorCode::NoViableCandidate, "no candidate value produced a valid clustering");
    out.best = names[*best];
    return out;
}

double score_projection(const Embedding& e, const Labeling& labeling) {
    return silhouette(e.coords, labeling, Metric::euclidean).mean;
}

}  // namespace ctour
