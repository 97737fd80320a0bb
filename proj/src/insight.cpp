#include "ctour/insight.hpp"

#include "ctour/error.hpp"
#include "ctour/parallel.hpp"
#include "ctour/validation.hpp"

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace ctour {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_number(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

Vector column(const Dataset& ds, std::size_t feature, const std::vector<std::size_t>& rows) {
    Vector v(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = ds.values()(static_cast<Eigen::Index>(rows[i]), static_cast<Eigen::Index>(feature));
    }
    return v;
}

double population_variance(const Vector& v) {
    if (v.size() == 0) return 0;
    return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size());
}

std::vector<std::size_t> all_rows(const Dataset& ds) {
    std::vector<std::size_t> rows(ds.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

void sort_ranking(std::vector<RankedFeature>& r) {
    std::stable_sort(r.begin(), r.end(), [](const RankedFeature& a, const RankedFeature& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.feature < b.feature;
    });
}

double gini(const std::vector<std::size_t>& counts, std::size_t total) {
    if (total == 0) return 0;
    double g = 1.0;
    for (auto c : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        g -= p * p;
    }
    return g;
}

}  // namespace

std::string_view to_string(RankMethod m) {
    switch (m) {
        case RankMethod::variance: return "variance";
        case RankMethod::anova_f: return "anova_f";
        case RankMethod::correlation_filter: return "correlation_filter";
        case RankMethod::pca_loading: return "pca_loading";
    }
    return "?";
}

RankMethod parse_rank_method(std::string_view s) {
    for (auto m : kAllRankMethods) {
        if (to_string(m) == s) return m;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown ranking method '" + std::string(s) + "'");
}

AnovaResult anova(const std::vector<double>& values, const std::vector<int>& labels) {
    if (values.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "values and labels differ in length");
    std::map<int, std::pair<double, std::size_t>> groups;  // sum, count
    double total = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (labels[i] < 0) continue;
        auto& g = groups[labels[i]];
        g.first += values[i];
        ++g.second;
        total += values[i];
        ++n;
    }
    if (groups.size() < 2) throw Error(ErrorCode::SingleCluster, "ANOVA needs at least two groups");
    const double grand = total / static_cast<double>(n);
    double ssb = 0, ssw = 0;
    for (const auto& [label, g] : groups) {
        const double m = g.first / static_cast<double>(g.second);
        ssb += static_cast<double>(g.second) * (m - grand) * (m - grand);
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (labels[i] < 0) continue;
        const auto& g = groups[labels[i]];
        const double d = values[i] - g.first / static_cast<double>(g.second);
        ssw += d * d;
    }
    const double df1 = static_cast<double>(groups.size()) - 1.0;
    const double df2 = static_cast<double>(n) - static_cast<double>(groups.size());
    if (df2 <= 0 || ssw <= 0) {
        return ssb > 0 ? AnovaResult{kInf, 0.0} : AnovaResult{0.0, 1.0};
    }
    AnovaResult r;
    r.f = (ssb / df1) / (ssw / df2);
    r.p_value = boost::math::cdf(boost::math::complement(boost::math::fisher_f(df1, df2), r.f));
    return r;
}

WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) return {};
    auto moments = [](const std::vector<double>& v) {
        const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double ss = 0;
        for (double x : v) ss += (x - m) * (x - m);
        return std::pair{m, ss / (static_cast<double>(v.size()) - 1.0)};
    };
    const auto [ma, va] = moments(a);
    const auto [mb, vb] = moments(b);
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double se2 = va / na + vb / nb;
    if (se2 <= 0) {
        if (ma == mb) return {};
        return {ma > mb ? kInf : -kInf, 0.0};
    }
    WelchResult r;
    r.t = (ma - mb) / std::sqrt(se2);
    const double df = se2 * se2 / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t(df), std::abs(r.t))));
    return r;
}

FeatureRanking rank_features(const Dataset& ds, RankMethod method, const std::vector<int>* labels,
                             const std::vector<std::size_t>& rows_in) {
    const std::vector<std::size_t> rows = rows_in.empty() ? all_rows(ds) : rows_in;
    const auto& features = ds.enabled_features();
    FeatureRanking out;
    out.method = method;
    std::vector<Vector> cols;
    std::vector<double> variances;
    for (auto f : features) {
        cols.push_back(column(ds, f, rows));
        variances.push_back(population_variance(cols.back()));
    }
    auto entry = [&](std::size_t i, double score) {
        RankedFeature r;
        r.feature = features[i];
        r.name = ds.feature_names()[features[i]];
        r.score = score;
        return r;
    };

    switch (method) {
        case RankMethod::variance:
            for (std::size_t i = 0; i < features.size(); ++i) out.ranked.push_back(entry(i, variances[i]));
            break;
        case RankMethod::anova_f: {
            if (!labels) throw Error(ErrorCode::MissingLabels, "anova_f ranking needs cluster labels");
            if (labels->size() != rows.size()) throw Error(ErrorCode::LengthMismatch, "labels do not match the rows");
            for (std::size_t i = 0; i < features.size(); ++i) {
                const std::vector<double> v(cols[i].data(), cols[i].data() + cols[i].size());
                const auto a = anova(v, *labels);
                RankedFeature r = entry(i, a.f);
                r.p_value = a.p_value;
                out.ranked.push_back(r);
            }
            break;
        }
        case RankMethod::correlation_filter: {
            std::vector<std::size_t> order(features.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return variances[a] > variances[b]; });
            std::vector<std::size_t> kept;
            for (std::size_t i : order) {
                if (variances[i] <= 0) {
                    RankedFeature r = entry(i, 0.0);
                    r.kept = false;
                    out.ranked.push_back(r);
                    continue;
                }
                double worst = 0;
                for (std::size_t j : kept) worst = std::max(worst, std::abs(pearson(cols[i], cols[j])));
                RankedFeature r = entry(i, 1.0 - worst);
                r.kept = worst < kRedundantCorrelation;
                if (r.kept) kept.push_back(i);
                out.ranked.push_back(r);
            }
            break;
        }
        case RankMethod::pca_loading: {
            const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
            Matrix Z(n, static_cast<Eigen::Index>(features.size()));
            for (std::size_t i = 0; i < features.size(); ++i) {
                const double sd = std::sqrt(variances[i]);
                const Vector c = cols[i].array() - cols[i].mean();
                Z.col(static_cast<Eigen::Index>(i)) = sd > 0 ? Vector(c / sd) : Vector::Zero(n);
            }
            std::vector<double> loading(features.size(), 0.0);
            if (features.size() > 0 && n > 0) {
                Eigen::SelfAdjointEigenSolver<Matrix> solver(Z.transpose() * Z / static_cast<double>(n));
                const Vector top = solver.eigenvectors().col(static_cast<Eigen::Index>(features.size()) - 1);
                if (solver.eigenvalues().maxCoeff() > 0) {
                    for (std::size_t i = 0; i < features.size(); ++i) loading[i] = std::abs(top(static_cast<Eigen::Index>(i)));
                }
            }
            for (std::size_t i = 0; i < features.size(); ++i) out.ranked.push_back(entry(i, loading[i]));
            break;
        }
    }
    sort_ranking(out.ranked);
    return out;
}

FeatureRanking rank_features(const Dataset& ds, RankMethod method, const ClusteringInstance& inst) {
    return rank_features(ds, method, &inst.labeling.labels, inst.rows);
}

FeatureDendrogram feature_agglomeration(const Dataset& ds) {
    const auto rows = all_rows(ds);
    FeatureDendrogram out;
    std::vector<Vector> cols;
    for (auto f : ds.enabled_features()) {
        Vector c = column(ds, f, rows);
        if (population_variance(c) <= 0) continue;
        out.features.push_back(f);
        out.names.push_back(ds.feature_names()[f]);
        cols.push_back(std::move(c));
    }
    if (cols.size() < 2) throw Error(ErrorCode::TooFewFeatures, "feature agglomeration needs two varying features");
    const Eigen::Index m = static_cast<Eigen::Index>(cols.size());
    Matrix D = Matrix::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = i + 1; j < m; ++j) {
            const double r = pearson(cols[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);
            D(i, j) = D(j, i) = std::clamp(1.0 - std::abs(r), 0.0, 1.0);
        }
    }
    out.merges = hierarchical_merges(D, Linkage::average);
    return out;
}

const AggregateCell& AggregateMatrix::cell(int cluster, std::size_t feature) const {
    const auto c = std::find(clusters.begin(), clusters.end(), cluster);
    if (c == clusters.end()) throw Error(ErrorCode::UnknownCluster, "no cluster " + std::to_string(cluster));
    const auto f = std::find(features.begin(), features.end(), feature);
    if (f == features.end()) throw Error(ErrorCode::UnknownFeature, "feature not in the matrix");
    return cells[static_cast<std::size_t>(c - clusters.begin())][static_cast<std::size_t>(f - features.begin())];
}

AggregateMatrix aggregate_matrix(const Dataset& ds, const ClusteringInstance& inst, std::size_t top_m,
                                 const std::vector<std::size_t>& features) {
    const auto& labels = inst.labeling.labels;
    if (labels.size() != inst.rows.size()) throw Error(ErrorCode::LengthMismatch, "instance labels do not match its rows");
    AggregateMatrix m;
    const int k = inst.labeling.k_effective;
    std::vector<std::size_t> sizes(static_cast<std::size_t>(std::max(k, 0)), 0);
    std::size_t members = 0;
    for (int l : labels) {
        if (l >= 0) {
            ++sizes[static_cast<std::size_t>(l)];
            ++members;
        }
    }
    for (int c = 0; c < k; ++c) m.clusters.push_back(c);
    std::stable_sort(m.clusters.begin(), m.clusters.end(),
                     [&](int a, int b) { return sizes[static_cast<std::size_t>(a)] > sizes[static_cast<std::size_t>(b)]; });
    for (int c : m.clusters) m.cluster_sizes.push_back(sizes[static_cast<std::size_t>(c)]);

    if (!features.empty()) {
        for (auto f : features) {
            if (f >= ds.features()) throw Error(ErrorCode::UnknownFeature, "feature index out of range");
        }
        m.features = features;
    } else {
        const auto ranking = k >= 2 ? rank_features(ds, RankMethod::anova_f, inst) : rank_features(ds, RankMethod::variance, nullptr, inst.rows);
        for (const auto& r : ranking.ranked) {
            if (top_m != 0 && m.features.size() >= top_m) break;
            m.features.push_back(r.feature);
        }
    }
    for (auto f : m.features) m.feature_names.push_back(ds.feature_names()[f]);
    m.cells.assign(m.clusters.size(), std::vector<AggregateCell>(m.features.size()));

    for (std::size_t fi = 0; fi < m.features.size(); ++fi) {
        const Vector v = column(ds, m.features[fi], inst.rows);
        std::vector<std::vector<double>> by_cluster(sizes.size());
        std::vector<double> all_values;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] < 0) continue;
            by_cluster[static_cast<std::size_t>(labels[i])].push_back(v(static_cast<Eigen::Index>(i)));
            all_values.push_back(v(static_cast<Eigen::Index>(i)));
        }
        std::vector<double> means(sizes.size(), 0.0);
        double weighted = 0;
        for (std::size_t c = 0; c < sizes.size(); ++c) {
            means[c] = std::accumulate(by_cluster[c].begin(), by_cluster[c].end(), 0.0) / static_cast<double>(sizes[c]);
            weighted += means[c] * static_cast<double>(sizes[c]);
        }
        // The overall mean as the size-weighted mean of cluster means keeps
        // z exactly 0 for a cluster holding every row.
        const double mean = members > 0 ? weighted / static_cast<double>(members) : 0.0;
        double ss = 0;
        for (double x : all_values) ss += (x - mean) * (x - mean);
        const double sd = members > 0 ? std::sqrt(ss / static_cast<double>(members)) : 0.0;
        m.feature_means.push_back(mean);
        m.feature_stds.push_back(sd);
        if (k >= 2) {
            std::vector<double> vals;
            std::vector<int> labs;
            for (std::size_t i = 0; i < labels.size(); ++i) {
                vals.push_back(v(static_cast<Eigen::Index>(i)));
                labs.push_back(labels[i]);
            }
            m.feature_p_values.push_back(anova(vals, labs).p_value);
        } else {
            m.feature_p_values.push_back(1.0);
        }
        for (std::size_t ci = 0; ci < m.clusters.size(); ++ci) {
            const auto c = static_cast<std::size_t>(m.clusters[ci]);
            AggregateCell& cell = m.cells[ci][fi];
            cell.mean = means[c];
            cell.z = sd > 0 ? std::clamp((means[c] - mean) / sd, -kZClip, kZClip) : 0.0;
            std::vector<double> rest;
            for (std::size_t o = 0; o < sizes.size(); ++o) {
                if (o != c) rest.insert(rest.end(), by_cluster[o].begin(), by_cluster[o].end());
            }
            cell.p_value = welch_t_test(by_cluster[c], rest).p_value;
        }
    }
    return m;
}

std::size_t RuleTree::leaf_of(const Eigen::Ref<const Vector>& x) const {
    std::size_t node = 0;
    while (!nodes[node].leaf) {
        const auto& n = nodes[node];
        node = static_cast<std::size_t>(x(static_cast<Eigen::Index>(n.feature)) <= n.threshold ? n.left : n.right);
    }
    return node;
}

int RuleTree::predict(const Eigen::Ref<const Vector>& x) const { return nodes[leaf_of(x)].prediction; }

RuleTree fit_rule_tree(const Matrix& X, const std::vector<int>& labels, int max_depth,
                       std::vector<std::string> feature_names) {
    if (static_cast<std::size_t>(X.rows()) != labels.size()) throw Error(ErrorCode::LengthMismatch, "labels do not match rows");
    if (max_depth < 1) throw Error(ErrorCode::InvalidArgument, "max_depth must be at least 1");
    if (feature_names.empty()) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) feature_names.push_back("f" + std::to_string(j + 1));
    }
    RuleTree tree;
    tree.feature_names = std::move(feature_names);
    tree.max_depth = max_depth;
    std::set<int> class_set;
    for (int l : labels) {
        if (l >= 0) class_set.insert(l);
    }
    tree.classes.assign(class_set.begin(), class_set.end());
    std::map<int, std::size_t> slot;
    for (std::size_t i = 0; i < tree.classes.size(); ++i) slot[tree.classes[i]] = i;
    const std::size_t nc = tree.classes.size();

    std::vector<std::size_t> root_rows;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= 0) root_rows.push_back(i);
    }
    auto cls = [&](std::size_t row) { return slot[labels[row]]; };

    auto make_leaf = [&](const std::vector<std::size_t>& rows, int depth) {
        RuleTreeNode node;
        node.histogram.assign(nc, 0);
        for (auto r : rows) ++node.histogram[cls(r)];
        node.samples = rows.size();
        node.depth = depth;
        std::size_t best = 0;
        for (std::size_t c = 1; c < nc; ++c) {
            if (node.histogram[c] > node.histogram[best]) best = c;
        }
        node.prediction = nc > 0 ? tree.classes[best] : 0;
        return node;
    };

    auto build = [&](auto&& self, std::vector<std::size_t> rows, int depth) -> int {
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(make_leaf(rows, depth));
        const auto& hist = tree.nodes.back().histogram;
        const double parent = gini(hist, rows.size());
        if (depth >= max_depth || rows.size() < 2 || parent <= 0) return id;

        double best_impurity = parent - 1e-12;
        std::optional<std::pair<std::size_t, double>> best;
        std::vector<std::size_t> order = rows;
        for (Eigen::Index f = 0; f < X.cols(); ++f) {
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return X(static_cast<Eigen::Index>(a), f) < X(static_cast<Eigen::Index>(b), f);
            });
            std::vector<std::size_t> left(nc, 0), right = hist;
            for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                const std::size_t c = cls(order[i]);
                ++left[c];
                --right[c];
                const double lo = X(static_cast<Eigen::Index>(order[i]), f);
                const double hi = X(static_cast<Eigen::Index>(order[i + 1]), f);
                if (!(lo < hi)) continue;
                const double nl = static_cast<double>(i + 1), nr = static_cast<double>(order.size() - i - 1);
                const double impurity = (nl * gini(left, i + 1) + nr * gini(right, order.size() - i - 1)) / (nl + nr);
                if (impurity < best_impurity - 1e-12) {
                    best_impurity = impurity;
                    double t = lo + (hi - lo) / 2.0;
                    if (!(t < hi)) t = lo;
                    best = std::pair{static_cast<std::size_t>(f), t};
                }
            }
        }
        if (!best) return id;
        std::vector<std::size_t> l, r;
        for (auto row : rows) {
            (X(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(best->first)) <= best->second ? l : r).push_back(row);
        }
        const int left_id = self(self, std::move(l), depth + 1);
        const int right_id = self(self, std::move(r), depth + 1);
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.leaf = false;
        node.feature = best->first;
        node.threshold = best->second;
        node.left = left_id;
        node.right = right_id;
        return id;
    };
    build(build, root_rows, 0);

    std::size_t correct = 0;
    for (auto r : root_rows) {
        if (tree.predict(X.row(static_cast<Eigen::Index>(r)).transpose()) == labels[r]) ++correct;
    }
    tree.training_fidelity = root_rows.empty() ? 1.0 : static_cast<double>(correct) / static_cast<double>(root_rows.size());
    return tree;
}

RuleTree fit_rule_tree(const Dataset& ds, const ClusteringInstance& inst, int max_depth) {
    const auto& fs = inst.params.feature_subset;
    Matrix X(static_cast<Eigen::Index>(inst.rows.size()), static_cast<Eigen::Index>(fs.size()));
    std::vector<std::string> names;
    for (std::size_t j = 0; j < fs.size(); ++j) {
        X.col(static_cast<Eigen::Index>(j)) = column(ds, fs[j], inst.rows);
        names.push_back(ds.feature_names()[fs[j]]);
    }
    return fit_rule_tree(X, inst.labeling.labels, max_depth, std::move(names));
}

bool LeafRule::matches(const Eigen::Ref<const Vector>& x) const {
    for (const auto& c : conditions) {
        const double v = x(static_cast<Eigen::Index>(c.feature));
        if (c.less_equal ? !(v <= c.threshold) : !(v > c.threshold)) return false;
    }
    return true;
}

std::vector<LeafRule> leaf_rules(const RuleTree& tree) {
    std::vector<LeafRule> out;
    if (tree.nodes.empty()) return out;
    std::vector<RuleCondition> path;
    auto walk = [&](auto&& self, std::size_t id) -> void {
        const auto& node = tree.nodes[id];
        if (node.leaf) {
            // Keep the tightest bound per feature and side.
            std::map<std::pair<std::size_t, bool>, double> bounds;
            for (const auto& c : path) {
                auto key = std::pair{c.feature, c.less_equal};
                auto it = bounds.find(key);
                if (it == bounds.end()) {
                    bounds.emplace(key, c.threshold);
                } else {
                    it->second = c.less_equal ? std::min(it->second, c.threshold) : std::max(it->second, c.threshold);
                }
            }
            LeafRule rule;
            rule.node = id;
            rule.cluster = node.prediction;
            rule.samples = node.samples;
            for (const auto& [key, t] : bounds) rule.conditions.push_back({key.first, key.second, t});
            // Lower bound before upper bound for the same feature.
            std::stable_sort(rule.conditions.begin(), rule.conditions.end(), [](const RuleCondition& a, const RuleCondition& b) {
                if (a.feature != b.feature) return a.feature < b.feature;
                return !a.less_equal && b.less_equal;
            });
            for (std::size_t i = 0; i < rule.conditions.size(); ++i) {
                const auto& c = rule.conditions[i];
                if (i > 0) rule.text += " and ";
                const std::string name = c.feature < tree.feature_names.size() ? tree.feature_names[c.feature] : "f" + std::to_string(c.feature + 1);
                rule.text += name + (c.less_equal ? " <= " : " > ") + format_number(c.threshold);
            }
            out.push_back(std::move(rule));
            return;
        }
        path.push_back({node.feature, true, node.threshold});
        self(self, static_cast<std::size_t>(node.left));
        path.back().less_equal = false;
        self(self, static_cast<std::size_t>(node.right));
        path.pop_back();
    };
    walk(walk, 0);
    return out;
}

std::vector<ClusterRules> extract_rules(const RuleTree& tree) {
    std::vector<ClusterRules> out;
    if (tree.nodes.empty() || tree.nodes[0].leaf) return out;
    std::map<int, std::vector<LeafRule>> by_cluster;
    for (auto& r : leaf_rules(tree)) by_cluster[r.cluster].push_back(std::move(r));
    for (auto& [cluster, paths] : by_cluster) {
        std::stable_sort(paths.begin(), paths.end(), [](const LeafRule& a, const LeafRule& b) { return a.samples > b.samples; });
        out.push_back({cluster, std::move(paths)});
    }
    return out;
}

std::string describe_cluster(const AggregateMatrix& m, int cluster, const RuleTree* rules, const std::string& name) {
    const auto pos = std::find(m.clusters.begin(), m.clusters.end(), cluster);
    if (pos == m.clusters.end()) throw Error(ErrorCode::UnknownCluster, "no cluster " + std::to_string(cluster));
    const auto ci = static_cast<std::size_t>(pos - m.clusters.begin());
    const std::size_t size = m.cluster_sizes[ci];

    std::vector<std::pair<double, std::size_t>> highs, lows;
    for (std::size_t f = 0; f < m.features.size(); ++f) {
        const double z = m.cells[ci][f].z;
        if (z > kModerateZ) highs.emplace_back(z, f);
        if (z < -kModerateZ) lows.emplace_back(z, f);
    }
    std::stable_sort(highs.begin(), highs.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::stable_sort(lows.begin(), lows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    if (highs.size() > 3) highs.resize(3);
    if (lows.size() > 3) lows.resize(3);

    std::string text = (name.empty() ? "Cluster " + std::to_string(cluster) : name) + " has " + std::to_string(size) +
                       (size == 1 ? " member" : " members");
    std::vector<std::string> parts;
    auto qualifier = [](double z) { return std::abs(z) > kVeryZ ? "very " : "moderately "; };
    for (const auto& [z, f] : highs) parts.push_back(qualifier(z) + std::string("high ") + m.feature_names[f]);
    for (const auto& [z, f] : lows) parts.push_back(qualifier(z) + std::string("low ") + m.feature_names[f]);
    if (parts.empty()) {
        text += "; no distinctive features.";
    } else {
        text += " with ";
        for (std::size_t i = 0; i < parts.size(); ++i) {
            if (i > 0) text += i + 1 == parts.size() ? " and " : ", ";
            text += parts[i];
        }
        text += ".";
    }
    if (rules) {
        for (const auto& cr : extract_rules(*rules)) {
            if (cr.cluster == cluster && !cr.paths.empty()) {
                text += " Typical rule: " + cr.paths.front().text + ".";
                break;
            }
        }
    }
    return text;
}

std::vector<std::string> default_cluster_names(const Dataset& ds, const ClusteringInstance& inst) {
    const int k = inst.labeling.k_effective;
    std::vector<std::string> names(static_cast<std::size_t>(std::max(k, 0)));
    if (k <= 0) return names;
    const Matrix X = instance_matrix(ds, inst);
    Matrix means = Matrix::Zero(k, X.cols());
    std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
    const auto& labels = inst.labeling.labels;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) continue;
        means.row(labels[i]) += X.row(static_cast<Eigen::Index>(i));
        counts[static_cast<std::size_t>(labels[i])] += 1;
    }
    std::vector<double> best(static_cast<std::size_t>(k), kInf);
    for (int c = 0; c < k; ++c) means.row(c) /= counts[static_cast<std::size_t>(c)];
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) continue;
        const auto c = static_cast<std::size_t>(labels[i]);
        const double d = (X.row(static_cast<Eigen::Index>(i)) - means.row(labels[i])).squaredNorm();
        if (d < best[c]) {
            best[c] = d;
            names[c] = ds.row_ids()[inst.rows[i]];
        }
    }
    return names;
}

UncertainPoints uncertain_points(const Matrix& X, const Labeling& labeling, Metric metric) {
    const auto s = silhouette(X, labeling, metric);
    UncertainPoints out;
    out.silhouette = s.per_point;
    std::vector<std::size_t> low;
    for (std::size_t i = 0; i < s.per_point.size(); ++i) {
        out.confidence.push_back((s.per_point[i] + 1.0) / 2.0);
        if (labeling.labels[i] >= 0 && s.per_point[i] < kUncertainSilhouette) low.push_back(i);
    }
    const auto cap = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(s.per_point.size()) - 1e-9));
    if (low.size() > cap) {
        std::stable_sort(low.begin(), low.end(), [&](std::size_t a, std::size_t b) { return s.per_point[a] < s.per_point[b]; });
        low.resize(cap);
    }
    out.flagged = Selection(low);
    return out;
}

std::vector<ClusteringParams> ReassignGrid::expand(const ClusteringParams& base) const {
    std::vector<ClusteringParams> out;
    for (auto a : algorithms) {
        for (auto m : metrics) {
            ClusteringParams p = base;
            p.algorithm = a;
            p.metric = m;
            if (a == Algorithm::agglomerative) {
                for (auto l : linkages) {
                    p.linkage = l;
                    out.push_back(p);
                }
            } else {
                out.push_back(p);
            }
        }
    }
    return out;
}

std::vector<ReassignCandidate> reassignment_search(const Dataset& ds, const ClusteringInstance& current,
                                                   const std::vector<int>& desired, const ReassignGrid& grid) {
    if (desired.size() != current.rows.size()) {
        throw Error(ErrorCode::LengthMismatch, "desired labels do not match the clustered rows");
    }
    const auto params = grid.expand(current.params);
    std::vector<ReassignCandidate> out(params.size());
    parallel_for(params.size(), [&](std::size_t i) {
        out[i].params = params[i];
        ClusteringParams p = params[i];
        p.sample_rate = 1.0;
        try {
            const auto inst = run_clustering_on_rows(ds, current.rows, p);
            out[i].ami = ami(desired, inst.labeling.labels);
        } catch (const Error& e) {
            out[i].error = e.what();
        }
    });
    std::vector<std::size_t> order(out.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (out[a].error.has_value() != out[b].error.has_value()) return !out[a].error.has_value();
        if (out[a].ami != out[b].ami) return out[a].ami > out[b].ami;
        return (out[a].params == current.params) && !(out[b].params == current.params);
    });
    std::vector<ReassignCandidate> sorted;
    for (auto i : order) sorted.push_back(out[i]);
    return sorted;
}

}  // namespace ctour
