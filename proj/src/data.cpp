#include "ctour/data.hpp"

#include "ctour/error.hpp"
#include "ctour/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ctour {

Selection::Selection(std::vector<std::size_t> rows) : rows_(std::move(rows)) {
    std::sort(rows_.begin(), rows_.end());
    rows_.erase(std::unique(rows_.begin(), rows_.end()), rows_.end());
}

Selection Selection::all(std::size_t n) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return Selection(std::move(rows));
}

bool Selection::contains(std::size_t row) const {
    return std::binary_search(rows_.begin(), rows_.end(), row);
}

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::uint64_t compute_fingerprint(const std::vector<std::string>& names, const std::vector<std::string>& ids,
                                  const Matrix& values) {
    Fnv1a h;
    h.add(static_cast<std::uint64_t>(names.size()));
    for (const auto& n : names) h.add(n);
    h.add(static_cast<std::uint64_t>(ids.size()));
    for (const auto& id : ids) h.add(id);
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) h.add(values(r, c));
    }
    return h.value();
}

}  // namespace

Dataset::Dataset(std::vector<std::string> feature_names, std::vector<std::string> row_ids, Matrix values,
                 std::size_t dropped_rows, std::vector<std::string> dropped_columns)
    : feature_names_(std::move(feature_names)),
      row_ids_(std::move(row_ids)),
      values_(std::move(values)),
      dropped_rows_(dropped_rows),
      dropped_columns_(std::move(dropped_columns)) {
    if (static_cast<std::size_t>(values_.rows()) != row_ids_.size() ||
        static_cast<std::size_t>(values_.cols()) != feature_names_.size()) {
        throw Error(ErrorCode::MalformedInput, "value matrix shape does not match names and row ids");
    }
    std::vector<std::string> seen;
    for (const auto& name : feature_names_) {
        if (name.empty()) throw Error(ErrorCode::MalformedInput, "empty feature name");
        seen.push_back(lower(name));
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
        throw Error(ErrorCode::MalformedInput, "duplicate feature name");
    }
    enabled_.resize(feature_names_.size());
    std::iota(enabled_.begin(), enabled_.end(), std::size_t{0});
    fingerprint_ = compute_fingerprint(feature_names_, row_ids_, values_);
}

void Dataset::set_enabled(std::size_t feature, bool enabled) {
    if (feature >= features()) throw Error(ErrorCode::UnknownFeature, "feature index out of range");
    auto it = std::lower_bound(enabled_.begin(), enabled_.end(), feature);
    const bool present = it != enabled_.end() && *it == feature;
    if (enabled && !present) enabled_.insert(it, feature);
    if (!enabled && present) enabled_.erase(it);
}

void Dataset::set_enabled_features(std::vector<std::size_t> features) {
    for (auto f : features) {
        if (f >= this->features()) throw Error(ErrorCode::UnknownFeature, "feature index out of range");
    }
    std::sort(features.begin(), features.end());
    features.erase(std::unique(features.begin(), features.end()), features.end());
    enabled_ = std::move(features);
}

bool Dataset::is_enabled(std::size_t feature) const {
    return std::binary_search(enabled_.begin(), enabled_.end(), feature);
}

std::optional<std::size_t> Dataset::find_feature(std::string_view name) const {
    const std::string key = lower(name);
    for (std::size_t i = 0; i < feature_names_.size(); ++i) {
        if (lower(feature_names_[i]) == key) return i;
    }
    return std::nullopt;
}

std::uint64_t Dataset::fingerprint() const { return fingerprint_; }

Dataset Dataset::subset(const Selection& sel) const {
    Matrix v(static_cast<Eigen::Index>(sel.size()), values_.cols());
    std::vector<std::string> ids;
    ids.reserve(sel.size());
    for (std::size_t i = 0; i < sel.size(); ++i) {
        const auto r = sel.rows()[i];
        if (r >= rows()) throw Error(ErrorCode::InvalidArgument, "selection row out of range");
        v.row(static_cast<Eigen::Index>(i)) = values_.row(static_cast<Eigen::Index>(r));
        ids.push_back(row_ids_[r]);
    }
    Dataset out(feature_names_, std::move(ids), std::move(v), dropped_rows_, dropped_columns_);
    out.enabled_ = enabled_;
    return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

using Record = std::vector<std::string>;

std::vector<Record> parse_records(std::string_view text) {
    if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
        static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF) {
        text.remove_prefix(3);
    }
    std::vector<Record> records;
    Record current;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t i = 0;
    auto end_record = [&] {
        current.push_back(std::move(field));
        field.clear();
        // A blank line is a record with a single empty field; skip it.
        if (!(current.size() == 1 && current[0].empty() && !field_started)) {
            records.push_back(std::move(current));
        }
        current.clear();
        field_started = false;
    };
    while (i < text.size()) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            ++i;
            continue;
        }
        if (c == '"') {
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            current.push_back(std::move(field));
            field.clear();
            field_started = true;
        } else if (c == '\r' || c == '\n') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            end_record();
        } else {
            field.push_back(c);
            field_started = true;
        }
        ++i;
    }
    if (in_quotes) throw Error(ErrorCode::MalformedInput, "unterminated quoted field");
    if (field_started || !current.empty()) end_record();
    return records;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool is_missing(std::string_view cell) {
    cell = trim(cell);
    if (cell.empty()) return true;
    const std::string l = lower(cell);
    return l == "na" || l == "nan" || l == "null" || l == "?";
}

std::optional<double> parse_number(std::string_view cell) {
    cell = trim(cell);
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    double v = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

}  // namespace

Dataset load_csv(std::string_view bytes) {
    const auto records = parse_records(bytes);
    if (records.empty()) throw Error(ErrorCode::MalformedInput, "no header row");
    const Record& header = records.front();
    const std::size_t cols = header.size();
    if (cols == 0 || std::all_of(header.begin(), header.end(), [](const auto& h) { return trim(h).empty(); })) {
        throw Error(ErrorCode::MalformedInput, "empty header row");
    }
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != cols) {
            throw Error(ErrorCode::MalformedInput, "row " + std::to_string(r) + " has " +
                                                       std::to_string(records[r].size()) + " fields, expected " +
                                                       std::to_string(cols));
        }
    }
    if (records.size() < 2) throw Error(ErrorCode::MalformedInput, "no data rows");

    std::vector<bool> numeric(cols, true);
    for (std::size_t c = 0; c < cols; ++c) {
        bool any_value = false;
        for (std::size_t r = 1; r < records.size() && numeric[c]; ++r) {
            const auto& cell = records[r][c];
            if (is_missing(cell)) continue;
            if (parse_number(cell)) {
                any_value = true;
            } else {
                numeric[c] = false;
            }
        }
        if (!any_value) numeric[c] = false;
    }

    std::vector<std::size_t> feature_cols;
    std::optional<std::size_t> id_col;
    std::vector<std::string> dropped_columns;
    for (std::size_t c = 0; c < cols; ++c) {
        if (numeric[c]) {
            feature_cols.push_back(c);
        } else if (!id_col) {
            id_col = c;
        } else {
            dropped_columns.emplace_back(trim(header[c]));
        }
    }
    if (feature_cols.empty()) throw Error(ErrorCode::MalformedInput, "no numeric columns");

    std::vector<std::string> names;
    for (auto c : feature_cols) {
        const auto name = trim(header[c]);
        if (name.empty()) throw Error(ErrorCode::MalformedInput, "numeric column without a header name");
        names.emplace_back(name);
    }

    std::vector<std::vector<double>> kept;
    std::vector<std::string> ids;
    std::size_t dropped = 0;
    for (std::size_t r = 1; r < records.size(); ++r) {
        std::vector<double> row;
        row.reserve(feature_cols.size());
        bool complete = true;
        for (auto c : feature_cols) {
            auto v = is_missing(records[r][c]) ? std::nullopt : parse_number(records[r][c]);
            if (!v) {
                complete = false;
                break;
            }
            row.push_back(*v);
        }
        if (!complete) {
            ++dropped;
            continue;
        }
        kept.push_back(std::move(row));
        ids.push_back(id_col ? std::string(trim(records[r][*id_col])) : std::to_string(r - 1));
    }
    if (kept.empty()) throw Error(ErrorCode::MalformedInput, "every data row has missing values");

    Matrix values(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(feature_cols.size()));
    for (std::size_t r = 0; r < kept.size(); ++r) {
        for (std::size_t c = 0; c < feature_cols.size(); ++c) {
            values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = kept[r][c];
        }
    }
    return Dataset(std::move(names), std::move(ids), std::move(values), dropped, std::move(dropped_columns));
}

namespace {

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string to_csv(const Dataset& ds) {
    std::ostringstream out;
    out.precision(17);
    out << "id";
    for (const auto& n : ds.feature_names()) out << ',' << csv_escape(n);
    out << '\n';
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        out << csv_escape(ds.row_ids()[r]);
        for (std::size_t c = 0; c < ds.features(); ++c) {
            out << ',' << ds.values()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        }
        out << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Statistics

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw Error(ErrorCode::EmptySelection, "quantile of empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<FeatureStats> feature_stats(const Dataset& ds, const std::optional<Selection>& sel) {
    const Selection rows = sel ? *sel : Selection::all(ds.rows());
    if (rows.empty()) throw Error(ErrorCode::EmptySelection, "selection is empty");
    for (auto r : rows.rows()) {
        if (r >= ds.rows()) throw Error(ErrorCode::InvalidArgument, "selection row out of range");
    }
    std::vector<FeatureStats> out;
    out.reserve(ds.features());
    const auto& v = ds.values();
    for (std::size_t f = 0; f < ds.features(); ++f) {
        const auto col = static_cast<Eigen::Index>(f);
        FeatureStats s;
        s.feature = f;
        std::vector<double> xs;
        xs.reserve(rows.size());
        for (auto r : rows.rows()) xs.push_back(v(static_cast<Eigen::Index>(r), col));
        const double n = static_cast<double>(xs.size());
        s.count = xs.size();
        s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
        double m2 = 0, m3 = 0;
        for (double x : xs) {
            const double d = x - s.mean;
            m2 += d * d;
            m3 += d * d * d;
        }
        m2 /= n;
        m3 /= n;
        s.std = std::sqrt(m2);
        s.skewness = m2 > 0 ? m3 / std::pow(m2, 1.5) : 0.0;
        std::sort(xs.begin(), xs.end());
        s.min = xs.front();
        s.max = xs.back();
        s.q1 = quantile_sorted(xs, 0.25);
        s.median = quantile_sorted(xs, 0.5);
        s.q3 = quantile_sorted(xs, 0.75);

        s.histogram_lo = v.col(col).minCoeff();
        s.histogram_hi = v.col(col).maxCoeff();
        s.histogram.assign(kHistogramBins, 0);
        const double width = (s.histogram_hi - s.histogram_lo) / static_cast<double>(kHistogramBins);
        for (double x : xs) {
            std::size_t bin = 0;
            if (width > 0) {
                bin = static_cast<std::size_t>((x - s.histogram_lo) / width);
                bin = std::min(bin, kHistogramBins - 1);
            }
            ++s.histogram[bin];
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<OutlierFlag> detect_outliers(const Dataset& ds, std::size_t feature) {
    if (feature >= ds.features()) throw Error(ErrorCode::UnknownFeature, "feature index out of range");
    const auto col = ds.values().col(static_cast<Eigen::Index>(feature));
    std::vector<double> xs(col.data(), col.data() + col.size());
    std::sort(xs.begin(), xs.end());
    const double q1 = quantile_sorted(xs, 0.25);
    const double q3 = quantile_sorted(xs, 0.75);
    const double iqr = q3 - q1;
    std::vector<OutlierFlag> flags(ds.rows(), OutlierFlag::none);
    if (!(iqr > 0)) return flags;
    const double hi = q3 + 1.5 * iqr;
    const double lo = q1 - 1.5 * iqr;
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        const double x = col(static_cast<Eigen::Index>(r));
        if (x > hi) flags[r] = OutlierFlag::high;
        else if (x < lo) flags[r] = OutlierFlag::low;
    }
    return flags;
}

Selection sample_rows(std::size_t n, double rate, std::uint64_t seed) {
    if (!(rate > 0.0 && rate <= 1.0)) throw Error(ErrorCode::InvalidRate, "sample rate must be in (0, 1]");
    if (rate == 1.0) return Selection::all(n);
    // The epsilon keeps products such as 0.1 * 10000 from rounding up.
    auto m = static_cast<std::size_t>(std::ceil(rate * static_cast<double>(n) - 1e-9));
    m = std::min(m, n);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(mix_seed(seed, 0x5a3e));
    for (std::size_t i = 0; i < m; ++i) {
        std::swap(idx[i], idx[i + rng.below(n - i)]);
    }
    idx.resize(m);
    return Selection(std::move(idx));
}

Selection sample_rows(const Dataset& ds, double rate, std::uint64_t seed) {
    return sample_rows(ds.rows(), rate, seed);
}

std::optional<double> sampling_suggestion(const Dataset& ds) {
    if (ds.rows() > kSamplingThreshold) return kSuggestedSampleRate;
    return std::nullopt;
}

double pearson(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
    if (x.size() != y.size()) throw Error(ErrorCode::DimensionMismatch, "pearson: length mismatch");
    const Vector dx = x.array() - x.mean();
    const Vector dy = y.array() - y.mean();
    const double sxx = dx.squaredNorm();
    const double syy = dy.squaredNorm();
    if (!(sxx > 0) || !(syy > 0)) throw Error(ErrorCode::DegenerateVector, "pearson: zero variance");
    const double r = dx.dot(dy) / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

std::vector<CorrelationPair> top_correlations(const Dataset& ds, std::size_t k) {
    std::vector<std::size_t> usable;
    for (auto f : ds.enabled_features()) {
        const auto col = ds.values().col(static_cast<Eigen::Index>(f));
        if (col.maxCoeff() > col.minCoeff()) usable.push_back(f);
    }
    std::vector<CorrelationPair> pairs;
    for (std::size_t i = 0; i < usable.size(); ++i) {
        for (std::size_t j = i + 1; j < usable.size(); ++j) {
            CorrelationPair p;
            p.a = usable[i];
            p.b = usable[j];
            p.name_a = ds.feature_names()[p.a];
            p.name_b = ds.feature_names()[p.b];
            if (p.name_b < p.name_a) {
                std::swap(p.a, p.b);
                std::swap(p.name_a, p.name_b);
            }
            p.r = pearson(ds.values().col(static_cast<Eigen::Index>(p.a)),
                          ds.values().col(static_cast<Eigen::Index>(p.b)));
            pairs.push_back(std::move(p));
        }
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const CorrelationPair& x, const CorrelationPair& y) {
        const double ax = std::abs(x.r), ay = std::abs(y.r);
        if (ax != ay) return ax > ay;
        if (x.name_a != y.name_a) return x.name_a < y.name_a;
        return x.name_b < y.name_b;
    });
    if (pairs.size() > k) pairs.resize(k);
    return pairs;
}

}  // namespace ctour
