#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ctour {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Ordered, duplicate-free row indices into a Dataset.
class Selection {
public:
    Selection() = default;
    // Sorts and deduplicates.
    explicit Selection(std::vector<std::size_t> rows);
    static Selection all(std::size_t n);

    const std::vector<std::size_t>& rows() const { return rows_; }
    std::size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }
    bool contains(std::size_t row) const;

    bool operator==(const Selection&) const = default;

private:
    std::vector<std::size_t> rows_;
};

class Dataset {
public:
    Dataset(std::vector<std::string> feature_names, std::vector<std::string> row_ids, Matrix values,
            std::size_t dropped_rows = 0, std::vector<std::string> dropped_columns = {});

    const std::vector<std::string>& feature_names() const { return feature_names_; }
    const std::vector<std::string>& row_ids() const { return row_ids_; }
    const Matrix& values() const { return values_; }
    std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
    std::size_t features() const { return static_cast<std::size_t>(values_.cols()); }
    std::size_t dropped_rows() const { return dropped_rows_; }
    const std::vector<std::string>& dropped_columns() const { return dropped_columns_; }

    // Sorted feature indices currently enabled for analysis.
    const std::vector<std::size_t>& enabled_features() const { return enabled_; }
    void set_enabled(std::size_t feature, bool enabled);
    void set_enabled_features(std::vector<std::size_t> features);
    bool is_enabled(std::size_t feature) const;

    // Case-insensitive lookup.
    std::optional<std::size_t> find_feature(std::string_view name) const;

    // Content hash over names, row ids and values.
    std::uint64_t fingerprint() const;

    // Row-restricted copy; enabled features are carried over.
    Dataset subset(const Selection& sel) const;

private:
    std::vector<std::string> feature_names_;
    std::vector<std::string> row_ids_;
    Matrix values_;
    std::vector<std::size_t> enabled_;
    std::size_t dropped_rows_ = 0;
    std::vector<std::string> dropped_columns_;
    std::uint64_t fingerprint_ = 0;
};

// Parses CSV content. The first row is the header; the first non-numeric
// column supplies row ids and other non-numeric columns are dropped. Rows with
// a missing numeric cell are dropped and counted.
Dataset load_csv(std::string_view bytes);

std::string to_csv(const Dataset& ds);

inline constexpr std::size_t kHistogramBins = 20;

struct FeatureStats {
    std::size_t feature = 0;
    std::size_t count = 0;
    double mean = 0, std = 0, min = 0, max = 0;
    double q1 = 0, median = 0, q3 = 0;
    double skewness = 0;
    // Bins span [min, max] of the whole dataset so selection and dataset
    // histograms line up.
    std::vector<std::size_t> histogram;
    double histogram_lo = 0, histogram_hi = 0;
};

// Type-7 quantile (linear interpolation) of an ascending-sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double q);

// Statistics for every feature over the selected rows; an empty optional means
// all rows.
std::vector<FeatureStats> feature_stats(const Dataset& ds, const std::optional<Selection>& sel = std::nullopt);

enum class OutlierFlag { none, high, low };

// Tukey fences at 1.5 IQR. A zero IQR flags nothing.
std::vector<OutlierFlag> detect_outliers(const Dataset& ds, std::size_t feature);

// Uniform sample without replacement of ceil(rate * n) rows, returned in
// ascending order. rate == 1 returns every row.
Selection sample_rows(std::size_t n, double rate, std::uint64_t seed);
Selection sample_rows(const Dataset& ds, double rate, std::uint64_t seed);

// Row count above which sampling is recommended before clustering.
inline constexpr std::size_t kSamplingThreshold = 10000;
inline constexpr double kSuggestedSampleRate = 0.1;

// Suggested sample rate for large datasets, nullopt when none is needed.
std::optional<double> sampling_suggestion(const Dataset& ds);

struct CorrelationPair {
    std::size_t a = 0, b = 0;
    std::string name_a, name_b;
    double r = 0;
};

double pearson(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y);

// The k most correlated pairs of enabled, non-constant features by |r|.
std::vector<CorrelationPair> top_correlations(const Dataset& ds, std::size_t k);

}  // namespace ctour
