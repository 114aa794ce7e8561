#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace eafpmed::metrics {

// K x K count matrix; rows = actual category, columns = predicted category.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::vector<std::string> category_names);
    ConfusionMatrix(std::vector<std::string> category_names,
                    std::vector<std::vector<std::int64_t>> counts);

    int categories() const { return k_; }
    const std::vector<std::string>& names() const { return names_; }

    void accumulate(int actual, int predicted);
    std::int64_t count(int actual, int predicted) const;
    std::int64_t row_total(int actual) const;
    std::int64_t col_total(int predicted) const;
    std::int64_t trace() const;
    std::int64_t population() const;

    void to_csv(std::ostream& out) const;
    static ConfusionMatrix from_csv(std::istream& in);
    static ConfusionMatrix from_csv_file(const std::filesystem::path& path);

private:
    void check_index(int index, const char* which) const;
    int k_;
    std::vector<std::string> names_;
    std::vector<std::int64_t> counts_;  // row-major
};

// One-vs-rest reduction for a single category.
struct ClassStats {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;

    std::int64_t population() const { return tp + fp + fn + tn; }
};

ClassStats per_class_stats(const ConfusionMatrix& cm, int category);

// A metric whose denominator vanished carries no value; such entries are
// excluded from macro means rather than silently zeroed.
using Metric = std::optional<double>;

struct ClassMetrics {
    Metric acc, agf, agm, auc, bcd, bm, cen, f1, fnr, fpr, g, mcc, ooc, ppv, racc, tnr, tpr;

    // Fixed render/report order shared with the table fixtures.
    static const std::vector<std::string>& metric_names();
    Metric by_name(const std::string& name) const;
};

// The 16 stats-derivable metrics; CEN needs the full matrix and stays unset.
ClassMetrics class_metrics(const ClassStats& stats, std::int64_t population, int categories);
// All 17 metrics including CEN for one category of the matrix.
ClassMetrics class_metrics(const ConfusionMatrix& cm, int category);

struct OverallMetrics {
    Metric oa, fnr_macro, fpr_macro, tnr_macro, om;
    std::vector<std::string> warnings;  // undefined per-class rates excluded from macro means
};

OverallMetrics overall_metrics(const ConfusionMatrix& cm);

struct MetricReport {
    std::vector<std::string> category_names;
    std::vector<ClassMetrics> per_class;
    OverallMetrics overall;

    nlohmann::json to_json() const;
    std::string render_text() const;  // raw metrics at 4 decimals, percentages at 2
};

MetricReport report(const ConfusionMatrix& cm);

struct RocPoint {
    double threshold;
    double fpr;
    double tpr;
};

struct RocCurve {
    std::vector<RocPoint> points;  // from (0,0) to (1,1), thresholds descending
    double auc;                    // trapezoidal

    void to_csv(std::ostream& out) const;
};

// One-vs-rest sweep over all distinct score thresholds; tied scores are
// grouped at a single threshold. Requires at least one positive and one
// negative label.
RocCurve roc_points(std::span<const double> scores, std::span<const int> labels, int positive);

}  // namespace eafpmed::metrics
