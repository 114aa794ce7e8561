#include "eafpmed/metrics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "eafpmed/errors.hpp"
#include "eafpmed/util.hpp"

namespace eafpmed::metrics {

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> category_names)
    : k_(static_cast<int>(category_names.size())), names_(std::move(category_names)) {
    if (k_ < 2) throw ShapeError("confusion matrix: needs >= 2 categories, got " + std::to_string(k_));
    counts_.assign(static_cast<std::size_t>(k_) * k_, 0);
}

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> category_names,
                                 std::vector<std::vector<std::int64_t>> counts)
    : ConfusionMatrix(std::move(category_names)) {
    if (static_cast<int>(counts.size()) != k_) {
        throw ShapeError("confusion matrix: " + std::to_string(counts.size()) + " rows for " +
                         std::to_string(k_) + " categories");
    }
    for (int r = 0; r < k_; ++r) {
        if (static_cast<int>(counts[static_cast<std::size_t>(r)].size()) != k_) {
            throw ShapeError("confusion matrix: row " + std::to_string(r) + " has " +
                             std::to_string(counts[static_cast<std::size_t>(r)].size()) +
                             " columns, expected " + std::to_string(k_));
        }
        for (int c = 0; c < k_; ++c) {
            const auto v = counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            if (v < 0) throw ShapeError("confusion matrix: negative count at (" + std::to_string(r) + "," + std::to_string(c) + ")");
            counts_[static_cast<std::size_t>(r) * k_ + c] = v;
        }
    }
}

void ConfusionMatrix::check_index(int index, const char* which) const {
    if (index < 0 || index >= k_) {
        throw ShapeError(std::string("confusion matrix: ") + which + " index " +
                         std::to_string(index) + " outside [0," + std::to_string(k_) + ")");
    }
}

void ConfusionMatrix::accumulate(int actual, int predicted) {
    check_index(actual, "actual");
    check_index(predicted, "predicted");
    ++counts_[static_cast<std::size_t>(actual) * k_ + predicted];
}

std::int64_t ConfusionMatrix::count(int actual, int predicted) const {
    check_index(actual, "actual");
    check_index(predicted, "predicted");
    return counts_[static_cast<std::size_t>(actual) * k_ + predicted];
}

std::int64_t ConfusionMatrix::row_total(int actual) const {
    check_index(actual, "actual");
    std::int64_t s = 0;
    for (int c = 0; c < k_; ++c) s += counts_[static_cast<std::size_t>(actual) * k_ + c];
    return s;
}

std::int64_t ConfusionMatrix::col_total(int predicted) const {
    check_index(predicted, "predicted");
    std::int64_t s = 0;
    for (int r = 0; r < k_; ++r) s += counts_[static_cast<std::size_t>(r) * k_ + predicted];
    return s;
}

std::int64_t ConfusionMatrix::trace() const {
    std::int64_t s = 0;
    for (int i = 0; i < k_; ++i) s += counts_[static_cast<std::size_t>(i) * k_ + i];
    return s;
}

std::int64_t ConfusionMatrix::population() const {
    std::int64_t s = 0;
    for (auto v : counts_) s += v;
    return s;
}

void ConfusionMatrix::to_csv(std::ostream& out) const {
    for (int c = 0; c < k_; ++c) {
        if (c) out << ',';
        out << names_[static_cast<std::size_t>(c)];
    }
    out << '\n';
    for (int r = 0; r < k_; ++r) {
        for (int c = 0; c < k_; ++c) {
            if (c) out << ',';
            out << counts_[static_cast<std::size_t>(r) * k_ + c];
        }
        out << '\n';
    }
}

ConfusionMatrix ConfusionMatrix::from_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("confusion matrix csv: missing header row");
    auto split = [](const std::string& s) {
        std::vector<std::string> fields;
        std::string field;
        std::stringstream ss(s);
        while (std::getline(ss, field, ',')) fields.push_back(trim(field));
        if (!s.empty() && s.back() == ',') fields.emplace_back();
        return fields;
    };
    const auto names = split(line);
    if (names.size() < 2) throw FormatError("confusion matrix csv: header needs >= 2 category names");
    for (const auto& n : names) {
        if (n.empty()) throw FormatError("confusion matrix csv: empty category name in header");
    }

    std::vector<std::vector<std::int64_t>> counts;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto fields = split(line);
        if (fields.size() != names.size()) {
            throw FormatError("confusion matrix csv: row " + std::to_string(counts.size() + 1) +
                              " has " + std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(names.size()));
        }
        std::vector<std::int64_t> row;
        for (const auto& f : fields) {
            try {
                std::size_t used = 0;
                const long long v = std::stoll(f, &used);
                if (used != f.size()) throw std::invalid_argument(f);
                row.push_back(v);
            } catch (const std::exception&) {
                throw FormatError("confusion matrix csv: '" + f + "' is not a count");
            }
        }
        counts.push_back(std::move(row));
    }
    if (counts.size() != names.size()) {
        throw FormatError("confusion matrix csv: " + std::to_string(counts.size()) +
                          " count rows for " + std::to_string(names.size()) + " categories");
    }
    return ConfusionMatrix(names, counts);
}

ConfusionMatrix ConfusionMatrix::from_csv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("confusion matrix csv: cannot open " + path.string());
    return from_csv(in);
}

ClassStats per_class_stats(const ConfusionMatrix& cm, int category) {
    ClassStats s;
    s.tp = cm.count(category, category);
    s.fn = cm.row_total(category) - s.tp;
    s.fp = cm.col_total(category) - s.tp;
    s.tn = cm.population() - s.tp - s.fn - s.fp;
    return s;
}

const std::vector<std::string>& ClassMetrics::metric_names() {
    static const std::vector<std::string> names = {"ACC", "AGF", "AGM", "AUC", "BCD", "BM",
                                                   "CEN", "F1",  "FNR", "FPR", "G",   "MCC",
                                                   "OOC", "PPV", "RACC", "TNR", "TPR"};
    return names;
}

Metric ClassMetrics::by_name(const std::string& name) const {
    if (name == "ACC") return acc;
    if (name == "AGF") return agf;
    if (name == "AGM") return agm;
    if (name == "AUC") return auc;
    if (name == "BCD") return bcd;
    if (name == "BM") return bm;
    if (name == "CEN") return cen;
    if (name == "F1") return f1;
    if (name == "FNR") return fnr;
    if (name == "FPR") return fpr;
    if (name == "G") return g;
    if (name == "MCC") return mcc;
    if (name == "OOC") return ooc;
    if (name == "PPV") return ppv;
    if (name == "RACC") return racc;
    if (name == "TNR") return tnr;
    if (name == "TPR") return tpr;
    throw ShapeError("metrics: unknown metric name " + name);
}

namespace {

Metric ratio(double num, double den) {
    if (den == 0.0) return std::nullopt;
    return num / den;
}

// F-beta from precision and recall; unset when any ingredient is unset or the
// combined denominator vanishes.
Metric f_beta(Metric precision, Metric recall, double beta) {
    if (!precision || !recall) return std::nullopt;
    const double b2 = beta * beta;
    const double den = b2 * *precision + *recall;
    if (den == 0.0) return std::nullopt;
    return (1.0 + b2) * *precision * *recall / den;
}

}  // namespace

ClassMetrics class_metrics(const ClassStats& s, std::int64_t population, int categories) {
    if (population <= 0) throw ShapeError("metrics: population must be positive");
    if (s.population() != population) {
        throw ShapeError("metrics: stats total " + std::to_string(s.population()) +
                         " != population " + std::to_string(population));
    }
    (void)categories;  // only CEN depends on K, and CEN needs the full matrix

    const auto tp = static_cast<double>(s.tp);
    const auto fp = static_cast<double>(s.fp);
    const auto fn = static_cast<double>(s.fn);
    const auto tn = static_cast<double>(s.tn);
    const auto pop = static_cast<double>(population);

    ClassMetrics m;
    m.acc = (tp + tn) / pop;
    m.tpr = ratio(tp, tp + fn);
    m.tnr = ratio(tn, tn + fp);
    m.ppv = ratio(tp, tp + fp);
    m.fnr = m.tpr ? Metric(1.0 - *m.tpr) : std::nullopt;
    m.fpr = m.tnr ? Metric(1.0 - *m.tnr) : std::nullopt;
    m.f1 = f_beta(m.ppv, m.tpr, 1.0);
    if (m.tpr && m.tnr) {
        m.auc = (*m.tpr + *m.tnr) / 2.0;
        m.bm = *m.tpr + *m.tnr - 1.0;
    }
    if (m.ppv && m.tpr) m.g = std::sqrt(*m.ppv * *m.tpr);
    {
        const double den = (tp + fp) * (tp + fn);
        m.ooc = den > 0.0 ? Metric(tp / std::sqrt(den)) : std::nullopt;
    }
    {
        const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
        m.mcc = den > 0.0 ? Metric((tp * tn - fp * fn) / std::sqrt(den)) : std::nullopt;
    }
    m.racc = (tp + fp) * (tp + fn) / (pop * pop);
    m.bcd = std::abs(fp - fn) / (2.0 * pop);
    if (m.tpr && m.tnr) {
        // Negative-class-weighted geometric mean; zero recall pins AGM to 0.
        if (*m.tpr == 0.0) {
            m.agm = 0.0;
        } else {
            const double nn = (tn + fp) / pop;
            m.agm = (std::sqrt(*m.tpr * *m.tnr) + *m.tnr * nn) / (1.0 + nn);
        }
    }
    {
        // Adjusted F-score: sqrt of F2 times the F0.5 of label-swapped stats.
        const Metric f2 = f_beta(m.ppv, m.tpr, 2.0);
        const Metric ppv_sw = ratio(tn, tn + fn);
        const Metric tpr_sw = ratio(tn, tn + fp);
        const Metric inv_f05 = f_beta(ppv_sw, tpr_sw, 0.5);
        if (f2 && inv_f05) m.agf = std::sqrt(*f2 * *inv_f05);
    }
    return m;
}

ClassMetrics class_metrics(const ConfusionMatrix& cm, int category) {
    ClassMetrics m = class_metrics(per_class_stats(cm, category), cm.population(), cm.categories());

    // Confusion entropy: entropy of this category's misclassification mass,
    // log base 2(K-1), cell probabilities normalized by row + column totals.
    const int k = cm.categories();
    const double denom = static_cast<double>(cm.row_total(category) + cm.col_total(category));
    if (denom == 0.0 || k < 2) {
        m.cen = std::nullopt;
        return m;
    }
    const double log_base = std::log(2.0 * (k - 1));
    double cen = 0.0;
    for (int j = 0; j < k; ++j) {
        if (j == category) continue;
        for (const std::int64_t c : {cm.count(category, j), cm.count(j, category)}) {
            if (c == 0) continue;  // 0*log(0) := 0
            const double p = static_cast<double>(c) / denom;
            cen -= p * std::log(p) / log_base;
        }
    }
    m.cen = cen;
    return m;
}

OverallMetrics overall_metrics(const ConfusionMatrix& cm) {
    const std::int64_t pop = cm.population();
    if (pop <= 0) throw ShapeError("metrics: population must be positive");

    OverallMetrics o;
    o.oa = static_cast<double>(cm.trace()) / static_cast<double>(pop);

    double fnr_sum = 0.0, fpr_sum = 0.0, tnr_sum = 0.0;
    int fnr_n = 0, fpr_n = 0, tnr_n = 0;
    for (int k = 0; k < cm.categories(); ++k) {
        const ClassMetrics m = class_metrics(per_class_stats(cm, k), pop, cm.categories());
        if (m.fnr) {
            fnr_sum += *m.fnr;
            ++fnr_n;
        } else {
            o.warnings.push_back("FNR undefined for category " + cm.names()[static_cast<std::size_t>(k)] +
                                 "; excluded from FNR-M");
        }
        if (m.fpr) {
            fpr_sum += *m.fpr;
            ++fpr_n;
        } else {
            o.warnings.push_back("FPR undefined for category " + cm.names()[static_cast<std::size_t>(k)] +
                                 "; excluded from FPR-M");
        }
        if (m.tnr) {
            tnr_sum += *m.tnr;
            ++tnr_n;
        } else {
            o.warnings.push_back("TNR undefined for category " + cm.names()[static_cast<std::size_t>(k)] +
                                 "; excluded from TNR-M");
        }
    }
    if (fnr_n) o.fnr_macro = fnr_sum / fnr_n;
    if (fpr_n) o.fpr_macro = fpr_sum / fpr_n;
    if (tnr_n) o.tnr_macro = tnr_sum / tnr_n;

    // Multiclass Matthews coefficient over the whole matrix.
    const double s = static_cast<double>(pop);
    const double c = static_cast<double>(cm.trace());
    double dot_pt = 0.0, sum_p2 = 0.0, sum_t2 = 0.0;
    for (int k = 0; k < cm.categories(); ++k) {
        const double p = static_cast<double>(cm.col_total(k));
        const double t = static_cast<double>(cm.row_total(k));
        dot_pt += p * t;
        sum_p2 += p * p;
        sum_t2 += t * t;
    }
    const double fac_p = s * s - sum_p2;
    const double fac_t = s * s - sum_t2;
    if (fac_p > 0.0 && fac_t > 0.0) {
        o.om = (c * s - dot_pt) / std::sqrt(fac_p * fac_t);
    } else {
        o.warnings.push_back("OM undefined: a factor under the root is zero");
    }
    return o;
}

MetricReport report(const ConfusionMatrix& cm) {
    MetricReport r;
    r.category_names = cm.names();
    for (int k = 0; k < cm.categories(); ++k) r.per_class.push_back(class_metrics(cm, k));
    r.overall = overall_metrics(cm);
    return r;
}

namespace {

nlohmann::json metric_json(const Metric& m, int decimals) {
    if (!m) return nullptr;
    // round to the rendered precision so emitted reports match the tables
    const double factor = std::pow(10.0, decimals);
    return std::round(*m * factor) / factor;
}

std::string metric_text(const Metric& m, int decimals) {
    return m ? format_fixed(*m, decimals) : std::string("undef");
}

}  // namespace

nlohmann::json MetricReport::to_json() const {
    nlohmann::json per;
    for (std::size_t k = 0; k < per_class.size(); ++k) {
        nlohmann::json row;
        for (const auto& name : ClassMetrics::metric_names()) {
            row[name] = metric_json(per_class[k].by_name(name), 4);
        }
        per[category_names[k]] = row;
    }
    nlohmann::json macro = {
        {"OA_percent", metric_json(overall.oa ? Metric(*overall.oa * 100.0) : overall.oa, 2)},
        {"FNR_M_percent", metric_json(overall.fnr_macro ? Metric(*overall.fnr_macro * 100.0) : overall.fnr_macro, 2)},
        {"FPR_M_percent", metric_json(overall.fpr_macro ? Metric(*overall.fpr_macro * 100.0) : overall.fpr_macro, 2)},
        {"TNR_M_percent", metric_json(overall.tnr_macro ? Metric(*overall.tnr_macro * 100.0) : overall.tnr_macro, 2)},
        {"OM_percent", metric_json(overall.om ? Metric(*overall.om * 100.0) : overall.om, 2)},
    };
    nlohmann::json j = {{"per_class", per}, {"overall", macro}};
    if (!overall.warnings.empty()) j["warnings"] = overall.warnings;
    return j;
}

std::string MetricReport::render_text() const {
    std::string out = "metric";
    for (const auto& n : category_names) out += "\t" + n;
    out += "\n";
    for (const auto& name : ClassMetrics::metric_names()) {
        out += name;
        for (const auto& cm : per_class) out += "\t" + metric_text(cm.by_name(name), 4);
        out += "\n";
    }
    out += "\n";
    auto pct = [](const Metric& m) { return m ? Metric(*m * 100.0) : m; };
    out += "OA(%)\t" + metric_text(pct(overall.oa), 2) + "\n";
    out += "FNR-M(%)\t" + metric_text(pct(overall.fnr_macro), 2) + "\n";
    out += "FPR-M(%)\t" + metric_text(pct(overall.fpr_macro), 2) + "\n";
    out += "TNR-M(%)\t" + metric_text(pct(overall.tnr_macro), 2) + "\n";
    out += "OM(%)\t" + metric_text(pct(overall.om), 2) + "\n";
    for (const auto& w : overall.warnings) out += "warning: " + w + "\n";
    return out;
}

}  // namespace eafpmed::metrics
