#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "eafpmed/errors.hpp"
#include "eafpmed/metrics.hpp"
#include "eafpmed/util.hpp"

namespace eafpmed::metrics {

RocCurve roc_points(std::span<const double> scores, std::span<const int> labels, int positive) {
    if (scores.size() != labels.size()) {
        throw ShapeError("roc: score count " + std::to_string(scores.size()) + " != label count " +
                         std::to_string(labels.size()));
    }
    std::int64_t positives = 0, negatives = 0;
    for (int l : labels) {
        if (l == positive) ++positives; else ++negatives;
    }
    if (positives == 0 || negatives == 0) {
        throw ShapeError("roc: needs at least one positive and one negative sample, got " +
                         std::to_string(positives) + "/" + std::to_string(negatives));
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&scores](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::int64_t tp = 0, fp = 0;
    double auc = 0.0;
    double prev_fpr = 0.0, prev_tpr = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double threshold = scores[order[i]];
        // absorb the whole tie group before emitting a point
        while (i < order.size() && scores[order[i]] == threshold) {
            if (labels[order[i]] == positive) ++tp; else ++fp;
            ++i;
        }
        const double tpr = static_cast<double>(tp) / static_cast<double>(positives);
        const double fpr = static_cast<double>(fp) / static_cast<double>(negatives);
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        curve.points.push_back({threshold, fpr, tpr});
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    // sweep always ends at (1,1); keep a single copy of the endpoint
    if (curve.points.back().fpr != 1.0 || curve.points.back().tpr != 1.0) {
        auc += (1.0 - prev_fpr) * (1.0 + prev_tpr) / 2.0;
        curve.points.push_back({-std::numeric_limits<double>::infinity(), 1.0, 1.0});
    }
    curve.auc = auc;
    return curve;
}

void RocCurve::to_csv(std::ostream& out) const {
    out << "threshold,fpr,tpr\n";
    for (const auto& p : points) {
        out << format_double(p.threshold) << ',' << format_double(p.fpr) << ','
            << format_double(p.tpr) << '\n';
    }
}

}  // namespace eafpmed::metrics
