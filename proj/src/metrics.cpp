#include "stressfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stressfuse/errors.hpp"

namespace stressfuse::metrics {

namespace {

void check_binary(std::span<const int> values, const char* what) {
    for (int v : values)
        if (v != 0 && v != 1)
            fail(ErrorKind::invalid_argument,
                 std::string(what) + " must be 0 or 1, got " + std::to_string(v));
}

} // namespace

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels) {
    if (predictions.empty())
        fail(ErrorKind::invalid_argument, "confusion matrix over empty inputs");
    if (predictions.size() != labels.size())
        fail(ErrorKind::dimension_mismatch,
             std::to_string(predictions.size()) + " predictions vs " +
                 std::to_string(labels.size()) + " labels");
    check_binary(predictions, "prediction");
    check_binary(labels, "label");

    ConfusionMatrix cm;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (labels[i] == 1)
            (predictions[i] == 1 ? cm.tp : cm.fn)++;
        else
            (predictions[i] == 1 ? cm.fp : cm.tn)++;
    }
    return cm;
}

ClassificationReport report(const ConfusionMatrix& cm) {
    if (cm.total() == 0)
        fail(ErrorKind::invalid_argument, "report over an empty confusion matrix");

    ClassificationReport r;
    r.cm = cm;
    r.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
    if (cm.tp + cm.fp > 0)
        r.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
    else
        r.precision_degenerate = true;
    if (cm.tp + cm.fn > 0)
        r.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
    else
        r.recall_degenerate = true;
    if (r.precision + r.recall > 0.0)
        r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    else
        r.f1_degenerate = true;
    return r;
}

RocCurve roc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size())
        fail(ErrorKind::dimension_mismatch,
             std::to_string(scores.size()) + " scores vs " + std::to_string(labels.size()) +
                 " labels");
    check_binary(labels, "label");

    std::size_t positives = 0;
    for (int l : labels) positives += static_cast<std::size_t>(l);
    std::size_t negatives = labels.size() - positives;
    if (positives == 0 || negatives == 0)
        fail(ErrorKind::undefined_metric,
             "roc curve needs both classes, got " + std::to_string(positives) +
                 " positives and " + std::to_string(negatives) + " negatives");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.push_back({0.0, 0.0});
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        // Group ties so that a mixed block moves diagonally in one step.
        double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            if (labels[order[i]] == 1)
                ++tp;
            else
                ++fp;
            ++i;
        }
        double tpr = static_cast<double>(tp) / static_cast<double>(positives);
        double fpr = static_cast<double>(fp) / static_cast<double>(negatives);
        double prev_tpr = curve.points.back().tpr;
        double prev_fpr = curve.points.back().fpr;
        curve.auc += (fpr - prev_fpr) * (tpr + prev_tpr) * 0.5;
        curve.points.push_back({fpr, tpr});
    }
    return curve;
}

RegressionReport regression_report(std::span<const double> predictions,
                                   std::span<const double> targets) {
    if (predictions.empty())
        fail(ErrorKind::invalid_argument, "regression report over empty inputs");
    if (predictions.size() != targets.size())
        fail(ErrorKind::dimension_mismatch,
             std::to_string(predictions.size()) + " predictions vs " +
                 std::to_string(targets.size()) + " targets");

    RegressionReport r;
    r.residuals.resize(predictions.size());
    double sq = 0.0;
    std::size_t half = 0;
    std::size_t two = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        double d = targets[i] - predictions[i];
        r.residuals[i] = d;
        sq += d * d;
        if (std::abs(d) <= 0.5) ++half;
        if (std::abs(d) <= 2.0) ++two;
    }
    r.rmse = std::sqrt(sq / static_cast<double>(predictions.size()));
    r.within_half = static_cast<double>(half) / static_cast<double>(predictions.size());
    r.within_two = static_cast<double>(two) / static_cast<double>(predictions.size());
    return r;
}

} // namespace stressfuse::metrics
