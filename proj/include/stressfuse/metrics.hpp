#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace stressfuse::metrics {

struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
    bool operator==(const ConfusionMatrix&) const = default;
};

/// Positive class is 1 (stressed). Inputs must be binary.
ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels);

struct ClassificationReport {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    // Zero-denominator metrics report 0 with the flag set instead of NaN.
    bool precision_degenerate = false;
    bool recall_degenerate = false;
    bool f1_degenerate = false;
    ConfusionMatrix cm;
};

ClassificationReport report(const ConfusionMatrix& cm);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points; // starts at (0,0), ends at (1,1)
    double auc = 0.0;
};

/// Threshold sweep over distinct scores, descending; tied scores grouped so
/// ties appear as diagonal segments. AUC by the trapezoidal rule. Requires
/// both classes present.
RocCurve roc(std::span<const double> scores, std::span<const int> labels);

struct RegressionReport {
    double rmse = 0.0;
    std::vector<double> residuals;  // target - prediction
    double within_half = 0.0;       // fraction with |residual| <= 0.5
    double within_two = 0.0;        // fraction with |residual| <= 2.0
};

RegressionReport regression_report(std::span<const double> predictions,
                                   std::span<const double> targets);

} // namespace stressfuse::metrics
