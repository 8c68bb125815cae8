#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "attacknet/data_io.hpp"

namespace attacknet {

/// Positive class is Genuine/Bonafide. Rows actual, columns predicted:
/// actual-genuine -> (TP, FN); actual-attack -> (FP, TN).
struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fn_ = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;

    std::size_t total() const { return tp + fn_ + fp + tn; }
};

ConfusionMatrix confusion(const std::vector<Label>& preds, const std::vector<Label>& labels);

/// Swap class roles: tp<->tn, fp<->fn.
ConfusionMatrix class_swap(const ConfusionMatrix& cm);

/// A metric with the zero-denominator convention: value 0 plus a degenerate
/// flag instead of NaN.
struct MetricValue {
    double value = 0.0;
    bool degenerate = false;
};

MetricValue precision(const ConfusionMatrix& cm);  // TP/(TP+FP)
MetricValue recall(const ConfusionMatrix& cm);     // TP/(TP+FN)
MetricValue f1(const ConfusionMatrix& cm);

double far(const ConfusionMatrix& cm);   // FP/(FP+TN); requires FP+TN > 0
double frr(const ConfusionMatrix& cm);   // FN/(TP+FN); requires TP+FN > 0
double hter(const ConfusionMatrix& cm);  // (FAR+FRR)/2

struct ClassMetrics {
    MetricValue precision, recall, f1;
};

struct EvalReport {
    ClassMetrics bonafide;  // positive class = Bonafide
    ClassMetrics attack;    // computed on the swapped matrix
    double far = 0.0;
    double frr = 0.0;
    double hter = 0.0;
    ConfusionMatrix confusion;

    std::string to_text() const;
    /// CSV: class,precision,recall,f1 rows, then far,frr,hter footer.
    std::string to_csv() const;
};

EvalReport eval_report(const ConfusionMatrix& cm);

struct RocPoint {
    double threshold = 0.0;
    double far = 0.0;
    double tpr = 0.0;  // 1 - FRR
};

struct RocCurve {
    std::vector<RocPoint> points;
    double auc = 0.0;

    /// CSV: threshold,far,tpr.
    std::string to_csv() const;
};

/// scores are genuine-class probabilities; predict genuine when score >= t.
RocCurve roc(const std::vector<double>& scores, const std::vector<Label>& labels);

}  // namespace attacknet
