#include "attacknet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "attacknet/errors.hpp"

namespace attacknet {

ConfusionMatrix confusion(const std::vector<Label>& preds, const std::vector<Label>& labels) {
    if (preds.size() != labels.size()) {
        throw ShapeError("confusion: preds and labels must have equal length");
    }
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool actual_genuine = labels[i] == Label::Bonafide;
        const bool pred_genuine = preds[i] == Label::Bonafide;
        if (actual_genuine && pred_genuine) ++cm.tp;
        else if (actual_genuine && !pred_genuine) ++cm.fn_;
        else if (!actual_genuine && pred_genuine) ++cm.fp;
        else ++cm.tn;
    }
    return cm;
}

ConfusionMatrix class_swap(const ConfusionMatrix& cm) {
    return ConfusionMatrix{cm.tn, cm.fp, cm.fn_, cm.tp};
}

MetricValue precision(const ConfusionMatrix& cm) {
    const std::size_t denom = cm.tp + cm.fp;
    if (denom == 0) return {0.0, true};
    return {static_cast<double>(cm.tp) / static_cast<double>(denom), false};
}

MetricValue recall(const ConfusionMatrix& cm) {
    const std::size_t denom = cm.tp + cm.fn_;
    if (denom == 0) return {0.0, true};
    return {static_cast<double>(cm.tp) / static_cast<double>(denom), false};
}

MetricValue f1(const ConfusionMatrix& cm) {
    const MetricValue p = precision(cm);
    const MetricValue r = recall(cm);
    if (p.degenerate || r.degenerate || p.value + r.value == 0.0) return {0.0, true};
    return {2.0 * p.value * r.value / (p.value + r.value), false};
}

double far(const ConfusionMatrix& cm) {
    const std::size_t denom = cm.fp + cm.tn;
    if (denom == 0) throw ConfigError("far: no actual-attack samples");
    return static_cast<double>(cm.fp) / static_cast<double>(denom);
}

double frr(const ConfusionMatrix& cm) {
    const std::size_t denom = cm.tp + cm.fn_;
    if (denom == 0) throw ConfigError("frr: no actual-genuine samples");
    return static_cast<double>(cm.fn_) / static_cast<double>(denom);
}

double hter(const ConfusionMatrix& cm) { return (far(cm) + frr(cm)) / 2.0; }

EvalReport eval_report(const ConfusionMatrix& cm) {
    EvalReport rep;
    rep.confusion = cm;
    rep.bonafide = {precision(cm), recall(cm), f1(cm)};
    const ConfusionMatrix sw = class_swap(cm);
    rep.attack = {precision(sw), recall(sw), f1(sw)};
    rep.far = far(cm);
    rep.frr = frr(cm);
    rep.hter = (rep.far + rep.frr) / 2.0;
    return rep;
}

namespace {

std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string fmt_metric(const MetricValue& m) {
    return fmt6(m.value) + (m.degenerate ? "*" : "");
}

}  // namespace

std::string EvalReport::to_text() const {
    std::ostringstream os;
    os << "confusion (rows actual, cols predicted; positive = bonafide)\n";
    os << "             pred-bona  pred-attack\n";
    os << "  bonafide   " << confusion.tp << "  " << confusion.fn_ << "\n";
    os << "  attack     " << confusion.fp << "  " << confusion.tn << "\n";
    os << "class     precision  recall     f1\n";
    os << "bonafide  " << fmt_metric(bonafide.precision) << "   " << fmt_metric(bonafide.recall)
       << "   " << fmt_metric(bonafide.f1) << "\n";
    os << "attack    " << fmt_metric(attack.precision) << "   " << fmt_metric(attack.recall)
       << "   " << fmt_metric(attack.f1) << "\n";
    os << "far," << fmt6(far) << "\n";
    os << "frr," << fmt6(frr) << "\n";
    os << "hter," << fmt6(hter) << "\n";
    return os.str();
}

std::string EvalReport::to_csv() const {
    std::ostringstream os;
    os << "class,precision,recall,f1\n";
    os << "bonafide," << fmt6(bonafide.precision.value) << "," << fmt6(bonafide.recall.value) << ","
       << fmt6(bonafide.f1.value) << "\n";
    os << "attack," << fmt6(attack.precision.value) << "," << fmt6(attack.recall.value) << ","
       << fmt6(attack.f1.value) << "\n";
    os << "far," << fmt6(far) << "\n";
    os << "frr," << fmt6(frr) << "\n";
    os << "hter," << fmt6(hter) << "\n";
    return os.str();
}

RocCurve roc(const std::vector<double>& scores, const std::vector<Label>& labels) {
    if (scores.size() != labels.size()) {
        throw ShapeError("roc: scores and labels must have equal length");
    }
    std::size_t n_pos = 0, n_neg = 0;
    for (Label l : labels) (l == Label::Bonafide ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0) throw ConfigError("roc: need at least one sample of each class");

    // Sweep thresholds from above the max score downward; at each distinct
    // score, everything at or above it is predicted genuine.
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });

    RocCurve curve;
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double t = scores[order[i]];
        while (i < order.size() && scores[order[i]] == t) {
            (labels[order[i]] == Label::Bonafide ? tp : fp)++;
            ++i;
        }
        curve.points.push_back({t, static_cast<double>(fp) / static_cast<double>(n_neg),
                                static_cast<double>(tp) / static_cast<double>(n_pos)});
    }

    double auc = 0.0;
    for (std::size_t k = 1; k < curve.points.size(); ++k) {
        const auto& a = curve.points[k - 1];
        const auto& b = curve.points[k];
        auc += (b.far - a.far) * (a.tpr + b.tpr) / 2.0;
    }
    curve.auc = auc;
    return curve;
}

std::string RocCurve::to_csv() const {
    std::ostringstream os;
    os << "threshold,far,tpr\n";
    char buf[96];
    for (const auto& pt : points) {
        if (std::isinf(pt.threshold)) {
            std::snprintf(buf, sizeof(buf), "inf,%.6f,%.6f\n", pt.far, pt.tpr);
        } else {
            std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f\n", pt.threshold, pt.far, pt.tpr);
        }
        os << buf;
    }
    return os.str();
}

}  // namespace attacknet
