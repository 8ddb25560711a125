#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "nids/error.hpp"

namespace nids {

// Binary confusion counts at one threshold. A flow is predicted malicious
// iff score >= threshold.
struct ConfusionMatrix {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double threshold = 0.5;

    std::size_t total() const { return tp + fp + tn + fn; }
    static double ratio(std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; }
    double tpr() const { return ratio(tp, tp + fn); }
    double fnr() const { return ratio(fn, tp + fn); }
    double fpr() const { return ratio(fp, fp + tn); }
    double tnr() const { return ratio(tn, fp + tn); }

    // Row-normalized percentages: rows are the true class (benign, malicious),
    // columns the predicted class (benign, malicious).
    std::array<std::array<double, 2>, 2> percent() const {
        return {{{100.0 * tnr(), 100.0 * fpr()}, {100.0 * fnr(), 100.0 * tpr()}}};
    }

    bool operator==(const ConfusionMatrix&) const = default;
};

inline ConfusionMatrix confusion(std::span<const double> labels, std::span<const double> scores, double threshold) {
    if (labels.size() != scores.size()) throw ShapeError("confusion: labels and scores differ in length");
    if (labels.empty()) throw ConfigError("confusion: empty input");
    ConfusionMatrix m;
    m.threshold = threshold;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool pred = scores[i] >= threshold;
        const bool truth = labels[i] != 0.0;
        if (truth) {
            ++(pred ? m.tp : m.fn);
        } else {
            ++(pred ? m.fp : m.tn);
        }
    }
    return m;
}

struct CurvePoint {
    double threshold;
    double tpr;
    double fpr;
    std::size_t fp;
    std::size_t fn;
};

using ThresholdCurve = std::vector<CurvePoint>;

// One confusion per threshold. Thresholds must be strictly increasing.
inline ThresholdCurve sweep(std::span<const double> labels, std::span<const double> scores,
                            std::span<const double> thresholds) {
    for (std::size_t i = 1; i < thresholds.size(); ++i) {
        if (!(thresholds[i] > thresholds[i - 1])) throw ConfigError("sweep: thresholds must be strictly increasing");
    }
    if (labels.size() != scores.size()) throw ShapeError("sweep: labels and scores differ in length");
    if (labels.empty()) throw ConfigError("sweep: empty input");

    // sort scores per class once, then count with binary search
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] != 0.0 ? pos : neg).push_back(scores[i]);
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    auto at_or_above = [](const std::vector<double>& v, double t) {
        return static_cast<std::size_t>(v.end() - std::lower_bound(v.begin(), v.end(), t));
    };

    ThresholdCurve out;
    out.reserve(thresholds.size());
    for (double t : thresholds) {
        ConfusionMatrix m;
        m.threshold = t;
        m.tp = at_or_above(pos, t);
        m.fn = pos.size() - m.tp;
        m.fp = at_or_above(neg, t);
        m.tn = neg.size() - m.fp;
        out.push_back({t, m.tpr(), m.fpr(), m.fp, m.fn});
    }
    return out;
}

// `count` evenly spaced thresholds covering [lo, hi].
inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
    std::vector<double> t;
    if (count == 0) return t;
    if (count == 1) return {lo};
    for (std::size_t i = 0; i < count; ++i) t.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
    return t;
}

// Distinct observed scores (ascending), i.e. every threshold at which the
// confusion matrix changes.
inline std::vector<double> score_thresholds(std::span<const double> scores) {
    std::vector<double> t(scores.begin(), scores.end());
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

// ---------------------------------------------------------------------------
// Comparison table

struct ComparisonRow {
    std::string technique;
    double tpr;
    double fpr;
    bool cited;  // published reference value, not computed here
};

struct ReferenceResult {
    const char* technique;
    double tpr;
    double fpr;
};

// Published CIC IDS 2017 results used as fixed reference rows.
inline constexpr std::array<ReferenceResult, 14> published_cic_results{{
    {"Hybrid IDS (Decision Tree + Rule-based)", 0.94475, 0.01145},
    {"WISARD", 0.48175, 0.02865},
    {"Forest PA", 0.92920, 0.03550},
    {"J48 Consolidated", 0.92020, 0.06645},
    {"LIBSVM", 0.54595, 0.05130},
    {"FURIA", 0.90500, 0.03165},
    {"Random Forest", 0.93050, 0.01880},
    {"REP Tree", 0.91640, 0.04835},
    {"MLP", 0.77830, 0.07350},
    {"Naive Bayes", 0.82510, 0.33455},
    {"Jrip", 0.93400, 0.04470},
    {"J48", 0.91990, 0.05040},
    {"DNN with IPs", 0.9993, 0.0003},
    {"DNN without IPs", 0.9677, 0.0052},
}};

struct NamedRun {
    std::string name;
    ConfusionMatrix matrix;
};

inline std::vector<ComparisonRow> compare_report(std::span<const NamedRun> runs) {
    if (runs.empty()) throw ConfigError("compare_report: no runs");
    std::vector<ComparisonRow> rows;
    for (const auto& r : runs) rows.push_back({r.name, r.matrix.tpr(), r.matrix.fpr(), false});
    for (const auto& ref : published_cic_results) rows.push_back({ref.technique, ref.tpr, ref.fpr, true});
    return rows;
}

inline std::string format_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// Tab-separated table: technique, TPR, FPR, source (run|cited).
inline std::string comparison_tsv(std::span<const ComparisonRow> rows) {
    std::string s = "technique\ttpr\tfpr\tsource\n";
    for (const auto& r : rows) {
        s += r.technique + "\t" + format_fixed(r.tpr, 5) + "\t" + format_fixed(r.fpr, 5) + "\t" +
             (r.cited ? "cited" : "run") + "\n";
    }
    return s;
}

inline std::string curve_tsv(const ThresholdCurve& c) {
    std::string s = "threshold\ttpr\tfpr\tfp\tfn\n";
    for (const auto& p : c) {
        s += format_fixed(p.threshold, 8) + "\t" + format_fixed(p.tpr, 6) + "\t" + format_fixed(p.fpr, 6) + "\t" +
             std::to_string(p.fp) + "\t" + std::to_string(p.fn) + "\n";
    }
    return s;
}

inline void to_json(nlohmann::json& j, const ConfusionMatrix& m) {
    const auto pct = m.percent();
    j = nlohmann::json{{"threshold", m.threshold},
                       {"tp", m.tp},
                       {"fp", m.fp},
                       {"tn", m.tn},
                       {"fn", m.fn},
                       {"tpr", m.tpr()},
                       {"fpr", m.fpr()},
                       {"tnr", m.tnr()},
                       {"fnr", m.fnr()},
                       {"percent", {{"benign", {pct[0][0], pct[0][1]}}, {"malicious", {pct[1][0], pct[1][1]}}}}};
}

inline void to_json(nlohmann::json& j, const CurvePoint& p) {
    j = nlohmann::json{{"threshold", p.threshold}, {"tpr", p.tpr}, {"fpr", p.fpr}, {"fp", p.fp}, {"fn", p.fn}};
}

inline void to_json(nlohmann::json& j, const ComparisonRow& r) {
    j = nlohmann::json{{"technique", r.technique}, {"tpr", r.tpr}, {"fpr", r.fpr}, {"cited", r.cited}};
}

}  // namespace nids
