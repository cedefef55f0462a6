// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "scio/error.hpp"
#include "scio/heatmap_codec.hpp"
#include "scio/skeleton.hpp"
#include "scio/synth.hpp"

namespace scio {

struct EvalPair {
    std::vector<Keypoint> predicted;
    std::vector<Keypoint> ground_truth;
    double scale = 1.0;  // object scale s
    std::vector<double> k;
    double score = 0.0;  // detection score used for ranking
};

/// Mean predicted confidence, the ranking score for single-person evaluation.
inline double detection_score(std::span<const Keypoint> predicted) {
    if (predicted.empty()) return 0.0;
    double s = 0.0;
    for (const auto& p : predicted) s += p.confidence;
    return s / static_cast<double>(predicted.size());
}

/// Pair with s = object_scale(ground truth) and the skeleton's falloffs.
inline EvalPair make_pair(std::vector<Keypoint> predicted, std::vector<Keypoint> truth, const SkeletonSpec& skeleton) {
    EvalPair p;
    p.scale = object_scale(truth);
    p.score = detection_score(predicted);
    p.predicted = std::move(predicted);
    p.ground_truth = std::move(truth);
    p.k = skeleton.oks_k;
    return p;
}

inline double oks(const EvalPair& p) {
    if (p.predicted.size() != p.ground_truth.size() || p.k.size() != p.ground_truth.size())
        throw Error(ErrorKind::ShapeError, "keypoints", "prediction, truth and k differ in length");
    if (!(p.scale > 0.0)) throw Error(ErrorKind::InvalidArgument, "scale", "object scale must be > 0");
    double num = 0.0;
    int visible = 0;
    for (std::size_t i = 0; i < p.ground_truth.size(); ++i) {
        const auto& g = p.ground_truth[i];
        if (g.visibility == Visibility::Invisible) continue;
        ++visible;
        const double dx = p.predicted[i].x - g.x, dy = p.predicted[i].y - g.y;
        const double d2 = dx * dx + dy * dy;
        num += std::exp(-d2 / (2.0 * p.scale * p.scale * p.k[i] * p.k[i]));
    }
    if (visible == 0) throw Error(ErrorKind::NoVisibleKeypoints, "visibility", "no visible ground-truth keypoint");
    return num / visible;
}

/// OKS thresholds 0.50, 0.55, ..., 0.95.
inline std::vector<double> default_thresholds() {
    std::vector<double> t;
    for (int i = 0; i < 10; ++i) t.push_back((50 + 5 * i) / 100.0);
    return t;
}

struct PrecisionRecall {
    double ap = 0.0;          // area under the interpolated precision-recall curve
    double max_recall = 0.0;  // recall with every prediction accepted
};

/// Single-threshold AP over ranked (score, oks) pairs; every pair has exactly one ground truth.
inline PrecisionRecall precision_recall(std::span<const double> scores, std::span<const double> oks_values,
                                        double threshold) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<double> precision(n), recall(n);
    std::size_t tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (oks_values[order[i]] >= threshold) ++tp;
        precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
        recall[i] = static_cast<double>(tp) / static_cast<double>(n);
    }
    for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
    PrecisionRecall pr;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        pr.ap += (recall[i] - prev_recall) * precision[i];
        prev_recall = recall[i];
    }
    pr.max_recall = n ? recall.back() : 0.0;
    return pr;
}

struct ApSummary {
    double ap = 0.0, ap50 = 0.0, ap75 = 0.0, ar = 0.0;
    std::vector<double> thresholds;
    std::vector<double> ap_at;  // per threshold
};

inline ApSummary average_precision(std::span<const EvalPair> pairs,
                                   std::span<const double> thresholds = default_thresholds()) {
    if (pairs.empty()) throw Error(ErrorKind::EmptyInput, "pairs", "no evaluation pairs");
    if (thresholds.empty()) throw Error(ErrorKind::EmptyInput, "thresholds", "no OKS thresholds");
    std::vector<double> scores, values;
    for (const auto& p : pairs) {
        scores.push_back(p.score);
        values.push_back(oks(p));
    }
    ApSummary s;
    s.thresholds.assign(thresholds.begin(), thresholds.end());
    for (double t : thresholds) {
        const auto pr = precision_recall(scores, values, t);
        s.ap_at.push_back(pr.ap);
        s.ap += pr.ap;
        s.ar += pr.max_recall;
        if (std::abs(t - 0.50) < 1e-9) s.ap50 = pr.ap;
        if (std::abs(t - 0.75) < 1e-9) s.ap75 = pr.ap;
    }
    s.ap /= static_cast<double>(thresholds.size());
    s.ar /= static_cast<double>(thresholds.size());
    return s;
}

struct KeypointStats {
    std::vector<double> mean_error;       // pixels, over visible ground truth
    std::vector<double> mean_confidence;  // predicted confidence
    double base_error = 0.0, terminal_error = 0.0;
    double base_confidence = 0.0, terminal_confidence = 0.0;
};

inline KeypointStats per_keypoint_stats(std::span<const EvalPair> pairs, const SkeletonSpec& skeleton) {
    if (pairs.empty()) throw Error(ErrorKind::EmptyInput, "pairs", "no evaluation pairs");
    const auto k = static_cast<std::size_t>(skeleton.num_keypoints());
    std::vector<double> err(k), conf(k);
    std::vector<std::size_t> err_n(k);
    for (const auto& p : pairs) {
        if (p.predicted.size() != k || p.ground_truth.size() != k)
            throw Error(ErrorKind::SkeletonMismatch, "keypoints", "pair does not match the skeleton");
        for (std::size_t i = 0; i < k; ++i) {
            conf[i] += p.predicted[i].confidence;
            if (p.ground_truth[i].visibility == Visibility::Invisible) continue;
            err[i] += std::hypot(p.predicted[i].x - p.ground_truth[i].x, p.predicted[i].y - p.ground_truth[i].y);
            ++err_n[i];
        }
    }
    KeypointStats s;
    double be = 0, te = 0, bc = 0, tc = 0;
    std::size_t ben = 0, ten = 0, bn = 0, tn = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const bool term = skeleton.is_terminal(static_cast<int>(i));
        (term ? te : be) += err[i];
        (term ? ten : ben) += err_n[i];
        (term ? tc : bc) += conf[i];
        (term ? tn : bn) += pairs.size();
        s.mean_error.push_back(err_n[i] ? err[i] / static_cast<double>(err_n[i]) : 0.0);
        s.mean_confidence.push_back(conf[i] / static_cast<double>(pairs.size()));
    }
    s.base_error = ben ? be / static_cast<double>(ben) : 0.0;
    s.terminal_error = ten ? te / static_cast<double>(ten) : 0.0;
    s.base_confidence = bn ? bc / static_cast<double>(bn) : 0.0;
    s.terminal_confidence = tn ? tc / static_cast<double>(tn) : 0.0;
    return s;
}

struct EvalReport {
    std::string skeleton;
    std::vector<std::string> keypoint_names;
    std::size_t count = 0;
    double ap = 0.0, ap50 = 0.0, ap75 = 0.0, ar = 0.0;
    KeypointStats stats;
};

inline EvalReport evaluate(std::span<const EvalPair> pairs, const SkeletonSpec& skeleton) {
    const auto s = average_precision(pairs);
    return {skeleton.name, skeleton.keypoint_names, pairs.size(), s.ap, s.ap50, s.ap75, s.ar,
            per_keypoint_stats(pairs, skeleton)};
}

inline nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json kps = nlohmann::json::array();
    for (std::size_t i = 0; i < r.keypoint_names.size(); ++i)
        kps.push_back({{"name", r.keypoint_names[i]},
                       {"mean_error", r.stats.mean_error.at(i)},
                       {"mean_confidence", r.stats.mean_confidence.at(i)}});
    return {{"skeleton", r.skeleton},
            {"count", r.count},
            {"AP", r.ap},
            {"AP50", r.ap50},
            {"AP75", r.ap75},
            {"AR", r.ar},
            {"keypoints", kps},
            {"base", {{"mean_error", r.stats.base_error}, {"mean_confidence", r.stats.base_confidence}}},
            {"terminal", {{"mean_error", r.stats.terminal_error}, {"mean_confidence", r.stats.terminal_confidence}}}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    try {
        EvalReport r;
        r.skeleton = j.at("skeleton");
        r.count = j.at("count");
        r.ap = j.at("AP");
        r.ap50 = j.at("AP50");
        r.ap75 = j.at("AP75");
        r.ar = j.at("AR");
        for (const auto& k : j.at("keypoints")) {
            r.keypoint_names.push_back(k.at("name"));
            r.stats.mean_error.push_back(k.at("mean_error"));
            r.stats.mean_confidence.push_back(k.at("mean_confidence"));
        }
        r.stats.base_error = j.at("base").at("mean_error");
        r.stats.base_confidence = j.at("base").at("mean_confidence");
        r.stats.terminal_error = j.at("terminal").at("mean_error");
        r.stats.terminal_confidence = j.at("terminal").at("mean_confidence");
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::FormatError, "report", e.what());
    }
}

/// Per-keypoint table: name, role, mean error, mean confidence.
inline void write_keypoint_csv(std::ostream& out, const EvalReport& r, const SkeletonSpec& skeleton) {
    out << "keypoint,role,mean_error,mean_confidence\n";
    char buf[256];
    for (std::size_t i = 0; i < r.keypoint_names.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%.17g\n", r.keypoint_names[i].c_str(),
                      skeleton.is_terminal(static_cast<int>(i)) ? "terminal" : "base", r.stats.mean_error[i],
                      r.stats.mean_confidence[i]);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "base,aggregate,%.17g,%.17g\nterminal,aggregate,%.17g,%.17g\n", r.stats.base_error,
                  r.stats.base_confidence, r.stats.terminal_error, r.stats.terminal_confidence);
    out << buf;
}

inline void write_report_csv(std::ostream& out, const EvalReport& r) {
    char buf[256];
    out << "metric,value\n";
    for (auto [name, v] : {std::pair{"AP", r.ap}, {"AP50", r.ap50}, {"AP75", r.ap75}, {"AR", r.ar}}) {
        std::snprintf(buf, sizeof buf, "%s,%.17g\n", name, v);
        out << buf;
    }
}

struct DeltaRow {
    std::string metric;
    double a = 0.0, b = 0.0;
    double delta() const noexcept { return b - a; }
};

/// Signed difference, e.g. "+0.032".
inline std::string format_delta(double d, int decimals = 3) {
    char buf[64];
    const double rounded = std::round(d * std::pow(10.0, decimals)) / std::pow(10.0, decimals);
    std::snprintf(buf, sizeof buf, "%+.*f", decimals, rounded == 0.0 ? 0.0 : rounded);
    return buf;
}

/// Rows of b - a for the summary metrics and every keypoint.
inline std::vector<DeltaRow> compare_reports(const EvalReport& a, const EvalReport& b) {
    if (a.skeleton != b.skeleton || a.keypoint_names != b.keypoint_names)
        throw Error(ErrorKind::SkeletonMismatch, "skeleton", "reports use different skeletons");
    std::vector<DeltaRow> rows{{"AP", a.ap, b.ap},
                               {"AP50", a.ap50, b.ap50},
                               {"AP75", a.ap75, b.ap75},
                               {"AR", a.ar, b.ar},
                               {"base.mean_error", a.stats.base_error, b.stats.base_error},
                               {"terminal.mean_error", a.stats.terminal_error, b.stats.terminal_error},
                               {"base.mean_confidence", a.stats.base_confidence, b.stats.base_confidence},
                               {"terminal.mean_confidence", a.stats.terminal_confidence, b.stats.terminal_confidence}};
    for (std::size_t i = 0; i < a.keypoint_names.size(); ++i) {
        rows.push_back({a.keypoint_names[i] + ".mean_error", a.stats.mean_error.at(i), b.stats.mean_error.at(i)});
        rows.push_back(
            {a.keypoint_names[i] + ".mean_confidence", a.stats.mean_confidence.at(i), b.stats.mean_confidence.at(i)});
    }
    return rows;
}

inline void write_delta_table(std::ostream& out, std::span<const DeltaRow> rows) {
    out << "metric,a,b,delta\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%s\n", r.metric.c_str(), r.a, r.b, format_delta(r.delta(), 6).c_str());
        out << buf;
    }
}

}  // namespace scio
