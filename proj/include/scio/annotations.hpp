// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "scio/error.hpp"
#include "scio/heatmap_codec.hpp"
#include "scio/skeleton.hpp"

namespace scio {

/// One person, COCO-style: keypoints are (x, y, v) triples in canvas pixels.
/// Predictions additionally carry a detection score and per-keypoint confidences.
struct AnnotationRecord {
    std::string id;
    std::string skeleton_name;
    std::vector<Keypoint> keypoints;
    std::array<double, 4> bbox{};  // x, y, w, h
    std::optional<double> score;

    friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

using SkeletonResolver = std::function<std::optional<SkeletonSpec>(std::string_view)>;

inline std::optional<SkeletonSpec> resolve_preset(std::string_view name) { return preset_by_name(name); }

/// Padded bounding box of the visible keypoints (10% per side length), as x, y, w, h.
inline std::array<double, 4> keypoint_bbox(std::span<const Keypoint> kps) {
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    for (const auto& k : kps) {
        if (k.visibility == Visibility::Invisible) continue;
        x0 = std::min(x0, k.x), x1 = std::max(x1, k.x);
        y0 = std::min(y0, k.y), y1 = std::max(y1, k.y);
    }
    if (x0 > x1) return {0, 0, 0, 0};
    const double w = std::max(1.0, (x1 - x0) * 1.1), h = std::max(1.0, (y1 - y0) * 1.1);
    return {(x0 + x1 - w) / 2, (y0 + y1 - h) / 2, w, h};
}

inline nlohmann::json to_json(const AnnotationRecord& r) {
    nlohmann::json kps = nlohmann::json::array();
    for (const auto& k : r.keypoints) {
        kps.push_back(k.x);
        kps.push_back(k.y);
        kps.push_back(static_cast<int>(k.visibility));
    }
    nlohmann::json j{{"id", r.id}, {"skeleton", r.skeleton_name}, {"keypoints", kps}, {"bbox", r.bbox}};
    if (r.score) {
        j["score"] = *r.score;
        nlohmann::json conf = nlohmann::json::array();
        for (const auto& k : r.keypoints) conf.push_back(k.confidence);
        j["confidences"] = conf;
    }
    return j;
}

inline void write_annotations(std::ostream& out, std::span<const AnnotationRecord> records) {
    for (const auto& r : records) out << to_json(r).dump() << '\n';
}

inline void write_annotations(const std::filesystem::path& path, std::span<const AnnotationRecord> records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "open", "cannot write " + path.string());
    write_annotations(out, records);
    if (!out) throw Error(ErrorKind::IoError, "write", "failed writing " + path.string());
}

namespace detail {

inline Error invalid(std::size_t line, const char* field, const std::string& msg) {
    return Error(ErrorKind::ValidationError, field, "line " + std::to_string(line) + ": " + msg, line);
}

inline double number_at(const nlohmann::json& a, std::size_t i, std::size_t line, const char* field) {
    if (!a.at(i).is_number()) throw invalid(line, field, std::string(field) + " entries must be numbers");
    const double v = a.at(i).get<double>();
    if (!std::isfinite(v)) throw invalid(line, field, std::string(field) + " entries must be finite");
    return v;
}

inline AnnotationRecord parse_record(const nlohmann::json& j, std::size_t line, const SkeletonResolver& resolve) {
    if (!j.is_object()) throw invalid(line, "record", "record must be a JSON object");
    AnnotationRecord r;
    if (!j.contains("id")) throw invalid(line, "id", "missing id");
    r.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    if (!j.contains("skeleton") || !j["skeleton"].is_string()) throw invalid(line, "skeleton", "missing skeleton name");
    r.skeleton_name = j["skeleton"].get<std::string>();
    const auto spec = resolve(r.skeleton_name);
    if (!spec) throw invalid(line, "skeleton", "unknown skeleton '" + r.skeleton_name + "'");
    const auto k = static_cast<std::size_t>(spec->num_keypoints());

    if (!j.contains("keypoints") || !j["keypoints"].is_array()) throw invalid(line, "keypoints", "missing keypoints");
    const auto& kp = j["keypoints"];
    if (kp.size() != 3 * k)
        throw invalid(line, "keypoints",
                      "expected " + std::to_string(k) + " keypoint triples, got " + std::to_string(kp.size()) + " values");
    std::vector<double> conf(k, 1.0);
    if (j.contains("confidences")) {
        const auto& c = j["confidences"];
        if (!c.is_array() || c.size() != k) throw invalid(line, "confidences", "expected one confidence per keypoint");
        for (std::size_t i = 0; i < k; ++i) conf[i] = number_at(c, i, line, "confidences");
    }
    for (std::size_t i = 0; i < k; ++i) {
        const double x = number_at(kp, 3 * i, line, "keypoints"), y = number_at(kp, 3 * i + 1, line, "keypoints");
        const double v = number_at(kp, 3 * i + 2, line, "keypoints");
        if (v != 0.0 && v != 1.0 && v != 2.0)
            throw invalid(line, "visibility", "visibility must be 0, 1 or 2 (keypoint " + std::to_string(i) + ")");
        r.keypoints.push_back({x, y, conf[i], static_cast<Visibility>(static_cast<int>(v))});
    }
    if (j.contains("bbox")) {
        const auto& b = j["bbox"];
        if (!b.is_array() || b.size() != 4) throw invalid(line, "bbox", "bbox must be [x, y, w, h]");
        for (std::size_t i = 0; i < 4; ++i) r.bbox[i] = number_at(b, i, line, "bbox");
        if (r.bbox[2] < 0 || r.bbox[3] < 0) throw invalid(line, "bbox", "bbox width and height must be >= 0");
    } else {
        r.bbox = keypoint_bbox(r.keypoints);
    }
    if (j.contains("score")) {
        if (!j["score"].is_number()) throw invalid(line, "score", "score must be a number");
        r.score = j["score"].get<double>();
    }
    return r;
}

}  // namespace detail

/// Newline-delimited JSON; blank lines are skipped. Errors carry the 1-based line.
inline std::vector<AnnotationRecord> read_annotations(std::istream& in,
                                                      const SkeletonResolver& resolve = resolve_preset) {
    std::vector<AnnotationRecord> out;
    std::string text;
    for (std::size_t line = 1; std::getline(in, text); ++line) {
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::ParseError, "json", "line " + std::to_string(line) + ": " + e.what(), line);
        }
        out.push_back(detail::parse_record(j, line, resolve));
    }
    return out;
}

inline std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path,
                                                      const SkeletonResolver& resolve = resolve_preset) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "open", "cannot read " + path.string());
    return read_annotations(in, resolve);
}

}  // namespace scio
