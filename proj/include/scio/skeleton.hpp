// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstddef>
#include <iomanip>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scio/error.hpp"

namespace scio {

/// Four keypoints of one body part: three base keypoints ordered from the
/// torso outward (A, B, C) and the terminal keypoint D.
struct StructuralGroup {
    std::string name;
    std::array<int, 3> base{};
    int terminal = 0;

    int anchor() const noexcept { return base[0]; }
    friend bool operator==(const StructuralGroup&, const StructuralGroup&) = default;
};

struct SkeletonSpec {
    std::string name;
    std::vector<std::string> keypoint_names;
    std::vector<StructuralGroup> groups;
    std::vector<double> oks_k;
    std::vector<std::pair<int, int>> flip_pairs;

    int num_keypoints() const noexcept { return static_cast<int>(keypoint_names.size()); }

    int index_of(std::string_view kp) const {
        auto it = std::find(keypoint_names.begin(), keypoint_names.end(), kp);
        if (it == keypoint_names.end())
            throw Error(ErrorKind::ValidationError, "unknown keypoint", std::string(kp));
        return static_cast<int>(it - keypoint_names.begin());
    }

    bool is_terminal(int i) const noexcept {
        return std::any_of(groups.begin(), groups.end(), [i](const auto& g) { return g.terminal == i; });
    }

    std::vector<int> terminal_indices() const {
        std::vector<int> t;
        for (const auto& g : groups) t.push_back(g.terminal);
        return t;
    }

    /// Index of the mirrored keypoint, or `i` itself when unpaired.
    int mirror(int i) const noexcept {
        for (auto [l, r] : flip_pairs) {
            if (l == i) return r;
            if (r == i) return l;
        }
        return i;
    }

    friend bool operator==(const SkeletonSpec&, const SkeletonSpec&) = default;
};

/// Throws ValidationError naming the first violated invariant.
inline void validate(const SkeletonSpec& s) {
    const int k = s.num_keypoints();
    if (k == 0) throw Error(ErrorKind::ValidationError, "keypoints", "skeleton has no keypoints");
    {
        std::set<std::string> names(s.keypoint_names.begin(), s.keypoint_names.end());
        if (static_cast<int>(names.size()) != k)
            throw Error(ErrorKind::ValidationError, "duplicate keypoint", "keypoint names must be unique");
    }
    if (s.groups.empty()) throw Error(ErrorKind::ValidationError, "groups", "skeleton has no groups");
    std::vector<bool> covered(static_cast<std::size_t>(k), false);
    for (const auto& g : s.groups) {
        std::array<int, 4> m{g.base[0], g.base[1], g.base[2], g.terminal};
        for (int i : m)
            if (i < 0 || i >= k) throw Error(ErrorKind::ValidationError, "member index", g.name);
        std::set<int> distinct(m.begin(), m.end());
        if (distinct.size() != 4) throw Error(ErrorKind::ValidationError, "duplicate member", g.name);
        for (int i : m) covered[static_cast<std::size_t>(i)] = true;
    }
    for (const auto& g : s.groups)
        if (s.is_terminal(g.anchor()))
            throw Error(ErrorKind::ValidationError, "terminal anchor",
                        "a terminal keypoint occupies the A slot of group " + g.name);
    for (int i = 0; i < k; ++i)
        if (!covered[static_cast<std::size_t>(i)])
            throw Error(ErrorKind::ValidationError, "uncovered keypoint", s.keypoint_names[static_cast<std::size_t>(i)]);
    if (static_cast<int>(s.oks_k.size()) != k)
        throw Error(ErrorKind::ValidationError, "oks_k length", "one falloff constant per keypoint is required");
    for (double v : s.oks_k)
        if (!(v > 0.0)) throw Error(ErrorKind::ValidationError, "oks_k", "falloff constants must be positive");
    for (auto [l, r] : s.flip_pairs)
        if (l < 0 || l >= k || r < 0 || r >= k || l == r)
            throw Error(ErrorKind::ValidationError, "flip_pairs", "invalid flip pair");
}

namespace detail {

inline SkeletonSpec build_skeleton(std::string name, std::vector<std::string> kps,
                                   const std::vector<std::pair<std::string, std::array<std::string, 4>>>& groups,
                                   std::vector<double> oks_k,
                                   const std::vector<std::pair<std::string, std::string>>& flips) {
    SkeletonSpec s;
    s.name = std::move(name);
    s.keypoint_names = std::move(kps);
    for (const auto& [gname, m] : groups)
        s.groups.push_back({gname, {s.index_of(m[0]), s.index_of(m[1]), s.index_of(m[2])}, s.index_of(m[3])});
    s.oks_k = std::move(oks_k);
    for (const auto& [l, r] : flips) s.flip_pairs.emplace_back(s.index_of(l), s.index_of(r));
    validate(s);
    return s;
}

}  // namespace detail

/// COCO 17-keypoint layout split into two head, two arm and two leg groups.
inline SkeletonSpec coco17_preset() {
    return detail::build_skeleton(
        "coco17",
        {"nose", "left_eye", "right_eye", "left_ear", "right_ear", "left_shoulder", "right_shoulder",
         "left_elbow", "right_elbow", "left_wrist", "right_wrist", "left_hip", "right_hip", "left_knee",
         "right_knee", "left_ankle", "right_ankle"},
        {
            {"head_left", {"left_shoulder", "nose", "left_eye", "left_ear"}},
            {"head_right", {"right_shoulder", "nose", "right_eye", "right_ear"}},
            {"arm_left", {"left_hip", "left_shoulder", "left_elbow", "left_wrist"}},
            {"arm_right", {"right_hip", "right_shoulder", "right_elbow", "right_wrist"}},
            {"leg_left", {"left_shoulder", "left_hip", "left_knee", "left_ankle"}},
            {"leg_right", {"right_shoulder", "right_hip", "right_knee", "right_ankle"}},
        },
        {0.026, 0.025, 0.025, 0.035, 0.035, 0.079, 0.079, 0.072, 0.072, 0.062, 0.062, 0.107, 0.107, 0.087,
         0.087, 0.089, 0.089},
        {{"left_eye", "right_eye"},
         {"left_ear", "right_ear"},
         {"left_shoulder", "right_shoulder"},
         {"left_elbow", "right_elbow"},
         {"left_wrist", "right_wrist"},
         {"left_hip", "right_hip"},
         {"left_knee", "right_knee"},
         {"left_ankle", "right_ankle"}});
}

/// CrowdPose 14-keypoint layout in four limb groups. Arm groups are anchored
/// on the neck and leg groups on the head top, which keeps every keypoint
/// covered by some group.
inline SkeletonSpec crowdpose14_preset() {
    return detail::build_skeleton(
        "crowdpose14",
        {"left_shoulder", "right_shoulder", "left_elbow", "right_elbow", "left_wrist", "right_wrist", "left_hip",
         "right_hip", "left_knee", "right_knee", "left_ankle", "right_ankle", "head", "neck"},
        {
            {"arm_left", {"neck", "left_shoulder", "left_elbow", "left_wrist"}},
            {"arm_right", {"neck", "right_shoulder", "right_elbow", "right_wrist"}},
            {"leg_left", {"head", "left_hip", "left_knee", "left_ankle"}},
            {"leg_right", {"head", "right_hip", "right_knee", "right_ankle"}},
        },
        {0.079, 0.079, 0.072, 0.072, 0.062, 0.062, 0.107, 0.107, 0.087, 0.087, 0.089, 0.089, 0.079, 0.079},
        {{"left_shoulder", "right_shoulder"},
         {"left_elbow", "right_elbow"},
         {"left_wrist", "right_wrist"},
         {"left_hip", "right_hip"},
         {"left_knee", "right_knee"},
         {"left_ankle", "right_ankle"}});
}

// ---------------------------------------------------------------------------
// Config documents
//
//   # comment
//   [skeleton]
//   name = coco17
//   keypoints = nose, left_eye, ...
//   oks_k = 0.026, 0.025, ...
//   flip_pairs = left_eye:right_eye, left_ear:right_ear
//
//   [groups]
//   group head_left = left_shoulder, nose, left_eye | left_ear
//
// Keys are case-sensitive. `flip_pairs` may be empty. Group members are
// keypoint names; the three before `|` fill slots A, B, C in that order.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s, char sep = ',') {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline double parse_real(const std::string& tok, std::size_t line) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size() || tok.empty())
        throw Error(ErrorKind::ParseError, "number", "cannot parse '" + tok + "'", line);
    return v;
}

}  // namespace detail

inline SkeletonSpec load_skeleton(std::string_view text) {
    using detail::trim;
    std::string name;
    std::vector<std::string> kps;
    std::vector<double> oks;
    std::vector<std::pair<std::string, std::string>> flips;
    struct RawGroup {
        std::string name;
        std::vector<std::string> base;
        std::string terminal;
    };
    std::vector<RawGroup> raw_groups;
    bool have_name = false, have_kps = false, have_oks = false;
    std::string section;

    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw Error(ErrorKind::ParseError, "section", "unterminated section header", line_no);
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (section != "skeleton" && section != "groups")
                throw Error(ErrorKind::ParseError, "section", "unknown section '" + section + "'", line_no);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error(ErrorKind::ParseError, "syntax", "expected 'key = value'", line_no);
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (section.empty()) throw Error(ErrorKind::ParseError, "section", "key outside of a section", line_no);

        if (section == "groups") {
            if (key.rfind("group ", 0) != 0)
                throw Error(ErrorKind::ParseError, "group", "expected 'group <name> = A, B, C | D'", line_no);
            RawGroup g;
            g.name = trim(std::string_view(key).substr(6));
            if (g.name.empty()) throw Error(ErrorKind::ParseError, "group", "group needs a name", line_no);
            const auto bar = value.find('|');
            if (bar == std::string::npos)
                throw Error(ErrorKind::ParseError, "group", "missing '|' before the terminal keypoint", line_no);
            g.base = detail::split_list(std::string_view(value).substr(0, bar));
            auto term = detail::split_list(std::string_view(value).substr(bar + 1));
            if (g.base.size() != 3 || term.size() != 1)
                throw Error(ErrorKind::ValidationError, "group size", "group " + g.name + " must have exactly 4 members",
                            line_no);
            g.terminal = term[0];
            raw_groups.push_back(std::move(g));
            continue;
        }

        if (key == "name") {
            name = value;
            have_name = true;
        } else if (key == "keypoints") {
            kps = detail::split_list(value);
            have_kps = true;
        } else if (key == "oks_k") {
            for (const auto& tok : detail::split_list(value)) oks.push_back(detail::parse_real(tok, line_no));
            have_oks = true;
        } else if (key == "flip_pairs") {
            for (const auto& tok : detail::split_list(value)) {
                auto lr = detail::split_list(tok, ':');
                if (lr.size() != 2) throw Error(ErrorKind::ParseError, "flip_pairs", "expected left:right", line_no);
                flips.emplace_back(lr[0], lr[1]);
            }
        } else {
            throw Error(ErrorKind::ParseError, "key", "unknown key '" + key + "'", line_no);
        }
    }
    if (!have_name) throw Error(ErrorKind::ParseError, "name", "missing 'name'");
    if (!have_kps) throw Error(ErrorKind::ParseError, "keypoints", "missing 'keypoints'");
    if (!have_oks) throw Error(ErrorKind::ParseError, "oks_k", "missing 'oks_k'");

    SkeletonSpec s;
    s.name = name;
    s.keypoint_names = kps;
    for (const auto& g : raw_groups)
        s.groups.push_back({g.name, {s.index_of(g.base[0]), s.index_of(g.base[1]), s.index_of(g.base[2])},
                            s.index_of(g.terminal)});
    s.oks_k = oks;
    for (const auto& [l, r] : flips) s.flip_pairs.emplace_back(s.index_of(l), s.index_of(r));
    validate(s);
    return s;
}

inline std::string to_config_text(const SkeletonSpec& s) {
    std::ostringstream out;
    out << "[skeleton]\nname = " << s.name << "\nkeypoints = ";
    for (std::size_t i = 0; i < s.keypoint_names.size(); ++i) out << (i ? ", " : "") << s.keypoint_names[i];
    out << "\noks_k = " << std::setprecision(17);
    for (std::size_t i = 0; i < s.oks_k.size(); ++i) out << (i ? ", " : "") << s.oks_k[i];
    out << "\nflip_pairs = ";
    for (std::size_t i = 0; i < s.flip_pairs.size(); ++i)
        out << (i ? ", " : "") << s.keypoint_names[static_cast<std::size_t>(s.flip_pairs[i].first)] << ':'
            << s.keypoint_names[static_cast<std::size_t>(s.flip_pairs[i].second)];
    out << "\n\n[groups]\n";
    auto nm = [&](int i) -> const std::string& { return s.keypoint_names[static_cast<std::size_t>(i)]; };
    for (const auto& g : s.groups)
        out << "group " << g.name << " = " << nm(g.base[0]) << ", " << nm(g.base[1]) << ", " << nm(g.base[2]) << " | "
            << nm(g.terminal) << '\n';
    return out.str();
}

/// Resolves a preset name ("coco17", "crowdpose14"), or returns nullopt.
inline std::optional<SkeletonSpec> preset_by_name(std::string_view name) {
    if (name == "coco17") return coco17_preset();
    if (name == "crowdpose14") return crowdpose14_preset();
    return std::nullopt;
}

enum class StackOrder { ForPhi, ForGamma };

/// Keypoint indices feeding a group's network: (A, B, C) for the prediction
/// network, (B, C, D) for the verification network.
inline std::array<int, 3> group_slots(const StructuralGroup& g, StackOrder order) noexcept {
    if (order == StackOrder::ForPhi) return g.base;
    return {g.base[1], g.base[2], g.terminal};
}

template <typename H>
std::array<H, 3> group_stack(const SkeletonSpec& spec, int group_index, std::span<const H> heatmaps,
                             StackOrder order) {
    if (group_index < 0 || group_index >= static_cast<int>(spec.groups.size()))
        throw Error(ErrorKind::IndexError, "group_index", "no such group");
    if (static_cast<int>(heatmaps.size()) != spec.num_keypoints())
        throw Error(ErrorKind::ShapeError, "heatmaps", "expected one heatmap per keypoint");
    const auto slots = group_slots(spec.groups[static_cast<std::size_t>(group_index)], order);
    return {heatmaps[static_cast<std::size_t>(slots[0])], heatmaps[static_cast<std::size_t>(slots[1])],
            heatmaps[static_cast<std::size_t>(slots[2])]};
}

}  // namespace scio
