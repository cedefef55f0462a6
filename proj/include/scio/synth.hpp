// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string_view>
#include <vector>

#include "scio/error.hpp"
#include "scio/grid.hpp"
#include "scio/heatmap_codec.hpp"
#include "scio/rng.hpp"
#include "scio/skeleton.hpp"

namespace scio {

/// Closed interval used for every sampled quantity.
struct Range {
    double lo = 0.0;
    double hi = 0.0;

    double sample(Rng& rng) const { return rng.uniform(lo, hi); }
    bool contains(double v) const noexcept { return v >= lo && v <= hi; }
    friend bool operator==(const Range&, const Range&) = default;
};

// Internal body model: the 17 COCO joints plus neck and head top. Skeleton
// presets pick their keypoints from this set by name.
enum BodyJoint : int {
    kNose, kLeftEye, kRightEye, kLeftEar, kRightEar, kLeftShoulder, kRightShoulder, kLeftElbow, kRightElbow,
    kLeftWrist, kRightWrist, kLeftHip, kRightHip, kLeftKnee, kRightKnee, kLeftAnkle, kRightAnkle, kNeck, kHeadTop,
    kBodyJointCount
};

inline constexpr std::array<std::string_view, kBodyJointCount> kBodyJointNames{
    "nose", "left_eye", "right_eye", "left_ear", "right_ear", "left_shoulder", "right_shoulder", "left_elbow",
    "right_elbow", "left_wrist", "right_wrist", "left_hip", "right_hip", "left_knee", "right_knee", "left_ankle",
    "right_ankle", "neck", "head"};

inline int body_joint_of(std::string_view keypoint) {
    for (int i = 0; i < kBodyJointCount; ++i)
        if (kBodyJointNames[static_cast<std::size_t>(i)] == keypoint) return i;
    throw Error(ErrorKind::ConfigError, "keypoint", "the generator has no joint named '" + std::string(keypoint) + "'");
}

/// Bone order of PoseSample::bone_lengths.
enum Bone : int {
    kTorso, kUpperArmLeft, kForearmLeft, kUpperArmRight, kForearmRight, kThighLeft, kShinLeft, kThighRight,
    kShinRight, kBoneCount
};

/// Kinematic-chain generator ranges. Lengths are canvas pixels, angles
/// degrees. Limb angles are measured from the torso's downward axis, with
/// positive values swinging away from the body midline.
struct GeneratorConfig {
    GridSize canvas{256, 192};
    double margin = 4.0;

    Range torso_length{38.0, 48.0};
    Range shoulder_half_width{12.0, 16.0};
    Range hip_half_width{8.0, 11.0};
    Range neck_to_nose{12.0, 17.0};
    Range nose_to_head_top{8.0, 12.0};
    Range eye_side{3.0, 5.0};
    Range eye_up{2.0, 4.0};
    Range ear_side{6.5, 9.0};
    Range upper_arm{22.0, 32.0};
    Range forearm{20.0, 45.0};
    Range thigh{30.0, 40.0};
    Range shin{28.0, 38.0};

    Range torso_lean{-15.0, 15.0};
    Range head_tilt{-20.0, 20.0};
    Range shoulder_angle{-30.0, 150.0};
    Range elbow_angle{-140.0, 20.0};
    Range hip_angle{-10.0, 40.0};
    Range knee_angle{-80.0, 5.0};

    void validate() const {
        const std::array<std::pair<const char*, Range>, 18> all{{
            {"torso_length", torso_length}, {"shoulder_half_width", shoulder_half_width},
            {"hip_half_width", hip_half_width}, {"neck_to_nose", neck_to_nose},
            {"nose_to_head_top", nose_to_head_top}, {"eye_side", eye_side}, {"eye_up", eye_up},
            {"ear_side", ear_side}, {"upper_arm", upper_arm}, {"forearm", forearm}, {"thigh", thigh},
            {"shin", shin}, {"torso_lean", torso_lean}, {"head_tilt", head_tilt},
            {"shoulder_angle", shoulder_angle}, {"elbow_angle", elbow_angle}, {"hip_angle", hip_angle},
            {"knee_angle", knee_angle},
        }};
        for (const auto& [name, r] : all)
            if (!(r.lo <= r.hi)) throw Error(ErrorKind::ConfigError, name, "empty range");
        if (canvas.width < 32 || canvas.height < 32) throw Error(ErrorKind::ConfigError, "canvas", "canvas too small");
    }
};

struct PoseSample {
    std::vector<Keypoint> keypoints;  // canvas pixels, ordered like the skeleton
    GridSize canvas{};
    std::vector<double> bone_lengths;  // indexed by Bone
    double person_scale = 0.0;

    friend bool operator==(const PoseSample&, const PoseSample&) = default;
};

/// sqrt of the area of the visible keypoints' bounding box, each side padded by 10%.
inline double object_scale(std::span<const Keypoint> kps) {
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    bool any = false;
    for (const auto& k : kps) {
        if (k.visibility == Visibility::Invisible) continue;
        any = true;
        x0 = std::min(x0, k.x), x1 = std::max(x1, k.x);
        y0 = std::min(y0, k.y), y1 = std::max(y1, k.y);
    }
    if (!any) return 0.0;
    const double w = std::max(1.0, (x1 - x0) * 1.1), h = std::max(1.0, (y1 - y0) * 1.1);
    return std::sqrt(w * h);
}

namespace detail {

struct Vec2 {
    double x = 0.0, y = 0.0;
    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
};

inline Vec2 rotate(Vec2 v, double deg) {
    const double a = deg * std::numbers::pi / 180.0;
    const double c = std::cos(a), s = std::sin(a);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

inline double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace detail

/// Samples one articulated body and projects it onto `skeleton`'s keypoints.
/// The torso is rooted at the hip midpoint; limbs grow outward by sampled
/// bone lengths and joint angles; the whole figure is then translated to a
/// uniformly random position that keeps every joint `margin` px inside the canvas.
inline PoseSample sample_pose(Rng& rng, const GeneratorConfig& cfg, const SkeletonSpec& skeleton) {
    using detail::Vec2;
    cfg.validate();
    std::vector<int> joint_of;
    for (const auto& n : skeleton.keypoint_names) joint_of.push_back(body_joint_of(n));

    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::array<Vec2, kBodyJointCount> j{};
        std::vector<double> bones(kBoneCount);
        // image y grows downward; `up` points from hips to neck
        const double lean = cfg.torso_lean.sample(rng);
        const Vec2 up = detail::rotate({0.0, -1.0}, lean);
        const Vec2 side = detail::rotate({1.0, 0.0}, lean);  // toward the figure's left (image right)
        const double torso = cfg.torso_length.sample(rng);
        bones[kTorso] = torso;
        const Vec2 root{0.0, 0.0};
        j[kNeck] = root + up * torso;
        const double sw = cfg.shoulder_half_width.sample(rng), hw = cfg.hip_half_width.sample(rng);
        j[kLeftShoulder] = j[kNeck] + side * sw;
        j[kRightShoulder] = j[kNeck] - side * sw;
        j[kLeftHip] = root + side * hw;
        j[kRightHip] = root - side * hw;

        const double tilt = cfg.head_tilt.sample(rng);
        const Vec2 hu = detail::rotate(up, tilt), hs = detail::rotate(side, tilt);
        j[kNose] = j[kNeck] + hu * cfg.neck_to_nose.sample(rng);
        j[kHeadTop] = j[kNose] + hu * cfg.nose_to_head_top.sample(rng);
        const double es = cfg.eye_side.sample(rng), eu = cfg.eye_up.sample(rng);
        j[kLeftEye] = j[kNose] + hs * es + hu * eu;
        j[kRightEye] = j[kNose] - hs * es + hu * eu;
        j[kLeftEar] = j[kNose] + hs * cfg.ear_side.sample(rng) + hu * (0.5 * eu);
        j[kRightEar] = j[kNose] - hs * cfg.ear_side.sample(rng) + hu * (0.5 * eu);

        const Vec2 down = up * -1.0;
        struct Chain {
            int a, b, c;
            int bone1, bone2;
            double outward;
        };
        // For the figure's left side "outward" is +side, i.e. a negative
        // rotation of `down` in image coordinates.
        for (const Chain& ch : {Chain{kLeftShoulder, kLeftElbow, kLeftWrist, kUpperArmLeft, kForearmLeft, -1.0},
                                Chain{kRightShoulder, kRightElbow, kRightWrist, kUpperArmRight, kForearmRight, 1.0}}) {
            const Vec2 d1 = detail::rotate(down, ch.outward * cfg.shoulder_angle.sample(rng));
            const double l1 = cfg.upper_arm.sample(rng);
            j[static_cast<std::size_t>(ch.b)] = j[static_cast<std::size_t>(ch.a)] + d1 * l1;
            const Vec2 d2 = detail::rotate(d1, ch.outward * cfg.elbow_angle.sample(rng));
            const double l2 = cfg.forearm.sample(rng);
            j[static_cast<std::size_t>(ch.c)] = j[static_cast<std::size_t>(ch.b)] + d2 * l2;
            bones[static_cast<std::size_t>(ch.bone1)] = l1;
            bones[static_cast<std::size_t>(ch.bone2)] = l2;
        }
        for (const Chain& ch : {Chain{kLeftHip, kLeftKnee, kLeftAnkle, kThighLeft, kShinLeft, -1.0},
                                Chain{kRightHip, kRightKnee, kRightAnkle, kThighRight, kShinRight, 1.0}}) {
            const Vec2 d1 = detail::rotate(down, ch.outward * cfg.hip_angle.sample(rng));
            const double l1 = cfg.thigh.sample(rng);
            j[static_cast<std::size_t>(ch.b)] = j[static_cast<std::size_t>(ch.a)] + d1 * l1;
            const Vec2 d2 = detail::rotate(d1, ch.outward * cfg.knee_angle.sample(rng));
            const double l2 = cfg.shin.sample(rng);
            j[static_cast<std::size_t>(ch.c)] = j[static_cast<std::size_t>(ch.b)] + d2 * l2;
            bones[static_cast<std::size_t>(ch.bone1)] = l1;
            bones[static_cast<std::size_t>(ch.bone2)] = l2;
        }

        double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
        for (const auto& p : j) x0 = std::min(x0, p.x), x1 = std::max(x1, p.x), y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
        const double m = cfg.margin;
        // keypoints must stay strictly below width/height, hence the extra pixel
        const double free_x = (cfg.canvas.width - 1.0 - 2.0 * m) - (x1 - x0);
        const double free_y = (cfg.canvas.height - 1.0 - 2.0 * m) - (y1 - y0);
        if (free_x < 0.0 || free_y < 0.0) continue;
        const Vec2 shift{m + free_x * rng.uniform() - x0, m + free_y * rng.uniform() - y0};

        PoseSample out;
        out.canvas = cfg.canvas;
        out.bone_lengths = std::move(bones);
        for (int jt : joint_of) {
            const Vec2 p = j[static_cast<std::size_t>(jt)] + shift;
            out.keypoints.push_back({p.x, p.y, 1.0, Visibility::Visible});
        }
        out.person_scale = object_scale(out.keypoints);
        return out;
    }
    throw Error(ErrorKind::ConfigError, "canvas", "could not fit a sampled body into the canvas");
}

struct CorruptionConfig {
    double terminal_shift_max = 6.0;  // heatmap pixels
    double distractor_prob = 0.3;
    double distractor_amp = 0.7;
    Range attenuation_range{0.4, 0.9};
    double base_noise_std = 0.02;
    Range distractor_radius{4.0, 8.0};  // heatmap pixels from the true terminal location

    void validate() const {
        if (!(distractor_prob >= 0.0 && distractor_prob <= 1.0))
            throw Error(ErrorKind::ConfigError, "distractor_prob", "probability outside [0, 1]");
        if (!(terminal_shift_max >= 0.0)) throw Error(ErrorKind::ConfigError, "terminal_shift_max", "must be >= 0");
        if (!(attenuation_range.lo > 0.0 && attenuation_range.lo <= attenuation_range.hi && attenuation_range.hi <= 1.0))
            throw Error(ErrorKind::ConfigError, "attenuation_range", "must be a sub-interval of (0, 1]");
        if (!(base_noise_std >= 0.0)) throw Error(ErrorKind::ConfigError, "base_noise_std", "must be >= 0");
        if (!(distractor_amp >= 0.0)) throw Error(ErrorKind::ConfigError, "distractor_amp", "must be >= 0");
        if (!(distractor_radius.lo >= 0.0 && distractor_radius.lo <= distractor_radius.hi))
            throw Error(ErrorKind::ConfigError, "distractor_radius", "empty range");
    }

    static CorruptionConfig none() { return {0.0, 0.0, 0.0, {1.0, 1.0}, 0.0, {4.0, 8.0}}; }
};

/// Limb-mask feature rendering.
struct FeatureConfig {
    double half_width = 1.0;  // heatmap pixels
    double blur_sigma = 1.0;
    double noise_std = 0.05;
};

inline constexpr int kFeatureChannels = 8;

struct LimbSegment {
    int channel;
    int a, b;
};

// One channel per limb class: head, torso, left/right upper arm, left/right
// forearm, left/right leg.
inline constexpr std::array<LimbSegment, 19> kLimbSegments{{
    {0, kNose, kLeftEye}, {0, kNose, kRightEye}, {0, kLeftEye, kLeftEar}, {0, kRightEye, kRightEar},
    {0, kNeck, kNose}, {0, kNose, kHeadTop}, {0, kNeck, kHeadTop},
    {1, kLeftShoulder, kRightShoulder}, {1, kLeftHip, kRightHip}, {1, kLeftShoulder, kLeftHip},
    {1, kRightShoulder, kRightHip},
    {2, kLeftShoulder, kLeftElbow}, {3, kLeftElbow, kLeftWrist},
    {4, kRightShoulder, kRightElbow}, {5, kRightElbow, kRightWrist},
    {6, kLeftHip, kLeftKnee}, {6, kLeftKnee, kLeftAnkle},
    {7, kRightHip, kRightKnee}, {7, kRightKnee, kRightAnkle},
}};

/// Network-ready views of one synthetic sample: clean and corrupted
/// heatmaps (K x H x W) and the feature map (C x H x W).
struct ObservedSample {
    Tensor<float> gt_heatmaps;
    Tensor<float> obs_heatmaps;
    Tensor<float> feature_map;
    PoseSample pose;

    int num_keypoints() const noexcept { return gt_heatmaps.channels(); }
    GridSize grid() const noexcept { return gt_heatmaps.size(); }
    friend bool operator==(const ObservedSample&, const ObservedSample&) = default;
};

struct RenderConfig {
    GridSize heatmap{64, 48};
    GaussianParams gaussian{};
    CorruptionConfig corruption{};
    FeatureConfig features{};
};

namespace detail {

inline void blur_plane(std::span<float> plane, GridSize g, double sigma) {
    if (sigma <= 0.0) return;
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) sum += k[static_cast<std::size_t>(i + r)] = std::exp(-i * i / (2.0 * sigma * sigma));
    for (auto& v : k) v /= sum;
    std::vector<double> tmp(plane.size());
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) {
                const int xx = std::clamp(x + i, 0, g.width - 1);
                acc += k[static_cast<std::size_t>(i + r)] * plane[static_cast<std::size_t>(y * g.width + xx)];
            }
            tmp[static_cast<std::size_t>(y * g.width + x)] = acc;
        }
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) {
                const int yy = std::clamp(y + i, 0, g.height - 1);
                acc += k[static_cast<std::size_t>(i + r)] * tmp[static_cast<std::size_t>(yy * g.width + x)];
            }
            plane[static_cast<std::size_t>(y * g.width + x)] = static_cast<float>(acc);
        }
}

inline double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
    const double vx = bx - ax, vy = by - ay;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(px - (ax + t * vx), py - (ay + t * vy));
}

}  // namespace detail

/// Renders clean and corrupted heatmaps plus limb features for a pose.
/// Body joints missing from the skeleton (e.g. the neck in COCO) are
/// interpolated for feature rendering only.
inline ObservedSample render_observation(const PoseSample& pose, const SkeletonSpec& skeleton, const RenderConfig& rc,
                                         Rng& rng) {
    rc.corruption.validate();
    const int k = skeleton.num_keypoints();
    if (static_cast<int>(pose.keypoints.size()) != k)
        throw Error(ErrorKind::ShapeError, "keypoints", "pose does not match skeleton");
    const GridSize g = rc.heatmap;
    const double sx = static_cast<double>(g.width) / pose.canvas.width;
    const double sy = static_cast<double>(g.height) / pose.canvas.height;

    ObservedSample out{Tensor<float>(k, g), Tensor<float>(k, g), Tensor<float>(kFeatureChannels, g), pose};
    std::vector<detail::Vec2> hm(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const auto& kp = pose.keypoints[static_cast<std::size_t>(i)];
        hm[static_cast<std::size_t>(i)] = {kp.x * sx, kp.y * sy};
        const auto h = encode_keypoint<double>({kp.x * sx, kp.y * sy, 1.0, kp.visibility}, rc.gaussian, g);
        out.gt_heatmaps.set_channel<double>(i, h.values());
    }

    const auto& cc = rc.corruption;
    for (int i = 0; i < k; ++i) {
        const auto p = hm[static_cast<std::size_t>(i)];
        Heatmap h(g);
        if (skeleton.is_terminal(i)) {
            const double r = cc.terminal_shift_max * std::sqrt(rng.uniform());
            const double a = 2.0 * std::numbers::pi * rng.uniform();
            const double px = std::clamp(p.x + r * std::cos(a), 0.0, g.width - 1.0);
            const double py = std::clamp(p.y + r * std::sin(a), 0.0, g.height - 1.0);
            add_gaussian(h, px, py, rc.gaussian, cc.attenuation_range.sample(rng));
            if (rng.bernoulli(cc.distractor_prob)) {
                const double dr = cc.distractor_radius.sample(rng);
                const double da = 2.0 * std::numbers::pi * rng.uniform();
                add_gaussian(h, std::clamp(p.x + dr * std::cos(da), 0.0, g.width - 1.0),
                             std::clamp(p.y + dr * std::sin(da), 0.0, g.height - 1.0), rc.gaussian,
                             cc.distractor_amp);
            }
        } else {
            add_gaussian(h, p.x, p.y, rc.gaussian);
        }
        if (cc.base_noise_std > 0.0)
            for (auto& v : h.values()) v += rng.normal(0.0, cc.base_noise_std);
        out.obs_heatmaps.set_channel<double>(i, h.values());
    }

    // feature map from the full body model
    std::array<detail::Vec2, kBodyJointCount> body{};
    std::array<bool, kBodyJointCount> have{};
    for (int i = 0; i < k; ++i) {
        const int j = body_joint_of(skeleton.keypoint_names[static_cast<std::size_t>(i)]);
        body[static_cast<std::size_t>(j)] = hm[static_cast<std::size_t>(i)];
        have[static_cast<std::size_t>(j)] = true;
    }
    auto mid = [&](int a, int b) {
        return detail::Vec2{(body[static_cast<std::size_t>(a)].x + body[static_cast<std::size_t>(b)].x) / 2,
                            (body[static_cast<std::size_t>(a)].y + body[static_cast<std::size_t>(b)].y) / 2};
    };
    if (!have[kNeck] && have[kLeftShoulder] && have[kRightShoulder]) {
        body[kNeck] = mid(kLeftShoulder, kRightShoulder);
        have[kNeck] = true;
    }
    for (const auto& seg : kLimbSegments) {
        if (!have[static_cast<std::size_t>(seg.a)] || !have[static_cast<std::size_t>(seg.b)]) continue;
        const auto a = body[static_cast<std::size_t>(seg.a)], b = body[static_cast<std::size_t>(seg.b)];
        auto plane = out.feature_map.channel(seg.channel);
        for (int y = 0; y < g.height; ++y)
            for (int x = 0; x < g.width; ++x)
                if (detail::segment_distance(x, y, a.x, a.y, b.x, b.y) <= rc.features.half_width)
                    plane[static_cast<std::size_t>(y * g.width + x)] = 1.0f;
    }
    for (int c = 0; c < kFeatureChannels; ++c) {
        auto plane = out.feature_map.channel(c);
        detail::blur_plane(plane, g, rc.features.blur_sigma);
        if (rc.features.noise_std > 0.0)
            for (auto& v : plane) v = static_cast<float>(v + rng.normal(0.0, rc.features.noise_std));
    }
    return out;
}

}  // namespace scio
