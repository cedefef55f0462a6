// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "scio/error.hpp"
#include "scio/grid.hpp"
#include "scio/heatmap_codec.hpp"
#include "scio/nnet.hpp"
#include "scio/skeleton.hpp"
#include "scio/train.hpp"

namespace scio {

struct SearchConfig {
    double delta = 8.0;  // search radius in heatmap pixels
    int steps = 50;      // objective evaluations, excluding the one at the start point
    std::optional<double> initial_step;  // defaults to delta / 2
    double shrink = 0.5;
    double confidence_gate = 0.5;  // terminals below this confidence are refined; 1 refines all
    double min_step = 0.25;

    double first_step() const noexcept { return initial_step.value_or(delta / 2.0); }

    void validate() const {
        if (!(delta > 0.0)) throw Error(ErrorKind::ConfigError, "delta", "delta must be > 0");
        if (steps < 1) throw Error(ErrorKind::ConfigError, "steps", "steps must be >= 1");
        if (!(shrink > 0.0 && shrink < 1.0)) throw Error(ErrorKind::ConfigError, "shrink", "shrink must be in (0, 1)");
        if (!(first_step() > 0.0)) throw Error(ErrorKind::ConfigError, "initial_step", "initial step must be > 0");
        if (!(confidence_gate >= 0.0 && confidence_gate <= 1.0))
            throw Error(ErrorKind::ConfigError, "confidence_gate", "tau must be in [0, 1]");
        if (!(min_step > 0.0)) throw Error(ErrorKind::ConfigError, "min_step", "min_step must be > 0");
    }
};

struct SearchProbe {
    double dx = 0.0, dy = 0.0;  // offset from the start point
    double objective = 0.0;
    bool accepted = false;
};

struct SearchTrace {
    double initial_objective = 0.0;
    double final_objective = 0.0;
    std::vector<SearchProbe> probes;

    int evaluations() const noexcept { return static_cast<int>(probes.size()); }

    /// Best objective seen after each evaluation; entry 0 is the start point.
    std::vector<double> best_so_far() const {
        std::vector<double> out{initial_objective};
        for (const auto& p : probes) out.push_back(std::min(out.back(), p.objective));
        return out;
    }
};

struct SearchResult {
    double x = 0.0, y = 0.0;
    SearchTrace trace;
};

namespace detail {

inline constexpr double kDiag = std::numbers::sqrt2 / 2.0;
inline constexpr std::array<std::array<double, 2>, 8> kCompass{{
    {1, 0}, {kDiag, -kDiag}, {0, -1}, {-kDiag, -kDiag}, {-1, 0}, {-kDiag, kDiag}, {0, 1}, {kDiag, kDiag},
}};

}  // namespace detail

/// Compass pattern search around (x0, y0) for any objective f(x, y).
/// Each round probes the 8 compass offsets at the current step; the best
/// strictly improving probe becomes the new centre, otherwise the step
/// shrinks. Probes are clipped to the delta-disc around the start and to
/// the grid. The start point is returned unless something strictly beat it.
template <typename F>
SearchResult compass_search(F&& f, double x0, double y0, const SearchConfig& sc, GridSize bounds) {
    sc.validate();
    if (!(x0 >= 0.0 && y0 >= 0.0 && x0 <= bounds.width - 1.0 && y0 <= bounds.height - 1.0))
        throw Error(ErrorKind::OutOfBounds, "init", "search start lies outside the heatmap grid");
    SearchResult r{x0, y0, {}};
    r.trace.initial_objective = f(x0, y0);
    double cx = 0.0, cy = 0.0, current = r.trace.initial_objective;
    double step = sc.first_step();
    int evals = 0;
    while (evals < sc.steps && step >= sc.min_step) {
        std::optional<std::size_t> best;
        double best_val = current;
        for (const auto& dir : detail::kCompass) {
            if (evals >= sc.steps) break;
            double dx = cx + step * dir[0], dy = cy + step * dir[1];
            const double norm = std::hypot(dx, dy);
            if (norm > sc.delta) dx *= sc.delta / norm, dy *= sc.delta / norm;
            // the bound must hold for the offset actually evaluated, after rounding
            double px = std::clamp(x0 + dx, 0.0, bounds.width - 1.0);
            double py = std::clamp(y0 + dy, 0.0, bounds.height - 1.0);
            while (std::hypot(px - x0, py - y0) > sc.delta) px = std::nextafter(px, x0), py = std::nextafter(py, y0);
            dx = px - x0;
            dy = py - y0;
            if (dx == cx && dy == cy) continue;
            const double v = f(x0 + dx, y0 + dy);
            ++evals;
            r.trace.probes.push_back({dx, dy, v, false});
            if (v < best_val) {
                best_val = v;
                best = r.trace.probes.size() - 1;
            }
        }
        if (best) {
            auto& p = r.trace.probes[*best];
            p.accepted = true;
            cx = p.dx, cy = p.dy, current = p.objective;
        } else {
            step *= sc.shrink;
        }
    }
    r.x = x0 + cx;
    r.y = y0 + cy;
    r.trace.final_objective = current;
    return r;
}

/// Which grid stands in for H_A in the verification objective.
enum class AnchorReference { Observed, Rendered };

/// Verification objective for one group: mse(H_A, gamma(H_B, H_C, render(candidate); f)).
/// Holds the network input so repeated candidates only re-render one channel.
template <typename Net>
class VerificationObjective {
public:
    VerificationObjective(const Net& gamma, const BasicHeatmap<float>& h_a, const BasicHeatmap<float>& h_b,
                          const BasicHeatmap<float>& h_c, const Tensor<float>& features, const GaussianParams& g)
        : gamma_(gamma), ref_(h_a.values().begin(), h_a.values().end()), g_(g), input_(3 + features.channels(), h_a.size()) {
        if (h_b.size() != h_a.size() || h_c.size() != h_a.size() || features.size() != h_a.size())
            throw Error(ErrorKind::ShapeError, "grid", "objective inputs differ in size");
        std::copy(h_b.values().begin(), h_b.values().end(), input_.channel(0).begin());
        std::copy(h_c.values().begin(), h_c.values().end(), input_.channel(1).begin());
        std::copy(features.data().begin(), features.data().end(),
                  input_.data().begin() + 3 * static_cast<std::ptrdiff_t>(input_.plane()));
    }

    double operator()(double x, double y) {
        const auto rendered = encode_keypoint<float>({x, y, 1.0, Visibility::Visible}, g_, input_.size());
        replace_channel<float>(input_, 2, rendered.values());
        const auto out = apply_net<float>(gamma_, input_);
        return mse<float>(out.channel(0), ref_);
    }

    GridSize size() const noexcept { return input_.size(); }

private:
    const Net& gamma_;
    std::vector<float> ref_;
    GaussianParams g_;
    Tensor<float> input_;
};

template <typename Net>
double objective(const Net& gamma, const BasicHeatmap<float>& h_a, const BasicHeatmap<float>& h_b,
                 const BasicHeatmap<float>& h_c, const Tensor<float>& features, const Keypoint& candidate,
                 const GaussianParams& g) {
    if (!h_a.contains(candidate.x, candidate.y))
        throw Error(ErrorKind::OutOfBounds, "candidate", "candidate lies outside the heatmap grid");
    VerificationObjective<Net> obj(gamma, h_a, h_b, h_c, features, g);
    return obj(candidate.x, candidate.y);
}

inline BasicHeatmap<float> anchor_reference(const Tensor<float>& observed, int anchor, AnchorReference mode,
                                            const GaussianParams& g) {
    auto h = observed.heatmap(anchor);
    if (mode == AnchorReference::Observed) return h;
    return encode_keypoint<float>(decode_subpixel(h), g, h.size());
}

struct RefineResult {
    Keypoint refined;
    SearchTrace trace;
};

/// Searches the terminal keypoint of `group` starting at `init`.
template <typename Net>
RefineResult refine_terminal(const Net& gamma, const Tensor<float>& observed, const StructuralGroup& group,
                             const Tensor<float>& features, const Keypoint& init, const SearchConfig& sc,
                             const GaussianParams& g, AnchorReference ref = AnchorReference::Observed) {
    const GridSize grid = observed.size();
    if (!(init.x >= 0.0 && init.y >= 0.0 && init.x <= grid.width - 1.0 && init.y <= grid.height - 1.0))
        throw Error(ErrorKind::OutOfBounds, "init", "initial keypoint lies outside the heatmap grid");
    VerificationObjective<Net> obj(gamma, anchor_reference(observed, group.anchor(), ref, g),
                                   observed.heatmap(group.base[1]), observed.heatmap(group.base[2]), features, g);
    auto s = compass_search(obj, init.x, init.y, sc, grid);
    Keypoint out = init;
    out.x = s.x;
    out.y = s.y;
    return {out, std::move(s.trace)};
}

/// Unrefined decoding: sub-pixel argmax of every observed heatmap.
inline std::vector<Keypoint> decode_all(const Tensor<float>& observed) {
    std::vector<Keypoint> out;
    for (int k = 0; k < observed.channels(); ++k) out.push_back(decode_subpixel(observed.heatmap(k)));
    return out;
}

struct GroupRefinement {
    int group = 0;
    bool refined = false;
    Keypoint init;
    Keypoint result;
    SearchTrace trace;
};

struct PoseRefinement {
    std::vector<Keypoint> keypoints;  // heatmap pixels
    std::vector<GroupRefinement> groups;
};

struct RefineOptions {
    SearchConfig search{};
    GaussianParams gaussian{};
    AnchorReference reference = AnchorReference::Observed;
};

/// Decodes a pose and refines each gated terminal keypoint, one pass in group order.
inline PoseRefinement refine_pose(const TrainResult& models, const Tensor<float>& observed,
                                  const Tensor<float>& features, const SkeletonSpec& skeleton,
                                  const RefineOptions& opt) {
    opt.search.validate();
    if (models.nets.empty() || (models.mode == GroupMode::PerGroup && models.nets.size() != skeleton.groups.size()))
        throw Error(ErrorKind::MissingModel, "models", "no verification network for every group");
    if (models.mode == GroupMode::PerGroup)
        for (std::size_t g = 0; g < skeleton.groups.size(); ++g)
            if (g >= models.groups.size() || models.groups[g] != skeleton.groups[g].name)
                throw Error(ErrorKind::MissingModel, skeleton.groups[g].name, "no model for group");
    if (observed.channels() != skeleton.num_keypoints())
        throw Error(ErrorKind::ShapeError, "heatmaps", "expected one heatmap per keypoint");

    PoseRefinement out{decode_all(observed), {}};
    const double tau = opt.search.confidence_gate;
    for (std::size_t gi = 0; gi < skeleton.groups.size(); ++gi) {
        const auto& group = skeleton.groups[gi];
        GroupRefinement gr;
        gr.group = static_cast<int>(gi);
        gr.init = out.keypoints[static_cast<std::size_t>(group.terminal)];
        gr.result = gr.init;
        if (tau >= 1.0 || gr.init.confidence < tau) {
            auto r = refine_terminal(models.for_group(gi).gamma, observed, group, features, gr.init, opt.search,
                                     opt.gaussian, opt.reference);
            r.refined.confidence = clamp_unit(sample_bilinear(observed.heatmap(group.terminal), r.refined.x, r.refined.y));
            gr.refined = true;
            gr.result = r.refined;
            gr.trace = std::move(r.trace);
            out.keypoints[static_cast<std::size_t>(group.terminal)] = gr.result;
        }
        out.groups.push_back(std::move(gr));
    }
    return out;
}

/// Maps heatmap-pixel keypoints onto the canvas.
inline std::vector<Keypoint> to_canvas(std::span<const Keypoint> kps, GridSize heatmap, GridSize canvas) {
    const double sx = static_cast<double>(canvas.width) / heatmap.width;
    const double sy = static_cast<double>(canvas.height) / heatmap.height;
    std::vector<Keypoint> out(kps.begin(), kps.end());
    for (auto& k : out) k.x *= sx, k.y *= sy;
    return out;
}

}  // namespace scio
