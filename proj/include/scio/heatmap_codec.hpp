// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "scio/error.hpp"
#include "scio/grid.hpp"

namespace scio {

enum class Visibility : std::uint8_t { Invisible = 0, Occluded = 1, Visible = 2 };

/// Sub-pixel keypoint location with a confidence in [0, 1].
struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    double confidence = 0.0;
    Visibility visibility = Visibility::Visible;

    friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

enum class AmplitudeMode : std::uint8_t {
    Eq1Literal,  ///< peak 1/(2 pi sigma^2), a normalised 2-D Gaussian density
    UnitPeak,    ///< peak 1
};

struct GaussianParams {
    double sigma = 2.0;
    AmplitudeMode amplitude_mode = AmplitudeMode::UnitPeak;

    double amplitude() const noexcept {
        return amplitude_mode == AmplitudeMode::UnitPeak ? 1.0
                                                         : 1.0 / (2.0 * std::numbers::pi * sigma * sigma);
    }
};

inline double clamp_unit(double v) noexcept { return std::clamp(v, 0.0, 1.0); }

/// Adds `scale * A * exp(-r^2 / 2 sigma^2)` centred at (px, py) to every cell.
/// The centre may lie anywhere, including off the grid.
template <typename T>
void add_gaussian(BasicHeatmap<T>& h, double px, double py, const GaussianParams& g, double scale = 1.0) {
    if (!(g.sigma > 0.0)) throw Error(ErrorKind::InvalidSigma, "sigma", "sigma must be positive");
    const double amp = g.amplitude() * scale;
    const double inv = 1.0 / (2.0 * g.sigma * g.sigma);
    for (int y = 0; y < h.height(); ++y) {
        const double dy2 = (y - py) * (y - py);
        for (int x = 0; x < h.width(); ++x) {
            const double dx = x - px;
            h.at(x, y) += static_cast<T>(amp * std::exp(-(dx * dx + dy2) * inv));
        }
    }
}

/// Renders the Gaussian kernel for one keypoint onto a fresh grid.
template <typename T = double>
BasicHeatmap<T> encode_keypoint(const Keypoint& p, const GaussianParams& g, GridSize dims) {
    if (!(g.sigma > 0.0)) throw Error(ErrorKind::InvalidSigma, "sigma", "sigma must be positive");
    BasicHeatmap<T> h(dims);
    if (!h.contains(p.x, p.y))
        throw Error(ErrorKind::OutOfBounds, "keypoint", "keypoint lies outside the heatmap grid");
    add_gaussian(h, p.x, p.y, g);
    return h;
}

/// Integer argmax; ties go to the smallest row-major index.
template <typename T>
Keypoint decode_argmax(const BasicHeatmap<T>& h) {
    auto v = h.values();
    auto it = std::max_element(v.begin(), v.end());  // first maximum wins
    const auto idx = static_cast<int>(std::distance(v.begin(), it));
    return Keypoint{static_cast<double>(idx % h.width()), static_cast<double>(idx / h.width()),
                    clamp_unit(static_cast<double>(*it)), Visibility::Visible};
}

/// Argmax shifted a quarter pixel toward the larger axis neighbour.
template <typename T>
Keypoint decode_subpixel(const BasicHeatmap<T>& h) {
    Keypoint k = decode_argmax(h);
    const int x = static_cast<int>(k.x);
    const int y = static_cast<int>(k.y);
    if (x > 0 && x < h.width() - 1) {
        const T l = h.at(x - 1, y), r = h.at(x + 1, y);
        if (r > l) k.x += 0.25;
        else if (l > r) k.x -= 0.25;
    }
    if (y > 0 && y < h.height() - 1) {
        const T u = h.at(x, y - 1), d = h.at(x, y + 1);
        if (d > u) k.y += 0.25;
        else if (u > d) k.y -= 0.25;
    }
    return k;
}

template <typename T>
std::vector<double> batch_confidence(std::span<const BasicHeatmap<T>> hs) {
    if (hs.empty()) throw Error(ErrorKind::EmptyInput, "heatmaps", "batch_confidence needs at least one heatmap");
    std::vector<double> out;
    out.reserve(hs.size());
    for (const auto& h : hs) out.push_back(decode_argmax(h).confidence);
    return out;
}

/// Bilinear read at a sub-pixel location inside the grid.
template <typename T>
double sample_bilinear(const BasicHeatmap<T>& h, double x, double y) {
    if (!h.contains(x, y)) throw Error(ErrorKind::OutOfBounds, "location", "sample outside heatmap");
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, h.width() - 1), y1 = std::min(y0 + 1, h.height() - 1);
    const double fx = x - x0, fy = y - y0;
    const double top = (1 - fx) * h.at(x0, y0) + fx * h.at(x1, y0);
    const double bot = (1 - fx) * h.at(x0, y1) + fx * h.at(x1, y1);
    return (1 - fy) * top + fy * bot;
}

}  // namespace scio
