// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "scio/error.hpp"

namespace scio {

struct GridSize {
    int width = 64;
    int height = 48;

    std::size_t area() const noexcept {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    friend bool operator==(const GridSize&, const GridSize&) = default;
};

inline constexpr int kMinHeatmapSide = 8;

/// Dense single-keypoint activation grid, row-major (index = y * width + x).
template <typename T>
class BasicHeatmap {
public:
    using value_type = T;

    BasicHeatmap() : BasicHeatmap(GridSize{}) {}

    explicit BasicHeatmap(GridSize size, T fill = T(0)) : size_(size) {
        check_size(size);
        values_.assign(size.area(), fill);
    }

    BasicHeatmap(GridSize size, std::vector<T> values) : size_(size), values_(std::move(values)) {
        check_size(size);
        if (values_.size() != size.area())
            throw Error(ErrorKind::ShapeError, "values", "heatmap value count does not match dimensions");
        for (T v : values_)
            if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "finite", "heatmap holds a non-finite value");
    }

    int width() const noexcept { return size_.width; }
    int height() const noexcept { return size_.height; }
    GridSize size() const noexcept { return size_; }

    T& at(int x, int y) { return values_[index(x, y)]; }
    T at(int x, int y) const { return values_[index(x, y)]; }

    std::span<T> values() noexcept { return values_; }
    std::span<const T> values() const noexcept { return values_; }

    bool contains(double x, double y) const noexcept {
        return x >= 0.0 && y >= 0.0 && x < size_.width && y < size_.height;
    }

    template <typename U>
    BasicHeatmap<U> cast() const {
        std::vector<U> out(values_.begin(), values_.end());
        return BasicHeatmap<U>(size_, std::move(out));
    }

    friend bool operator==(const BasicHeatmap&, const BasicHeatmap&) = default;

private:
    static void check_size(GridSize s) {
        if (s.width < kMinHeatmapSide || s.height < kMinHeatmapSide)
            throw Error(ErrorKind::ShapeError, "dims", "heatmaps must be at least 8x8");
    }
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(size_.width) + static_cast<std::size_t>(x);
    }

    GridSize size_;
    std::vector<T> values_;
};

using Heatmap = BasicHeatmap<double>;

/// Channel-major stack of equally sized grids (C x H x W).
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    Tensor(int channels, GridSize size, T fill = T(0))
        : channels_(channels), size_(size), data_(static_cast<std::size_t>(channels) * size.area(), fill) {}
    Tensor(int channels, GridSize size, std::vector<T> data)
        : channels_(channels), size_(size), data_(std::move(data)) {
        if (data_.size() != static_cast<std::size_t>(channels) * size.area())
            throw Error(ErrorKind::ShapeError, "payload", "tensor data does not match C x H x W");
    }

    int channels() const noexcept { return channels_; }
    GridSize size() const noexcept { return size_; }
    int width() const noexcept { return size_.width; }
    int height() const noexcept { return size_.height; }
    std::size_t plane() const noexcept { return size_.area(); }

    std::span<T> channel(int c) noexcept { return {data_.data() + static_cast<std::size_t>(c) * plane(), plane()}; }
    std::span<const T> channel(int c) const noexcept {
        return {data_.data() + static_cast<std::size_t>(c) * plane(), plane()};
    }

    T& at(int c, int y, int x) { return data_[(static_cast<std::size_t>(c) * size_.height + y) * size_.width + x]; }
    T at(int c, int y, int x) const {
        return data_[(static_cast<std::size_t>(c) * size_.height + y) * size_.width + x];
    }

    std::vector<T>& data() noexcept { return data_; }
    const std::vector<T>& data() const noexcept { return data_; }

    template <typename U>
    void set_channel(int c, std::span<const U> values) {
        if (values.size() != plane()) throw Error(ErrorKind::ShapeError, "plane", "channel size mismatch");
        std::transform(values.begin(), values.end(), channel(c).begin(), [](U v) { return static_cast<T>(v); });
    }

    BasicHeatmap<T> heatmap(int c) const {
        auto ch = channel(c);
        return BasicHeatmap<T>(size_, std::vector<T>(ch.begin(), ch.end()));
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    int channels_ = 0;
    GridSize size_{};
    std::vector<T> data_;
};

}  // namespace scio
