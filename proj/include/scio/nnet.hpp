// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "scio/error.hpp"
#include "scio/grid.hpp"
#include "scio/rng.hpp"

namespace scio {

// Fully convolutional network of 3x3 same-padded convolutions, stride 1.
// Gradients are hand-written for exactly this family of layers.

enum class Activation : std::uint8_t { ReLU = 0, Linear = 1 };

inline constexpr int kKernel = 3;
inline constexpr int kTaps = kKernel * kKernel;

template <typename T>
struct ConvLayer {
    int in_channels = 0;
    int out_channels = 0;
    Activation activation = Activation::ReLU;
    std::vector<T> weight;  // [out][in][3][3]
    std::vector<T> bias;    // [out]

    std::size_t fan_in() const noexcept { return static_cast<std::size_t>(in_channels) * kTaps; }
    friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

template <typename T>
struct ConvNetParams {
    std::vector<ConvLayer<T>> layers;

    int input_channels() const noexcept { return layers.empty() ? 0 : layers.front().in_channels; }
    int output_channels() const noexcept { return layers.empty() ? 0 : layers.back().out_channels; }

    std::size_t parameter_count() const noexcept {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weight.size() + l.bias.size();
        return n;
    }

    void validate() const {
        if (layers.empty()) throw Error(ErrorKind::ConfigError, "layers", "network has no layers");
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& l = layers[i];
            if (l.in_channels < 1 || l.out_channels < 1)
                throw Error(ErrorKind::ConfigError, "channels", "layer channel counts must be positive");
            if (i + 1 < layers.size() && l.out_channels != layers[i + 1].in_channels)
                throw Error(ErrorKind::ConfigError, "channel mismatch",
                            "layer " + std::to_string(i) + " output does not feed layer " + std::to_string(i + 1));
            if (l.weight.size() != static_cast<std::size_t>(l.out_channels) * l.fan_in() ||
                l.bias.size() != static_cast<std::size_t>(l.out_channels))
                throw Error(ErrorKind::ShapeError, "layer", "parameter buffer sizes do not match channels");
        }
    }

    template <typename U>
    ConvNetParams<U> cast() const {
        ConvNetParams<U> out;
        for (const auto& l : layers)
            out.layers.push_back({l.in_channels, l.out_channels, l.activation,
                                  std::vector<U>(l.weight.begin(), l.weight.end()),
                                  std::vector<U>(l.bias.begin(), l.bias.end())});
        return out;
    }

    friend bool operator==(const ConvNetParams&, const ConvNetParams&) = default;
};

struct LayerSpec {
    int in_channels = 0;
    int out_channels = 0;
    Activation activation = Activation::ReLU;
};

/// Layer plan. The default is 4 conv layers in -> 32 -> 32 -> 16 -> 1 with
/// ReLU on the hidden layers and a linear head.
struct ArchConfig {
    int input_channels = 11;
    std::vector<int> hidden_channels{32, 32, 16};
    int output_channels = 1;

    std::vector<LayerSpec> layers() const {
        std::vector<LayerSpec> out;
        int in = input_channels;
        for (int h : hidden_channels) {
            out.push_back({in, h, Activation::ReLU});
            in = h;
        }
        out.push_back({in, output_channels, Activation::Linear});
        return out;
    }
};

/// He (fan-in) initialisation, zero biases; deterministic per seed.
template <typename T = float>
ConvNetParams<T> init_params(std::span<const LayerSpec> specs, std::uint64_t seed) {
    ConvNetParams<T> p;
    Rng rng(seed);
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& s = specs[i];
        if (s.in_channels < 1 || s.out_channels < 1)
            throw Error(ErrorKind::ConfigError, "channels", "layer channel counts must be positive");
        if (i > 0 && specs[i - 1].out_channels != s.in_channels)
            throw Error(ErrorKind::ConfigError, "channel mismatch", "consecutive layers disagree on channel count");
        ConvLayer<T> l{s.in_channels, s.out_channels, s.activation, {}, {}};
        const double stddev = std::sqrt(2.0 / static_cast<double>(l.fan_in()));
        l.weight.resize(static_cast<std::size_t>(s.out_channels) * l.fan_in());
        for (auto& w : l.weight) w = static_cast<T>(rng.normal(0.0, stddev));
        l.bias.assign(static_cast<std::size_t>(s.out_channels), T(0));
        p.layers.push_back(std::move(l));
    }
    if (p.layers.empty()) throw Error(ErrorKind::ConfigError, "layers", "network has no layers");
    return p;
}

template <typename T = float>
ConvNetParams<T> init_params(const ArchConfig& arch, std::uint64_t seed) {
    const auto specs = arch.layers();
    return init_params<T>(std::span<const LayerSpec>(specs), seed);
}

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using CStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

/// Zero-padded planar layout. Each channel occupies `stride` values: a guard
/// of `guard` zeros, the (H+2) x (W+2) padded grid, and another guard, so
/// every 3x3 tap of every padded position is a constant offset away.
struct PaddedLayout {
    int h = 0, w = 0;
    Eigen::Index wp = 0, plane = 0, guard = 0, stride = 0;

    explicit PaddedLayout(GridSize g)
        : h(g.height), w(g.width), wp(g.width + 2), plane(static_cast<Eigen::Index>(g.height + 2) * (g.width + 2)),
          guard(g.width + 3), stride(plane + 2 * (g.width + 3)) {}

    Eigen::Index at(int y, int x) const noexcept { return guard + (y + 1) * wp + (x + 1); }
    /// Offset of tap (ky, kx) relative to the start of the padded plane.
    Eigen::Index tap(int t) const noexcept { return guard + (t / kKernel - 1) * wp + (t % kKernel - 1); }
};

template <typename T>
void pad_into(const T* in, int channels, const PaddedLayout& L, std::vector<T>& out) {
    out.assign(static_cast<std::size_t>(channels * L.stride), T(0));
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < L.h; ++y)
            std::copy_n(in + (static_cast<std::size_t>(c) * L.h + y) * L.w, L.w, out.data() + c * L.stride + L.at(y, 0));
}

template <typename T>
void unpad(const T* in, int channels, const PaddedLayout& L, T* out) {
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < L.h; ++y)
            std::copy_n(in + c * L.stride + L.at(y, 0), L.w, out + (static_cast<std::size_t>(c) * L.h + y) * L.w);
}

/// Zeroes everything outside the H x W interior (padding ring and guards).
template <typename T>
void clear_border(T* buf, int channels, const PaddedLayout& L) {
    for (int c = 0; c < channels; ++c) {
        T* b = buf + c * L.stride;
        std::fill(b, b + L.at(0, 0), T(0));
        for (int y = 0; y + 1 < L.h; ++y) std::fill(b + L.at(y, L.w), b + L.at(y + 1, 0), T(0));
        std::fill(b + L.at(L.h - 1, L.w), b + L.stride, T(0));
    }
}

/// Per-tap weight matrices, [tap][out][in], from the [out][in][3][3] layout.
template <typename T>
void split_taps(const std::vector<T>& weight, int out_ch, int in_ch, std::vector<T>& taps) {
    taps.resize(weight.size());
    for (int o = 0; o < out_ch; ++o)
        for (int i = 0; i < in_ch; ++i)
            for (int t = 0; t < kTaps; ++t)
                taps[(static_cast<std::size_t>(t) * out_ch + o) * in_ch + i] =
                    weight[(static_cast<std::size_t>(o) * in_ch + i) * kTaps + t];
}

}  // namespace detail

/// Padded activations retained for the backward pass, plus reusable scratch.
template <typename T>
struct ForwardCache {
    GridSize size{};
    std::vector<std::vector<T>> inputs;       // padded input of each layer
    std::vector<std::vector<T>> activations;  // padded post-activation output of each layer
    std::vector<std::vector<T>> taps;         // per-tap weights of each layer
    mutable std::vector<T> delta, next;
};

template <typename T>
Tensor<T> forward(const ConvNetParams<T>& p, const Tensor<T>& input, ForwardCache<T>& cache) {
    if (p.layers.empty()) throw Error(ErrorKind::ConfigError, "layers", "network has no layers");
    if (input.channels() != p.input_channels())
        throw Error(ErrorKind::ShapeError, "input channels",
                    "expected " + std::to_string(p.input_channels()) + " channels, got " +
                        std::to_string(input.channels()));
    const detail::PaddedLayout L(input.size());
    const std::size_t nl = p.layers.size();
    cache.size = input.size();
    cache.inputs.resize(nl);
    cache.activations.resize(nl);
    cache.taps.resize(nl);
    detail::pad_into(input.data().data(), input.channels(), L, cache.inputs[0]);

    for (std::size_t li = 0; li < nl; ++li) {
        const auto& l = p.layers[li];
        detail::split_taps(l.weight, l.out_channels, l.in_channels, cache.taps[li]);
        auto& act = cache.activations[li];
        act.assign(static_cast<std::size_t>(l.out_channels * L.stride), T(0));
        detail::StridedMap<T> out(act.data() + L.guard, l.out_channels, L.plane, Eigen::OuterStride<>(L.stride));
        const T* in = cache.inputs[li].data();
        for (int t = 0; t < kTaps; ++t) {
            Eigen::Map<const detail::RowMat<T>> wt(cache.taps[li].data() + static_cast<std::size_t>(t) * l.out_channels * l.in_channels,
                                                   l.out_channels, l.in_channels);
            detail::CStridedMap<T> src(in + L.tap(t), l.in_channels, L.plane, Eigen::OuterStride<>(L.stride));
            out.noalias() += wt * src;
        }
        Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(l.bias.data(), l.out_channels);
        out.colwise() += b;
        if (l.activation == Activation::ReLU) out = out.cwiseMax(T(0));
        detail::clear_border(act.data(), l.out_channels, L);
        if (li + 1 < nl) cache.inputs[li + 1] = act;
    }
    Tensor<T> y(p.output_channels(), input.size());
    detail::unpad(cache.activations.back().data(), p.output_channels(), L, y.data().data());
    return y;
}

template <typename T>
Tensor<T> forward(const ConvNetParams<T>& p, const Tensor<T>& input) {
    ForwardCache<T> cache;
    return forward(p, input, cache);
}

template <typename T>
struct LayerGrad {
    std::vector<T> weight;
    std::vector<T> bias;
};

/// Parameter gradients, laid out like ConvNetParams.
template <typename T>
struct ParamGrads {
    std::vector<LayerGrad<T>> layers;

    static ParamGrads zeros_like(const ConvNetParams<T>& p) {
        ParamGrads g;
        for (const auto& l : p.layers) g.layers.push_back({std::vector<T>(l.weight.size()), std::vector<T>(l.bias.size())});
        return g;
    }
    void set_zero() {
        for (auto& l : layers) {
            std::fill(l.weight.begin(), l.weight.end(), T(0));
            std::fill(l.bias.begin(), l.bias.end(), T(0));
        }
    }
    void scale(T s) {
        for (auto& l : layers) {
            for (auto& v : l.weight) v *= s;
            for (auto& v : l.bias) v *= s;
        }
    }
};

enum class GradMode { ParamsAndInput, ParamsOnly, InputOnly };

/// Backward pass for a cached forward. Parameter gradients are *added* to
/// `acc` (unless mode is InputOnly); the input gradient is written to
/// `input_grad` when requested.
template <typename T>
void backward_into(const ConvNetParams<T>& p, const ForwardCache<T>& cache, const Tensor<T>& grad_output,
                   GradMode mode, ParamGrads<T>* acc, Tensor<T>* input_grad) {
    if (grad_output.channels() != p.output_channels() || grad_output.size() != cache.size ||
        cache.inputs.size() != p.layers.size())
        throw Error(ErrorKind::ShapeError, "grad_output", "gradient does not match the cached forward pass");
    const bool want_params = mode != GradMode::InputOnly;
    const bool want_input = mode != GradMode::ParamsOnly;
    if (want_params && (acc == nullptr || acc->layers.size() != p.layers.size()))
        throw Error(ErrorKind::ShapeError, "param_grads", "gradient accumulator does not match network");
    if (want_input && input_grad == nullptr)
        throw Error(ErrorKind::InvalidArgument, "input_grad", "input gradient requested without a destination");

    const detail::PaddedLayout L(cache.size);
    auto& delta = cache.delta;  // dL/d(padded output of the current layer), zero outside the interior
    auto& next = cache.next;
    detail::pad_into(grad_output.data().data(), grad_output.channels(), L, delta);
    std::vector<T> dw;
    for (std::size_t li = p.layers.size(); li-- > 0;) {
        const auto& l = p.layers[li];
        detail::StridedMap<T> dz(delta.data() + L.guard, l.out_channels, L.plane, Eigen::OuterStride<>(L.stride));
        if (l.activation == Activation::ReLU) {
            detail::CStridedMap<T> a(cache.activations[li].data() + L.guard, l.out_channels, L.plane,
                                     Eigen::OuterStride<>(L.stride));
            dz = (a.array() > T(0)).select(dz, T(0));
        }
        const T* in = cache.inputs[li].data();
        const auto tap_size = static_cast<std::size_t>(l.out_channels) * l.in_channels;
        if (want_params) {
            auto& g = acc->layers[li];
            dw.assign(g.weight.size(), T(0));
            for (int t = 0; t < kTaps; ++t) {
                Eigen::Map<detail::RowMat<T>> dwt(dw.data() + t * tap_size, l.out_channels, l.in_channels);
                detail::CStridedMap<T> src(in + L.tap(t), l.in_channels, L.plane, Eigen::OuterStride<>(L.stride));
                dwt.noalias() = dz * src.transpose();
            }
            for (int o = 0; o < l.out_channels; ++o)
                for (int i = 0; i < l.in_channels; ++i)
                    for (int t = 0; t < kTaps; ++t)
                        g.weight[(static_cast<std::size_t>(o) * l.in_channels + i) * kTaps + t] +=
                            dw[t * tap_size + static_cast<std::size_t>(o) * l.in_channels + i];
            Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(g.bias.data(), l.out_channels);
            db += dz.rowwise().sum();
        }
        if (li == 0 && !want_input) break;
        next.assign(static_cast<std::size_t>(l.in_channels * L.stride), T(0));
        for (int t = 0; t < kTaps; ++t) {
            Eigen::Map<const detail::RowMat<T>> wt(cache.taps[li].data() + t * tap_size, l.out_channels, l.in_channels);
            detail::StridedMap<T> dst(next.data() + L.tap(t), l.in_channels, L.plane, Eigen::OuterStride<>(L.stride));
            dst.noalias() += wt.transpose() * dz;
        }
        detail::clear_border(next.data(), l.in_channels, L);
        std::swap(delta, next);
    }
    if (want_input) {
        *input_grad = Tensor<T>(p.input_channels(), cache.size);
        detail::unpad(delta.data(), p.input_channels(), L, input_grad->data().data());
    }
}

template <typename T>
struct Gradients {
    ParamGrads<T> params;
    Tensor<T> input;
};

/// Exact gradients of <grad_output, forward(p, input)> w.r.t. parameters and input.
template <typename T>
Gradients<T> backward(const ConvNetParams<T>& p, const Tensor<T>& input, const Tensor<T>& grad_output) {
    ForwardCache<T> cache;
    forward(p, input, cache);
    Gradients<T> g{ParamGrads<T>::zeros_like(p), {}};
    backward_into(p, cache, grad_output, GradMode::ParamsAndInput, &g.params, &g.input);
    return g;
}

/// Adam optimiser state; moments are stored per parameter in the same
/// layout as the network.
template <typename T>
struct AdamState {
    std::uint64_t step = 0;
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    ParamGrads<T> m;
    ParamGrads<T> v;

    static AdamState for_params(const ConvNetParams<T>& p, double lr = 0.001) {
        AdamState s;
        s.lr = lr;
        s.m = ParamGrads<T>::zeros_like(p);
        s.v = ParamGrads<T>::zeros_like(p);
        return s;
    }
    friend bool operator==(const AdamState& a, const AdamState& b) {
        auto same = [](const ParamGrads<T>& x, const ParamGrads<T>& y) {
            if (x.layers.size() != y.layers.size()) return false;
            for (std::size_t i = 0; i < x.layers.size(); ++i)
                if (x.layers[i].weight != y.layers[i].weight || x.layers[i].bias != y.layers[i].bias) return false;
            return true;
        };
        return a.step == b.step && a.lr == b.lr && a.beta1 == b.beta1 && a.beta2 == b.beta2 && a.eps == b.eps &&
               same(a.m, b.m) && same(a.v, b.v);
    }
};

namespace detail {
template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v, double lr, double b1,
                 double b2, double eps, double c1, double c2) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        const double mi = b1 * m[i] + (1.0 - b1) * g;
        const double vi = b2 * v[i] + (1.0 - b2) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        param[i] = static_cast<T>(param[i] - lr * (mi / c1) / (std::sqrt(vi / c2) + eps));
    }
}
}  // namespace detail

/// One bias-corrected Adam update.
template <typename T>
void adam_step(ConvNetParams<T>& p, AdamState<T>& s, const ParamGrads<T>& grads) {
    if (grads.layers.size() != p.layers.size() || s.m.layers.size() != p.layers.size() ||
        s.v.layers.size() != p.layers.size())
        throw Error(ErrorKind::ShapeError, "adam", "optimizer state or gradients do not match the network");
    for (std::size_t i = 0; i < p.layers.size(); ++i)
        if (grads.layers[i].weight.size() != p.layers[i].weight.size() ||
            grads.layers[i].bias.size() != p.layers[i].bias.size() ||
            s.m.layers[i].weight.size() != p.layers[i].weight.size() ||
            s.v.layers[i].weight.size() != p.layers[i].weight.size())
            throw Error(ErrorKind::ShapeError, "adam", "layer " + std::to_string(i) + " shape mismatch");
    ++s.step;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        auto& l = p.layers[i];
        detail::adam_update<T>(l.weight, grads.layers[i].weight, s.m.layers[i].weight, s.v.layers[i].weight, s.lr,
                               s.beta1, s.beta2, s.eps, c1, c2);
        detail::adam_update<T>(l.bias, grads.layers[i].bias, s.m.layers[i].bias, s.v.layers[i].bias, s.lr, s.beta1,
                               s.beta2, s.eps, c1, c2);
    }
}

}  // namespace scio
