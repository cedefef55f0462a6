// Shared oracles for the unit tests and the acceptance runner.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "scio/heatmap_codec.hpp"
#include "scio/nnet.hpp"
#include "scio/rng.hpp"

namespace scio::testing {

/// Direct nested-loop 3x3 same-padding convolution stack.
template <typename T>
Tensor<double> naive_forward(const ConvNetParams<T>& p, const Tensor<T>& input) {
    const int h = input.height(), w = input.width();
    std::vector<double> cur(input.data().begin(), input.data().end());
    int channels = input.channels();
    for (const auto& l : p.layers) {
        std::vector<double> next(static_cast<std::size_t>(l.out_channels) * h * w);
        for (int o = 0; o < l.out_channels; ++o)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    double s = l.bias[static_cast<std::size_t>(o)];
                    for (int i = 0; i < channels; ++i)
                        for (int ky = 0; ky < 3; ++ky)
                            for (int kx = 0; kx < 3; ++kx) {
                                const int yy = y + ky - 1, xx = x + kx - 1;
                                if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                                const auto wi = ((static_cast<std::size_t>(o) * channels + i) * 3 + ky) * 3 + kx;
                                s += static_cast<double>(l.weight[wi]) *
                                     cur[(static_cast<std::size_t>(i) * h + yy) * w + xx];
                            }
                    if (l.activation == Activation::ReLU) s = std::max(s, 0.0);
                    next[(static_cast<std::size_t>(o) * h + y) * w + x] = s;
                }
        cur = std::move(next);
        channels = l.out_channels;
    }
    return Tensor<double>(channels, input.size(), std::move(cur));
}

inline Tensor<double> random_tensor(Rng& rng, int channels, GridSize g) {
    Tensor<double> t(channels, g);
    for (auto& v : t.data()) v = rng.normal();
    return t;
}

inline double dot(const Tensor<double>& a, const Tensor<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) s += a.data()[i] * b.data()[i];
    return s;
}

/// Which ReLU units are on; a finite difference is only meaningful when
/// both probes keep this pattern.
inline std::vector<bool> relu_pattern(const ConvNetParams<double>& p, const Tensor<double>& x) {
    ForwardCache<double> cache;
    forward(p, x, cache);
    std::vector<bool> on;
    for (std::size_t l = 0; l < p.layers.size(); ++l)
        if (p.layers[l].activation == Activation::ReLU)
            for (double v : cache.activations[l]) on.push_back(v > 0.0);
    return on;
}

struct FdReport {
    double max_rel_param = 0.0;
    double max_rel_input = 0.0;
    int checked = 0;
    int skipped = 0;  // probes that flipped a ReLU
};

inline double rel_error(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}); }

/// Central differences of <g, forward(p, x)> against the analytic backward pass,
/// over every parameter and every input value.
inline FdReport finite_difference_check(const ConvNetParams<double>& p, const Tensor<double>& x,
                                        const Tensor<double>& g, double h = 1e-3) {
    const auto grads = backward(p, x, g);
    const auto base = relu_pattern(p, x);
    FdReport r;
    auto probe = [&](auto&& perturb, double analytic, double& worst) {
        double plus = 0.0, minus = 0.0;
        bool same = true;
        perturb(h, [&](const ConvNetParams<double>& q, const Tensor<double>& y) {
            plus = dot(g, forward(q, y));
            same = same && relu_pattern(q, y) == base;
        });
        perturb(-h, [&](const ConvNetParams<double>& q, const Tensor<double>& y) {
            minus = dot(g, forward(q, y));
            same = same && relu_pattern(q, y) == base;
        });
        if (!same) {
            ++r.skipped;
            return;
        }
        ++r.checked;
        worst = std::max(worst, rel_error(analytic, (plus - minus) / (2.0 * h)));
    };

    auto q = p;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        for (std::size_t i = 0; i < p.layers[l].weight.size(); ++i)
            probe([&](double d, auto&& eval) {
                q.layers[l].weight[i] = p.layers[l].weight[i] + d;
                eval(q, x);
                q.layers[l].weight[i] = p.layers[l].weight[i];
            }, grads.params.layers[l].weight[i], r.max_rel_param);
        for (std::size_t i = 0; i < p.layers[l].bias.size(); ++i)
            probe([&](double d, auto&& eval) {
                q.layers[l].bias[i] = p.layers[l].bias[i] + d;
                eval(q, x);
                q.layers[l].bias[i] = p.layers[l].bias[i];
            }, grads.params.layers[l].bias[i], r.max_rel_param);
    }
    auto y = x;
    for (std::size_t i = 0; i < x.data().size(); ++i)
        probe([&](double d, auto&& eval) {
            y.data()[i] = x.data()[i] + d;
            eval(p, y);
            y.data()[i] = x.data()[i];
        }, grads.input.data()[i], r.max_rel_input);
    return r;
}

/// A random 2-layer network on an 8x8 grid with small positive hidden biases.
struct GradInstance {
    ConvNetParams<double> net;
    Tensor<double> input;
    Tensor<double> grad_output;
};

inline GradInstance random_instance(std::uint64_t seed) {
    Rng rng(seed);
    const int in = 1 + static_cast<int>(rng.below(3)), hidden = 2 + static_cast<int>(rng.below(3));
    const std::vector<LayerSpec> specs{{in, hidden, Activation::ReLU}, {hidden, 1, Activation::Linear}};
    auto net = init_params<double>(specs, rng.next_u64());
    for (auto& l : net.layers)
        for (auto& b : l.bias) b = rng.uniform(-0.1, 0.3);
    const GridSize g{8, 8};
    auto x = random_tensor(rng, in, g);
    auto go = random_tensor(rng, 1, g);
    return {std::move(net), std::move(x), std::move(go)};
}

/// Best value of f over the 0.25 px lattice inside the delta-disc around (x0, y0), clipped to the grid.
inline double exhaustive_min(const std::function<double(double, double)>& f, double x0, double y0, double delta,
                             GridSize g) {
    double best = f(x0, y0);
    const int n = static_cast<int>(std::ceil(delta / 0.25));
    for (int i = -n; i <= n; ++i)
        for (int j = -n; j <= n; ++j) {
            const double dx = 0.25 * i, dy = 0.25 * j;
            if (std::hypot(dx, dy) > delta) continue;
            const double x = x0 + dx, y = y0 + dy;
            if (x < 0 || y < 0 || x > g.width - 1.0 || y > g.height - 1.0) continue;
            best = std::min(best, f(x, y));
        }
    return best;
}

/// A smooth search problem: start point and an objective whose minimum lies
/// within 7 px per axis of it. Even trials are anisotropic quadratics, odd
/// ones inverted Gaussian wells.
struct SmoothTrial {
    double x0, y0;
    std::function<double(double, double)> f;
};

inline SmoothTrial smooth_trial(Rng& rng, int trial) {
    const double x0 = rng.uniform(10, 54), y0 = rng.uniform(10, 38);
    const double cx = x0 + rng.uniform(-7, 7), cy = y0 + rng.uniform(-7, 7);
    const double ax = rng.uniform(0.5, 2.0), ay = rng.uniform(0.5, 2.0), w = rng.uniform(1.5, 4.0);
    if (trial % 2 == 0)
        return {x0, y0, [=](double x, double y) { return ax * (x - cx) * (x - cx) + ay * (y - cy) * (y - cy); }};
    return {x0, y0, [=](double x, double y) {
                return 1.0 - std::exp(-(ax * (x - cx) * (x - cx) + ay * (y - cy) * (y - cy)) / (2 * w * w));
            }};
}

/// Near-optimality test used against the exhaustive lattice.
inline bool near_oracle(double got, double oracle) { return got - oracle <= std::max(1e-6, 0.05 * std::abs(oracle)); }

/// Plain loop over the OKS sum, written apart from the library code.
inline double oks_oracle(const std::vector<Keypoint>& pred, const std::vector<Keypoint>& gt, double s,
                         const std::vector<double>& k) {
    double top = 0.0, bottom = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const double vis = gt[i].visibility != Visibility::Invisible ? 1.0 : 0.0;
        const double d2 = std::pow(pred[i].x - gt[i].x, 2) + std::pow(pred[i].y - gt[i].y, 2);
        top += std::exp(-d2 / (2 * s * s * k[i] * k[i])) * vis;
        bottom += vis;
    }
    return top / bottom;
}

}  // namespace scio::testing
