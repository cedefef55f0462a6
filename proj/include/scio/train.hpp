// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "scio/checkpoint.hpp"
#include "scio/dataset.hpp"
#include "scio/error.hpp"
#include "scio/grid.hpp"
#include "scio/nnet.hpp"
#include "scio/rng.hpp"
#include "scio/skeleton.hpp"
#include "scio/synth.hpp"

namespace scio {

// ---------------------------------------------------------------- losses

/// Mean squared difference, accumulated in double in index order.
template <typename T>
double mse(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size() || a.empty()) throw Error(ErrorKind::ShapeError, "grid", "loss operands differ in size");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

template <typename T>
double heatmap_loss(const BasicHeatmap<T>& a, const BasicHeatmap<T>& b) {
    if (a.size() != b.size()) throw Error(ErrorKind::ShapeError, "grid", "heatmaps differ in size");
    return mse<T>(a.values(), b.values());
}

/// d mse(a, b) / d a.
template <typename T>
Tensor<T> mse_grad(const Tensor<T>& a, std::span<const T> b) {
    Tensor<T> g(a.channels(), a.size());
    const T scale = T(2) / static_cast<T>(a.data().size());
    for (std::size_t i = 0; i < b.size(); ++i) g.data()[i] = scale * (a.data()[i] - b[i]);
    return g;
}

// ---------------------------------------------------------------- group views

/// One sample seen through one structural group. Heatmap tensors are
/// K x H x W; features are C x H x W.
template <typename T>
struct GroupView {
    const Tensor<T>& observed;
    const Tensor<T>& truth;
    const Tensor<T>& features;
    StructuralGroup group;
};

inline GroupView<float> group_view(const ObservedSample& s, const StructuralGroup& g) {
    return {s.obs_heatmaps, s.gt_heatmaps, s.feature_map, g};
}

/// Stacks three heatmap channels followed by the feature channels.
template <typename T>
Tensor<T> stack_input(const Tensor<T>& heatmaps, std::array<int, 3> slots, const Tensor<T>& features) {
    if (heatmaps.size() != features.size())
        throw Error(ErrorKind::ShapeError, "grid", "heatmaps and features differ in size");
    Tensor<T> x(3 + features.channels(), heatmaps.size());
    for (int i = 0; i < 3; ++i) {
        if (slots[static_cast<std::size_t>(i)] < 0 || slots[static_cast<std::size_t>(i)] >= heatmaps.channels())
            throw Error(ErrorKind::IndexError, "slot", "group references a missing keypoint");
        auto src = heatmaps.channel(slots[static_cast<std::size_t>(i)]);
        std::copy(src.begin(), src.end(), x.channel(i).begin());
    }
    std::copy(features.data().begin(), features.data().end(), x.data().begin() + 3 * static_cast<std::ptrdiff_t>(x.plane()));
    return x;
}

template <typename T>
void replace_channel(Tensor<T>& x, int c, std::span<const T> plane) {
    if (plane.size() != x.plane()) throw Error(ErrorKind::ShapeError, "plane", "replacement plane size mismatch");
    std::copy(plane.begin(), plane.end(), x.channel(c).begin());
}

template <typename T>
Tensor<T> phi_input(const GroupView<T>& v) {
    return stack_input(v.observed, group_slots(v.group, StackOrder::ForPhi), v.features);
}

template <typename T>
Tensor<T> gamma_input(const GroupView<T>& v) {
    return stack_input(v.observed, group_slots(v.group, StackOrder::ForGamma), v.features);
}

/// Applies a network: either ConvNetParams or any callable Tensor -> Tensor.
template <typename T, typename Net>
Tensor<T> apply_net(const Net& net, const Tensor<T>& x) {
    Tensor<T> y;
    if constexpr (std::is_same_v<Net, ConvNetParams<T>>)
        y = forward(net, x);
    else
        y = net(x);
    if (y.channels() != 1 || y.size() != x.size())
        throw Error(ErrorKind::ShapeError, "output", "network must return one channel on the input grid");
    return y;
}

// ---------------------------------------------------------------- loss terms

struct PredictionLosses {
    double objective = 0.0;        // L_P^O
    double self_constraint = 0.0;  // L_P^S
    double total = 0.0;            // L_P
};

/// L_P^O = mse(phi(A, B, C; f), gt_D); L_P^S = mse(gamma(B, C, phi(...); f), gt_A).
template <typename T, typename Phi, typename Gamma>
PredictionLosses prediction_losses(const Phi& phi, const Gamma& gamma, const GroupView<T>& v) {
    const auto d_hat = apply_net<T>(phi, phi_input(v));
    auto xg = gamma_input(v);
    replace_channel<T>(xg, 2, d_hat.channel(0));
    const auto a_hat = apply_net<T>(gamma, xg);
    PredictionLosses l;
    l.objective = mse<T>(d_hat.channel(0), v.truth.channel(v.group.terminal));
    l.self_constraint = mse<T>(a_hat.channel(0), v.truth.channel(v.group.anchor()));
    l.total = l.objective + l.self_constraint;
    return l;
}

struct VerificationLosses {
    double anchor = 0.0;    // mse(gamma(B, C, D; f), gt_A)
    double terminal = 0.0;  // mse(phi(gamma(...), B, C; f), gt_D)
    double total = 0.0;     // L_V
};

template <typename T, typename Gamma, typename Phi>
VerificationLosses verification_losses(const Gamma& gamma, const Phi& phi, const GroupView<T>& v) {
    const auto a_hat = apply_net<T>(gamma, gamma_input(v));
    auto xp = phi_input(v);
    replace_channel<T>(xp, 0, a_hat.channel(0));
    const auto d_hat = apply_net<T>(phi, xp);
    VerificationLosses l;
    l.anchor = mse<T>(a_hat.channel(0), v.truth.channel(v.group.anchor()));
    l.terminal = mse<T>(d_hat.channel(0), v.truth.channel(v.group.terminal));
    l.total = l.anchor + l.terminal;
    return l;
}

// ---------------------------------------------------------------- gradient steps

enum class Phase { Warmup, Prediction, Verification };

inline const char* to_string(Phase p) {
    switch (p) {
        case Phase::Warmup: return "warmup";
        case Phase::Prediction: return "prediction";
        case Phase::Verification: return "verification";
    }
    return "?";
}

/// Epochs before `warmup` train both networks independently; afterwards
/// alternation starts with the prediction network.
inline Phase phase_of(int epoch, int warmup) noexcept {
    if (epoch < warmup) return Phase::Warmup;
    return (epoch - warmup) % 2 == 0 ? Phase::Prediction : Phase::Verification;
}

/// All four logged quantities for one (sample, group).
struct SampleLosses {
    double lp_o = 0.0, lp_s = 0.0, lv_a = 0.0, lv_d = 0.0;
    double lp() const noexcept { return lp_o + lp_s; }
    double lv() const noexcept { return lv_a + lv_d; }
};

template <typename T>
struct StepScratch {
    ForwardCache<T> phi_cache, gamma_cache, extra;
};

/// One training step's worth of gradients for a (sample, group). Gradients
/// are added to `phi_acc` / `gamma_acc` according to the phase:
///   Warmup:       phi on L_P^O, gamma on mse(gamma(B, C, D), gt_A)
///   Prediction:   phi on L_P (the L_P^S term reaches phi through gamma's input gradient)
///   Verification: gamma on L_V (the second term reaches gamma through phi's input gradient)
/// Every loss term is evaluated in every phase so the report is complete.
template <typename T>
SampleLosses train_step(const ConvNetParams<T>& phi, const ConvNetParams<T>& gamma, const GroupView<T>& v, Phase phase,
                        ParamGrads<T>* phi_acc, ParamGrads<T>* gamma_acc, StepScratch<T>& ws) {
    const int a = v.group.anchor(), d = v.group.terminal;
    const auto gt_a = v.truth.channel(a);
    const auto gt_d = v.truth.channel(d);
    SampleLosses out;
    const auto xp = phi_input(v);
    const auto xg = gamma_input(v);

    switch (phase) {
        case Phase::Warmup: {
            const auto d_hat = forward(phi, xp, ws.phi_cache);
            out.lp_o = mse<T>(d_hat.channel(0), gt_d);
            if (phi_acc) backward_into<T>(phi, ws.phi_cache, mse_grad(d_hat, gt_d), GradMode::ParamsOnly, phi_acc, nullptr);
            const auto a_hat = forward(gamma, xg, ws.gamma_cache);
            out.lv_a = mse<T>(a_hat.channel(0), gt_a);
            if (gamma_acc)
                backward_into<T>(gamma, ws.gamma_cache, mse_grad(a_hat, gt_a), GradMode::ParamsOnly, gamma_acc, nullptr);
            auto xg2 = xg;
            replace_channel<T>(xg2, 2, d_hat.channel(0));
            out.lp_s = mse<T>(forward(gamma, xg2, ws.extra).channel(0), gt_a);
            auto xp2 = xp;
            replace_channel<T>(xp2, 0, a_hat.channel(0));
            out.lv_d = mse<T>(forward(phi, xp2, ws.extra).channel(0), gt_d);
            break;
        }
        case Phase::Prediction: {
            const auto d_hat = forward(phi, xp, ws.phi_cache);
            out.lp_o = mse<T>(d_hat.channel(0), gt_d);
            auto xg2 = xg;
            replace_channel<T>(xg2, 2, d_hat.channel(0));
            const auto a_self = forward(gamma, xg2, ws.gamma_cache);
            out.lp_s = mse<T>(a_self.channel(0), gt_a);
            if (phi_acc) {
                Tensor<T> dx;
                backward_into<T>(gamma, ws.gamma_cache, mse_grad(a_self, gt_a), GradMode::InputOnly, nullptr, &dx);
                auto gd = mse_grad(d_hat, gt_d);
                const auto through = dx.channel(2);
                for (std::size_t i = 0; i < through.size(); ++i) gd.data()[i] += through[i];
                backward_into<T>(phi, ws.phi_cache, gd, GradMode::ParamsOnly, phi_acc, nullptr);
            }
            const auto a_hat = forward(gamma, xg, ws.extra);
            out.lv_a = mse<T>(a_hat.channel(0), gt_a);
            auto xp2 = xp;
            replace_channel<T>(xp2, 0, a_hat.channel(0));
            out.lv_d = mse<T>(forward(phi, xp2, ws.extra).channel(0), gt_d);
            break;
        }
        case Phase::Verification: {
            const auto a_hat = forward(gamma, xg, ws.gamma_cache);
            out.lv_a = mse<T>(a_hat.channel(0), gt_a);
            auto xp2 = xp;
            replace_channel<T>(xp2, 0, a_hat.channel(0));
            const auto d_cycle = forward(phi, xp2, ws.phi_cache);
            out.lv_d = mse<T>(d_cycle.channel(0), gt_d);
            if (gamma_acc) {
                Tensor<T> dx;
                backward_into<T>(phi, ws.phi_cache, mse_grad(d_cycle, gt_d), GradMode::InputOnly, nullptr, &dx);
                auto ga = mse_grad(a_hat, gt_a);
                const auto through = dx.channel(0);
                for (std::size_t i = 0; i < through.size(); ++i) ga.data()[i] += through[i];
                backward_into<T>(gamma, ws.gamma_cache, ga, GradMode::ParamsOnly, gamma_acc, nullptr);
            }
            const auto d_hat = forward(phi, xp, ws.extra);
            out.lp_o = mse<T>(d_hat.channel(0), gt_d);
            auto xg2 = xg;
            replace_channel<T>(xg2, 2, d_hat.channel(0));
            out.lp_s = mse<T>(forward(gamma, xg2, ws.extra).channel(0), gt_a);
            break;
        }
    }
    return out;
}

/// Gradient of L_P with respect to phi's parameters, gamma frozen.
template <typename T>
ParamGrads<T> prediction_gradient(const ConvNetParams<T>& phi, const ConvNetParams<T>& gamma, const GroupView<T>& v) {
    auto g = ParamGrads<T>::zeros_like(phi);
    StepScratch<T> ws;
    train_step<T>(phi, gamma, v, Phase::Prediction, &g, nullptr, ws);
    return g;
}

/// Gradient of L_V with respect to gamma's parameters, phi frozen.
template <typename T>
ParamGrads<T> verification_gradient(const ConvNetParams<T>& gamma, const ConvNetParams<T>& phi,
                                    const GroupView<T>& v) {
    auto g = ParamGrads<T>::zeros_like(gamma);
    StepScratch<T> ws;
    train_step<T>(phi, gamma, v, Phase::Verification, nullptr, &g, ws);
    return g;
}

// ---------------------------------------------------------------- training

enum class GroupMode { PerGroup, Shared };

struct TrainConfig {
    int epochs = 210;
    int batch_size = 36;
    double lr = 0.001;
    int warmup_epochs = 5;
    std::uint64_t seed = 0;
    GroupMode group_mode = GroupMode::PerGroup;
    std::vector<int> hidden_channels{32, 32, 16};
    int threads = 1;

    void validate() const {
        if (epochs < 1) throw Error(ErrorKind::ConfigError, "epochs", "epochs must be >= 1");
        if (batch_size < 1) throw Error(ErrorKind::ConfigError, "batch_size", "batch size must be >= 1");
        if (!(lr > 0.0)) throw Error(ErrorKind::ConfigError, "lr", "learning rate must be > 0");
        if (warmup_epochs < 0) throw Error(ErrorKind::ConfigError, "warmup_epochs", "warmup must be >= 0");
        for (int h : hidden_channels)
            if (h < 1) throw Error(ErrorKind::ConfigError, "hidden_channels", "hidden widths must be >= 1");
    }
};

struct NetPair {
    ConvNetParams<float> phi, gamma;
    AdamState<float> phi_opt, gamma_opt;
};

struct LossRow {
    int epoch = 0;  // 1-based
    std::string group;
    Phase phase = Phase::Warmup;
    double lp_o = 0.0, lp_s = 0.0, lp = 0.0, lv = 0.0;
};

/// Per-epoch loss means, one row per (epoch, group) plus an "all" row per
/// epoch averaging the groups.
struct LossReport {
    std::vector<LossRow> rows;

    const LossRow& at(int epoch, std::string_view group) const {
        for (const auto& r : rows)
            if (r.epoch == epoch && r.group == group) return r;
        throw Error(ErrorKind::IndexError, "epoch", "no loss row for epoch " + std::to_string(epoch));
    }
    int epochs() const noexcept { return rows.empty() ? 0 : rows.back().epoch; }
    friend bool operator==(const LossReport& a, const LossReport& b) {
        if (a.rows.size() != b.rows.size()) return false;
        for (std::size_t i = 0; i < a.rows.size(); ++i) {
            const auto &x = a.rows[i], &y = b.rows[i];
            if (x.epoch != y.epoch || x.group != y.group || x.phase != y.phase || x.lp_o != y.lp_o ||
                x.lp_s != y.lp_s || x.lp != y.lp || x.lv != y.lv)
                return false;
        }
        return true;
    }
};

inline void write_loss_csv(std::ostream& out, const LossReport& r) {
    out << "epoch,group,phase,L_P^O,L_P^S,L_P,L_V\n";
    char buf[256];
    for (const auto& row : r.rows) {
        std::snprintf(buf, sizeof buf, "%d,%s,%s,%.17g,%.17g,%.17g,%.17g\n", row.epoch, row.group.c_str(),
                      to_string(row.phase), row.lp_o, row.lp_s, row.lp, row.lv);
        out << buf;
    }
}

struct TrainResult {
    GroupMode mode = GroupMode::PerGroup;
    std::vector<std::string> groups;
    std::vector<NetPair> nets;  // one per group, or a single shared pair
    LossReport report;

    const NetPair& for_group(std::size_t g) const { return nets.at(mode == GroupMode::Shared ? 0 : g); }
};

namespace detail {

inline std::uint64_t net_seed(std::uint64_t seed, std::size_t slot) { return Rng::substream(seed, slot).next_u64(); }

struct GroupSums {
    double lp_o = 0, lp_s = 0, lv_a = 0, lv_d = 0;
    void add(const SampleLosses& s) { lp_o += s.lp_o, lp_s += s.lp_s, lv_a += s.lv_a, lv_d += s.lv_d; }
};

}  // namespace detail

using EpochCallback = std::function<void(const LossRow&)>;

/// Self-constrained learning over the training samples.
inline TrainResult train(std::span<const ObservedSample> data, const SkeletonSpec& skeleton, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
    cfg.validate();
    if (data.empty()) throw Error(ErrorKind::EmptyDataset, "data", "no training samples");
    validate(skeleton);
    for (const auto& s : data)
        if (s.num_keypoints() != skeleton.num_keypoints() || s.grid() != data.front().grid() ||
            s.feature_map.channels() != data.front().feature_map.channels())
            throw Error(ErrorKind::ShapeError, "sample", "training samples disagree in shape");

    const auto n_groups = skeleton.groups.size();
    const ArchConfig arch{3 + data.front().feature_map.channels(), cfg.hidden_channels, 1};
    TrainResult res;
    res.mode = cfg.group_mode;
    for (const auto& g : skeleton.groups) res.groups.push_back(g.name);
    const std::size_t n_pairs = cfg.group_mode == GroupMode::Shared ? 1 : n_groups;
    for (std::size_t p = 0; p < n_pairs; ++p) {
        NetPair np;
        np.phi = init_params<float>(arch, detail::net_seed(cfg.seed, 2 * p));
        np.gamma = init_params<float>(arch, detail::net_seed(cfg.seed, 2 * p + 1));
        np.phi_opt = AdamState<float>::for_params(np.phi, cfg.lr);
        np.gamma_opt = AdamState<float>::for_params(np.gamma, cfg.lr);
        res.nets.push_back(std::move(np));
    }

    const std::size_t n = data.size();
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    std::vector<std::size_t> order(n);
    const std::uint64_t shuffle_seed = Rng::mix(cfg.seed ^ 0x5348554646ULL);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const Phase phase = phase_of(epoch, cfg.warmup_epochs);
        const bool upd_phi = phase != Phase::Verification;
        const bool upd_gamma = phase != Phase::Prediction;
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffler = Rng::substream(shuffle_seed, static_cast<std::uint64_t>(epoch));
        shuffler.shuffle(std::span(order));

        std::vector<detail::GroupSums> sums(n_groups);
        // Each worker owns one network pair: per group, or the whole shared pair.
        auto run_pair = [&](std::size_t p) {
            NetPair& np = res.nets[p];
            std::vector<std::size_t> groups;
            if (cfg.group_mode == GroupMode::Shared)
                for (std::size_t g = 0; g < n_groups; ++g) groups.push_back(g);
            else
                groups.push_back(p);
            auto gphi = ParamGrads<float>::zeros_like(np.phi);
            auto ggam = ParamGrads<float>::zeros_like(np.gamma);
            StepScratch<float> ws;
            for (std::size_t start = 0; start < n; start += bs) {
                const std::size_t end = std::min(n, start + bs);
                gphi.set_zero();
                ggam.set_zero();
                for (std::size_t i = start; i < end; ++i)
                    for (std::size_t g : groups) {
                        const auto v = group_view(data[order[i]], skeleton.groups[g]);
                        sums[g].add(train_step<float>(np.phi, np.gamma, v, phase, upd_phi ? &gphi : nullptr,
                                                      upd_gamma ? &ggam : nullptr, ws));
                    }
                const float inv = 1.0f / static_cast<float>((end - start) * groups.size());
                if (upd_phi) {
                    gphi.scale(inv);
                    adam_step(np.phi, np.phi_opt, gphi);
                }
                if (upd_gamma) {
                    ggam.scale(inv);
                    adam_step(np.gamma, np.gamma_opt, ggam);
                }
            }
        };
        detail::parallel_for(n_pairs, cfg.threads, run_pair);

        LossRow all{epoch + 1, "all", phase, 0, 0, 0, 0};
        for (std::size_t g = 0; g < n_groups; ++g) {
            const double dn = static_cast<double>(n);
            LossRow r{epoch + 1, skeleton.groups[g].name, phase, sums[g].lp_o / dn, sums[g].lp_s / dn, 0.0,
                      (sums[g].lv_a + sums[g].lv_d) / dn};
            r.lp = r.lp_o + r.lp_s;
            all.lp_o += r.lp_o / static_cast<double>(n_groups);
            all.lp_s += r.lp_s / static_cast<double>(n_groups);
            all.lv += r.lv / static_cast<double>(n_groups);
            res.report.rows.push_back(r);
            if (on_epoch) on_epoch(r);
        }
        all.lp = all.lp_o + all.lp_s;
        res.report.rows.push_back(all);
        if (on_epoch) on_epoch(all);
    }
    return res;
}

// ---------------------------------------------------------------- persistence

inline std::string checkpoint_name(const std::string& group, const char* role) { return group + "_" + role + ".ckpt"; }

/// Writes checkpoints per group per role, models.json and loss_report.csv.
inline void save_models(const TrainResult& r, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::IoError, "mkdir", "cannot create " + dir.string());
    nlohmann::json j{{"format", "scio-models"},
                     {"version", 1},
                     {"group_mode", r.mode == GroupMode::Shared ? "shared" : "per_group"},
                     {"groups", r.groups}};
    if (r.mode == GroupMode::Shared) {
        save_checkpoint(r.nets.at(0).phi, r.nets[0].phi_opt, dir / checkpoint_name("shared", "phi"));
        save_checkpoint(r.nets[0].gamma, r.nets[0].gamma_opt, dir / checkpoint_name("shared", "gamma"));
    } else {
        for (std::size_t g = 0; g < r.groups.size(); ++g) {
            save_checkpoint(r.nets.at(g).phi, r.nets[g].phi_opt, dir / checkpoint_name(r.groups[g], "phi"));
            save_checkpoint(r.nets[g].gamma, r.nets[g].gamma_opt, dir / checkpoint_name(r.groups[g], "gamma"));
        }
    }
    std::ofstream mj(dir / "models.json", std::ios::trunc);
    mj << j.dump(2) << '\n';
    std::ofstream csv(dir / "loss_report.csv", std::ios::trunc);
    write_loss_csv(csv, r.report);
    if (!mj || !csv) throw Error(ErrorKind::IoError, "write", "failed writing model metadata in " + dir.string());
}

/// Loads every checkpoint listed in models.json. The loss report is not read back.
inline TrainResult load_models(const std::filesystem::path& dir) {
    std::ifstream in(dir / "models.json");
    if (!in) throw Error(ErrorKind::MissingModel, "models.json", "no models.json in " + dir.string());
    TrainResult r;
    try {
        nlohmann::json j;
        in >> j;
        r.mode = j.at("group_mode") == "shared" ? GroupMode::Shared : GroupMode::PerGroup;
        r.groups = j.at("groups").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::FormatError, "models.json", e.what());
    }
    std::vector<std::string> names = r.mode == GroupMode::Shared ? std::vector<std::string>{"shared"} : r.groups;
    for (const auto& name : names) {
        NetPair np;
        for (const char* role : {"phi", "gamma"}) {
            const auto path = dir / checkpoint_name(name, role);
            if (!std::filesystem::exists(path))
                throw Error(ErrorKind::MissingModel, name, "missing checkpoint " + path.string());
            auto ck = load_checkpoint<float>(path);
            (std::string_view(role) == "phi" ? np.phi : np.gamma) = std::move(ck.params);
            (std::string_view(role) == "phi" ? np.phi_opt : np.gamma_opt) = std::move(ck.adam);
        }
        r.nets.push_back(std::move(np));
    }
    return r;
}

}  // namespace scio
