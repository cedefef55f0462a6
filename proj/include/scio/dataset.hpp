// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "scio/error.hpp"
#include "scio/rng.hpp"
#include "scio/skeleton.hpp"
#include "scio/synth.hpp"
#include "scio/tensor_io.hpp"

namespace scio {

struct DatasetConfig {
    SkeletonSpec skeleton = coco17_preset();
    GeneratorConfig generator{};
    RenderConfig render{};
    int threads = 1;
};

struct DatasetManifest {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::size_t train = 0;
    std::size_t val = 0;
    GridSize heatmap{};
    GridSize canvas{};
    int feature_channels = kFeatureChannels;
    GaussianParams gaussian{};
    CorruptionConfig corruption{};
    std::string skeleton_name;
    std::string skeleton_config;
    std::vector<std::string> files;  // relative to the dataset root
};

/// Train/val split by index: the first n - n/10 samples train, the rest validate.
inline std::pair<std::size_t, std::size_t> split_counts(std::size_t n) noexcept { return {n - n / 10, n / 10}; }

inline std::string sample_file_name(std::size_t index) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "samples/%06zu.tns", index);
    return buf;
}

/// Deterministic generation of one sample from its (seed, index) substream.
inline ObservedSample generate_sample(std::uint64_t seed, std::size_t index, const DatasetConfig& cfg) {
    Rng rng = Rng::substream(seed, index);
    const auto pose = sample_pose(rng, cfg.generator, cfg.skeleton);
    return render_observation(pose, cfg.skeleton, cfg.render, rng);
}

namespace detail {

inline std::uint32_t u32(int v) { return static_cast<std::uint32_t>(v); }

inline std::vector<TensorRecord<float>> sample_records(const ObservedSample& s) {
    const int k = s.num_keypoints();
    const GridSize g = s.grid();
    std::vector<TensorRecord<float>> r;
    r.push_back({{u32(k), u32(g.height), u32(g.width)}, s.gt_heatmaps.data()});
    r.push_back({{u32(k), u32(g.height), u32(g.width)}, s.obs_heatmaps.data()});
    r.push_back({{u32(s.feature_map.channels()), u32(g.height), u32(g.width)}, s.feature_map.data()});
    TensorRecord<float> kp{{u32(k), 4}, {}};
    for (const auto& p : s.pose.keypoints) {
        kp.values.push_back(static_cast<float>(p.x));
        kp.values.push_back(static_cast<float>(p.y));
        kp.values.push_back(static_cast<float>(p.confidence));
        kp.values.push_back(static_cast<float>(static_cast<int>(p.visibility)));
    }
    r.push_back(std::move(kp));
    // canvas width, canvas height, person scale, bone lengths
    TensorRecord<float> meta{{u32(3 + static_cast<int>(s.pose.bone_lengths.size()))}, {}};
    meta.values.push_back(static_cast<float>(s.pose.canvas.width));
    meta.values.push_back(static_cast<float>(s.pose.canvas.height));
    meta.values.push_back(static_cast<float>(s.pose.person_scale));
    for (double b : s.pose.bone_lengths) meta.values.push_back(static_cast<float>(b));
    r.push_back(std::move(meta));
    return r;
}

inline ObservedSample sample_from_records(std::vector<TensorRecord<float>> r, const std::string& where) {
    auto bad = [&](const char* what) { return Error(ErrorKind::FormatError, what, where + ": " + what); };
    if (r.size() != 5) throw bad("record count");
    auto grid3 = [&](const TensorRecord<float>& t) {
        if (t.dims.size() != 3) throw bad("grid rank");
        return GridSize{static_cast<int>(t.dims[2]), static_cast<int>(t.dims[1])};
    };
    const GridSize g = grid3(r[0]);
    if (grid3(r[1]) != g || grid3(r[2]) != g || r[1].dims[0] != r[0].dims[0]) throw bad("grid dims");
    const int k = static_cast<int>(r[0].dims[0]);
    ObservedSample s{Tensor<float>(k, g, std::move(r[0].values)), Tensor<float>(k, g, std::move(r[1].values)),
                     Tensor<float>(static_cast<int>(r[2].dims[0]), g, std::move(r[2].values)), {}};
    if (r[3].dims != std::vector<std::uint32_t>{static_cast<std::uint32_t>(k), 4}) throw bad("keypoints");
    for (int i = 0; i < k; ++i) {
        const float* v = r[3].values.data() + 4 * i;
        const int vis = static_cast<int>(v[3]);
        if (vis < 0 || vis > 2) throw bad("visibility");
        s.pose.keypoints.push_back({v[0], v[1], v[2], static_cast<Visibility>(vis)});
    }
    if (r[4].dims.size() != 1 || r[4].values.size() < 3) throw bad("meta");
    s.pose.canvas = {static_cast<int>(r[4].values[0]), static_cast<int>(r[4].values[1])};
    s.pose.person_scale = r[4].values[2];
    for (std::size_t i = 3; i < r[4].values.size(); ++i) s.pose.bone_lengths.push_back(r[4].values[i]);
    return s;
}

/// Runs `fn(i)` for i in [0, n) over up to `threads` workers; rethrows the first failure.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!failure) failure = std::current_exception();
                    next = n;
                }
            }
        });
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

inline nlohmann::json to_json(const DatasetManifest& m) {
    const auto& c = m.corruption;
    return {
        {"format", "scio-dataset"},
        {"version", 1},
        {"n", m.n},
        {"seed", m.seed},
        {"splits", {{"train", m.train}, {"val", m.val}}},
        {"heatmap", {{"width", m.heatmap.width}, {"height", m.heatmap.height}}},
        {"canvas", {{"width", m.canvas.width}, {"height", m.canvas.height}}},
        {"feature_channels", m.feature_channels},
        {"gaussian",
         {{"sigma", m.gaussian.sigma},
          {"amplitude_mode", m.gaussian.amplitude_mode == AmplitudeMode::UnitPeak ? "unit_peak" : "density"}}},
        {"corruption",
         {{"terminal_shift_max", c.terminal_shift_max},
          {"distractor_prob", c.distractor_prob},
          {"distractor_amp", c.distractor_amp},
          {"attenuation_range", {c.attenuation_range.lo, c.attenuation_range.hi}},
          {"base_noise_std", c.base_noise_std},
          {"distractor_radius", {c.distractor_radius.lo, c.distractor_radius.hi}}}},
        {"skeleton", {{"name", m.skeleton_name}, {"config", m.skeleton_config}}},
        {"files", m.files},
    };
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format") != "scio-dataset") throw Error(ErrorKind::FormatError, "format", "not a dataset manifest");
        DatasetManifest m;
        m.n = j.at("n");
        m.seed = j.at("seed");
        m.train = j.at("splits").at("train");
        m.val = j.at("splits").at("val");
        m.heatmap = {j.at("heatmap").at("width"), j.at("heatmap").at("height")};
        m.canvas = {j.at("canvas").at("width"), j.at("canvas").at("height")};
        m.feature_channels = j.at("feature_channels");
        m.gaussian.sigma = j.at("gaussian").at("sigma");
        m.gaussian.amplitude_mode = j.at("gaussian").at("amplitude_mode") == "unit_peak" ? AmplitudeMode::UnitPeak
                                                                                         : AmplitudeMode::Eq1Literal;
        const auto& c = j.at("corruption");
        m.corruption.terminal_shift_max = c.at("terminal_shift_max");
        m.corruption.distractor_prob = c.at("distractor_prob");
        m.corruption.distractor_amp = c.at("distractor_amp");
        m.corruption.attenuation_range = {c.at("attenuation_range").at(0), c.at("attenuation_range").at(1)};
        m.corruption.base_noise_std = c.at("base_noise_std");
        m.corruption.distractor_radius = {c.at("distractor_radius").at(0), c.at("distractor_radius").at(1)};
        m.skeleton_name = j.at("skeleton").at("name");
        m.skeleton_config = j.at("skeleton").at("config");
        m.files = j.at("files").get<std::vector<std::string>>();
        if (m.files.size() != m.n || m.train + m.val != m.n)
            throw Error(ErrorKind::FormatError, "files", "manifest counts disagree");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::FormatError, "manifest", e.what());
    }
}

/// Writes `n` samples plus manifest.json under `out`. Output bytes depend only
/// on (n, seed, cfg), never on the thread count.
inline DatasetManifest build_dataset(std::size_t n, std::uint64_t seed, const std::filesystem::path& out,
                                     const DatasetConfig& cfg) {
    if (n < 1) throw Error(ErrorKind::InvalidArgument, "n", "dataset needs at least one sample");
    validate(cfg.skeleton);
    cfg.generator.validate();
    cfg.render.corruption.validate();
    std::error_code ec;
    std::filesystem::create_directories(out / "samples", ec);
    if (ec) throw Error(ErrorKind::IoError, "mkdir", "cannot create " + (out / "samples").string() + ": " + ec.message());

    DatasetManifest m;
    m.n = n;
    m.seed = seed;
    std::tie(m.train, m.val) = split_counts(n);
    m.heatmap = cfg.render.heatmap;
    m.canvas = cfg.generator.canvas;
    m.gaussian = cfg.render.gaussian;
    m.corruption = cfg.render.corruption;
    m.skeleton_name = cfg.skeleton.name;
    m.skeleton_config = to_config_text(cfg.skeleton);
    for (std::size_t i = 0; i < n; ++i) m.files.push_back(sample_file_name(i));

    detail::parallel_for(n, cfg.threads, [&](std::size_t i) {
        const auto s = generate_sample(seed, i, cfg);
        const auto recs = detail::sample_records(s);
        write_tensors<float>(out / m.files[i], recs);
    });

    std::ofstream mf(out / "manifest.json", std::ios::trunc);
    if (!mf) throw Error(ErrorKind::IoError, "open", "cannot write manifest in " + out.string());
    mf << to_json(m).dump(2) << '\n';
    if (!mf) throw Error(ErrorKind::IoError, "write", "failed writing manifest");
    return m;
}

struct Dataset {
    DatasetManifest manifest;
    SkeletonSpec skeleton;
    std::vector<ObservedSample> samples;

    std::span<const ObservedSample> train() const { return std::span(samples).first(manifest.train); }
    std::span<const ObservedSample> val() const { return std::span(samples).subspan(manifest.train); }
};

inline DatasetManifest read_manifest(const std::filesystem::path& root) {
    std::ifstream in(root / "manifest.json");
    if (!in) throw Error(ErrorKind::IoError, "open", "cannot read " + (root / "manifest.json").string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::FormatError, "manifest", e.what());
    }
    return manifest_from_json(j);
}

inline ObservedSample load_sample(const std::filesystem::path& file) {
    return detail::sample_from_records(read_tensors<float>(file), file.string());
}

inline Dataset load_dataset(const std::filesystem::path& root, int threads = 1) {
    Dataset d;
    d.manifest = read_manifest(root);
    d.skeleton = load_skeleton(d.manifest.skeleton_config);
    d.samples.resize(d.manifest.n);
    detail::parallel_for(d.manifest.n, threads,
                         [&](std::size_t i) { d.samples[i] = load_sample(root / d.manifest.files[i]); });
    for (const auto& s : d.samples)
        if (s.num_keypoints() != d.skeleton.num_keypoints() || s.grid() != d.manifest.heatmap)
            throw Error(ErrorKind::FormatError, "sample", "sample shape disagrees with manifest");
    return d;
}

}  // namespace scio
