// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scio/annotations.hpp"
#include "scio/dataset.hpp"
#include "scio/error.hpp"
#include "scio/infer.hpp"
#include "scio/metrics.hpp"
#include "scio/skeleton.hpp"
#include "scio/train.hpp"

namespace scio {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// ---------------------------------------------------------------- plot data

struct TraceRow {
    std::string sample_id;
    std::string group;
    int eval = 0;
    double dx = 0, dy = 0, objective = 0;
    bool accepted = false;
    double best = 0;
};

inline void write_trace_csv(std::ostream& out, std::span<const TraceRow> rows) {
    out << "sample_id,group,eval,dx,dy,objective,accepted,best\n";
    char buf[320];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%s,%d,%.17g,%.17g,%.17g,%d,%.17g\n", r.sample_id.c_str(), r.group.c_str(),
                      r.eval, r.dx, r.dy, r.objective, r.accepted ? 1 : 0, r.best);
        out << buf;
    }
}

namespace detail {

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path, std::size_t columns) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "open", "cannot read " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (n == 1 || line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        if (cells.size() != columns)
            throw Error(ErrorKind::ParseError, "csv",
                        path.string() + " line " + std::to_string(n) + ": expected " + std::to_string(columns) + " cells",
                        n);
        rows.push_back(std::move(cells));
    }
    return rows;
}

inline double to_real(const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorKind::ParseError, "number", "not a number: '" + s + "'");
    }
}

}  // namespace detail

inline std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path) {
    std::vector<TraceRow> out;
    for (const auto& c : detail::read_csv(path, 8))
        out.push_back({c[0], c[1], static_cast<int>(detail::to_real(c[2])), detail::to_real(c[3]),
                       detail::to_real(c[4]), detail::to_real(c[5]), c[6] == "1", detail::to_real(c[7])});
    return out;
}

inline LossReport read_loss_csv(const std::filesystem::path& path) {
    LossReport r;
    for (const auto& c : detail::read_csv(path, 7)) {
        Phase ph = c[2] == "warmup" ? Phase::Warmup : c[2] == "prediction" ? Phase::Prediction : Phase::Verification;
        r.rows.push_back({static_cast<int>(detail::to_real(c[0])), c[1], ph, detail::to_real(c[3]),
                          detail::to_real(c[4]), detail::to_real(c[5]), detail::to_real(c[6])});
    }
    return r;
}

/// Mean best-so-far objective against evaluation count, over all traces.
/// Traces shorter than the longest are padded with their final value.
inline std::vector<double> mean_search_curve(std::span<const TraceRow> rows) {
    std::map<std::pair<std::string, std::string>, std::vector<double>> traces;
    std::vector<std::pair<std::string, std::string>> order;
    for (const auto& r : rows) {
        auto key = std::pair{r.sample_id, r.group};
        auto [it, fresh] = traces.try_emplace(key);
        if (fresh) order.push_back(key);
        it->second.push_back(r.best);
    }
    std::size_t len = 0;
    for (const auto& [k, v] : traces) len = std::max(len, v.size());
    std::vector<double> curve(len, 0.0);
    for (const auto& key : order) {
        const auto& v = traces[key];
        for (std::size_t i = 0; i < len; ++i) curve[i] += v[std::min(i, v.size() - 1)];
    }
    for (auto& c : curve) c /= static_cast<double>(order.size());
    return curve;
}

inline void write_curve_csv(std::ostream& out, std::span<const double> curve) {
    out << "eval,mean_best_objective\n";
    char buf[96];
    for (std::size_t i = 0; i < curve.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, curve[i]);
        out << buf;
    }
}

// ---------------------------------------------------------------- helpers

inline SkeletonSpec skeleton_from_arg(const std::string& arg) {
    if (auto p = preset_by_name(arg)) return *p;
    std::ifstream in(arg);
    if (!in) throw Error(ErrorKind::ConfigError, "skeleton", "'" + arg + "' is neither a preset nor a readable file");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_skeleton(ss.str());
}

inline std::string sample_id(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu", index);
    return buf;
}

inline AnnotationRecord annotation_for(const std::string& id, const SkeletonSpec& skeleton,
                                       std::vector<Keypoint> kps, std::optional<double> score) {
    AnnotationRecord r{id, skeleton.name, std::move(kps), {}, score};
    r.bbox = keypoint_bbox(r.keypoints);
    return r;
}

template <typename Fn>
void write_file(const std::filesystem::path& path, Fn&& fn) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "open", "cannot write " + path.string());
    fn(out);
    if (!out) throw Error(ErrorKind::IoError, "write", "failed writing " + path.string());
}

inline void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::IoError, "mkdir", "cannot create " + dir.string() + ": " + ec.message());
}

inline std::string join(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

// ---------------------------------------------------------------- subcommands

struct SynthArgs {
    std::size_t n = 2000;
    std::uint64_t seed = 7;
    std::string out;
    std::string skeleton = "coco17";
    std::string corruption = "default";
    std::optional<double> terminal_shift_max, distractor_prob, distractor_amp, base_noise_std;
    std::vector<double> attenuation;
    double sigma = 2.0;
    std::string amplitude = "unit_peak";
};

inline int cmd_synth(const SynthArgs& a, int threads, std::ostream& out) {
    DatasetConfig cfg;
    cfg.skeleton = skeleton_from_arg(a.skeleton);
    cfg.threads = threads;
    auto& c = cfg.render.corruption;
    if (a.corruption == "none") c = CorruptionConfig::none();
    if (a.terminal_shift_max) c.terminal_shift_max = *a.terminal_shift_max;
    if (a.distractor_prob) c.distractor_prob = *a.distractor_prob;
    if (a.distractor_amp) c.distractor_amp = *a.distractor_amp;
    if (a.base_noise_std) c.base_noise_std = *a.base_noise_std;
    if (!a.attenuation.empty()) {
        if (a.attenuation.size() != 2) throw Error(ErrorKind::ConfigError, "attenuation", "expected lo,hi");
        c.attenuation_range = {a.attenuation[0], a.attenuation[1]};
    }
    cfg.render.gaussian.sigma = a.sigma;
    cfg.render.gaussian.amplitude_mode = a.amplitude == "density" ? AmplitudeMode::Eq1Literal : AmplitudeMode::UnitPeak;
    out << "synth: n=" << a.n << " seed=" << a.seed << " skeleton=" << cfg.skeleton.name
        << " terminal_shift_max=" << c.terminal_shift_max << " distractor_prob=" << c.distractor_prob
        << " distractor_amp=" << c.distractor_amp << " attenuation=" << c.attenuation_range.lo << ","
        << c.attenuation_range.hi << " base_noise_std=" << c.base_noise_std << " sigma=" << a.sigma
        << " threads=" << threads << "\n";
    const auto m = build_dataset(a.n, a.seed, a.out, cfg);
    std::vector<AnnotationRecord> gt;
    const auto ds = load_dataset(a.out, threads);
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        gt.push_back(annotation_for(sample_id(i), ds.skeleton, ds.samples[i].pose.keypoints, std::nullopt));
    write_annotations(std::filesystem::path(a.out) / "annotations.ndjson", gt);
    out << "wrote " << m.n << " samples (" << m.train << " train, " << m.val << " val) to " << a.out << "\n";
    return kExitOk;
}

struct TrainArgs {
    std::string data, out;
    int epochs = 210, batch = 36, warmup = 5;
    double lr = 0.001;
    std::uint64_t seed = 0;
    bool shared = false;
    std::vector<int> hidden{32, 32, 16};
    bool quiet = false;
};

inline int cmd_train(const TrainArgs& a, int threads, std::ostream& out) {
    TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch;
    cfg.lr = a.lr;
    cfg.warmup_epochs = a.warmup;
    cfg.seed = a.seed;
    cfg.group_mode = a.shared ? GroupMode::Shared : GroupMode::PerGroup;
    cfg.hidden_channels = a.hidden;
    cfg.threads = threads;
    out << "train: epochs=" << cfg.epochs << " batch=" << cfg.batch_size << " lr=" << cfg.lr
        << " warmup=" << cfg.warmup_epochs << " seed=" << cfg.seed << " mode=" << (a.shared ? "shared" : "per_group")
        << " hidden=" << join(cfg.hidden_channels) << " threads=" << threads << "\n";
    cfg.validate();
    const auto ds = load_dataset(a.data, threads);
    EpochCallback log;
    if (!a.quiet)
        log = [&](const LossRow& r) {
            if (r.group == "all")
                out << "epoch " << r.epoch << " [" << to_string(r.phase) << "] L_P^O=" << r.lp_o << " L_P^S=" << r.lp_s
                    << " L_P=" << r.lp << " L_V=" << r.lv << "\n"
                    << std::flush;
        };
    const auto res = train(ds.train(), ds.skeleton, cfg, log);
    save_models(res, a.out);
    out << "saved models to " << a.out << "\n";
    return kExitOk;
}

struct RefineArgs {
    std::string ckpt_dir, data, out;
    double delta = 8.0;
    int steps = 50;
    double tau = 0.5;
    std::optional<double> initial_step;
    double shrink = 0.5;
    std::string split = "val";
    std::string reference = "observed";
};

inline int cmd_refine(const RefineArgs& a, int threads, std::ostream& out) {
    RefineOptions opt;
    opt.search.delta = a.delta;
    opt.search.steps = a.steps;
    opt.search.confidence_gate = a.tau;
    opt.search.initial_step = a.initial_step;
    opt.search.shrink = a.shrink;
    opt.reference = a.reference == "rendered" ? AnchorReference::Rendered : AnchorReference::Observed;
    out << "refine: delta=" << a.delta << " steps=" << a.steps << " tau=" << a.tau
        << " initial_step=" << opt.search.first_step() << " shrink=" << a.shrink << " split=" << a.split
        << " reference=" << a.reference << " threads=" << threads << "\n";
    opt.search.validate();
    const auto models = load_models(a.ckpt_dir);
    const auto ds = load_dataset(a.data, threads);
    opt.gaussian = ds.manifest.gaussian;
    std::size_t first = 0, last = ds.samples.size();
    if (a.split == "val") first = ds.manifest.train;
    else if (a.split == "train") last = ds.manifest.train;
    else if (a.split != "all") throw Error(ErrorKind::ConfigError, "split", "split must be train, val or all");

    std::vector<PoseRefinement> results(last - first);
    detail::parallel_for(results.size(), threads, [&](std::size_t i) {
        const auto& s = ds.samples[first + i];
        results[i] = refine_pose(models, s.obs_heatmaps, s.feature_map, ds.skeleton, opt);
    });

    ensure_dir(a.out);
    std::vector<AnnotationRecord> refined, baseline;
    std::vector<TraceRow> traces;
    std::size_t n_refined = 0;
    write_file(std::filesystem::path(a.out) / "refine_records.ndjson", [&](std::ostream& f) {
        for (std::size_t i = 0; i < results.size(); ++i) {
            const auto id = sample_id(first + i);
            const auto& pr = results[i];
            const auto& grid = ds.manifest.heatmap;
            auto kps = to_canvas(pr.keypoints, grid, ds.manifest.canvas);
            refined.push_back(annotation_for(id, ds.skeleton, kps, detection_score(kps)));
            auto base = decode_all(ds.samples[first + i].obs_heatmaps);
            auto bk = to_canvas(base, grid, ds.manifest.canvas);
            baseline.push_back(annotation_for(id, ds.skeleton, bk, detection_score(bk)));
            for (const auto& g : pr.groups) {
                if (!g.refined) continue;
                ++n_refined;
                const auto& name = ds.skeleton.groups[static_cast<std::size_t>(g.group)].name;
                nlohmann::json j{{"sample_id", id},
                                 {"group", name},
                                 {"init_xy", {g.init.x, g.init.y}},
                                 {"refined_xy", {g.result.x, g.result.y}},
                                 {"init_obj", g.trace.initial_objective},
                                 {"final_obj", g.trace.final_objective},
                                 {"evals", g.trace.evaluations()}};
                f << j.dump() << '\n';
                const auto best = g.trace.best_so_far();
                traces.push_back({id, name, 0, 0, 0, g.trace.initial_objective, false, best[0]});
                for (std::size_t e = 0; e < g.trace.probes.size(); ++e) {
                    const auto& p = g.trace.probes[e];
                    traces.push_back({id, name, static_cast<int>(e + 1), p.dx, p.dy, p.objective, p.accepted, best[e + 1]});
                }
            }
        }
    });
    write_annotations(std::filesystem::path(a.out) / "predictions.ndjson", refined);
    write_annotations(std::filesystem::path(a.out) / "baseline.ndjson", baseline);
    write_file(std::filesystem::path(a.out) / "search_traces.csv", [&](std::ostream& f) { write_trace_csv(f, traces); });
    const auto curve = mean_search_curve(traces);
    write_file(std::filesystem::path(a.out) / "search_curve.csv", [&](std::ostream& f) { write_curve_csv(f, curve); });
    out << "refined " << n_refined << " terminal keypoints over " << results.size() << " samples; outputs in " << a.out
        << "\n";
    return kExitOk;
}

struct EvalArgs {
    std::string pred, gt, skeleton = "coco17", out;
};

/// Pairs predictions with ground truth by id and evaluates them.
inline EvalReport evaluate_files(const std::string& pred_path, const std::string& gt_path,
                                 const SkeletonSpec& skeleton) {
    SkeletonResolver resolve = [&](std::string_view name) -> std::optional<SkeletonSpec> {
        if (name == skeleton.name) return skeleton;
        return std::nullopt;
    };
    const auto pred = read_annotations(std::filesystem::path(pred_path), resolve);
    const auto gt = read_annotations(std::filesystem::path(gt_path), resolve);
    std::map<std::string, const AnnotationRecord*> by_id;
    for (const auto& g : gt) by_id[g.id] = &g;
    std::vector<EvalPair> pairs;
    for (const auto& p : pred) {
        auto it = by_id.find(p.id);
        if (it == by_id.end())
            throw Error(ErrorKind::ValidationError, "id", "prediction '" + p.id + "' has no ground truth");
        auto pair = make_pair(p.keypoints, it->second->keypoints, skeleton);
        if (p.score) pair.score = *p.score;
        pairs.push_back(std::move(pair));
    }
    return evaluate(pairs, skeleton);
}

inline int cmd_eval(const EvalArgs& a, std::ostream& out) {
    const auto skeleton = skeleton_from_arg(a.skeleton);
    const auto r = evaluate_files(a.pred, a.gt, skeleton);
    const auto j = to_json(r).dump(2);
    if (!a.out.empty()) {
        ensure_dir(a.out);
        const std::filesystem::path dir(a.out);
        write_file(dir / "report.json", [&](std::ostream& f) { f << j << '\n'; });
        write_file(dir / "report.csv", [&](std::ostream& f) { write_report_csv(f, r); });
        write_file(dir / "keypoints.csv", [&](std::ostream& f) { write_keypoint_csv(f, r, skeleton); });
    }
    out << j << "\n";
    return kExitOk;
}

struct ReportArgs {
    std::string a, b, traces, losses, out;
};

inline EvalReport read_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "open", "cannot read " + path);
    try {
        nlohmann::json j;
        in >> j;
        return report_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::FormatError, "report", path + ": " + e.what());
    }
}

inline int cmd_report(const ReportArgs& a, std::ostream& out) {
    const auto rows = compare_reports(read_report(a.a), read_report(a.b));
    write_delta_table(out, rows);
    if (a.out.empty()) return kExitOk;
    ensure_dir(a.out);
    const std::filesystem::path dir(a.out);
    write_file(dir / "comparison.csv", [&](std::ostream& f) { write_delta_table(f, rows); });
    if (!a.traces.empty()) {
        const auto t = read_trace_csv(a.traces);
        write_file(dir / "search_traces.csv", [&](std::ostream& f) { write_trace_csv(f, t); });
        const auto curve = mean_search_curve(t);
        write_file(dir / "search_curve.csv", [&](std::ostream& f) { write_curve_csv(f, curve); });
    }
    if (!a.losses.empty()) {
        const auto l = read_loss_csv(a.losses);
        write_file(dir / "loss_report.csv", [&](std::ostream& f) { write_loss_csv(f, l); });
    }
    return kExitOk;
}

// ---------------------------------------------------------------- entry point

/// Runs one subcommand. Exit codes: 0 success, 1 usage error, 2 data error.
inline int run_cli(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"scio: self-constrained keypoint refinement toolkit", "scio"};
    app.set_config("--config", "", "TOML/INI file of flag values; command-line flags take precedence");
    app.require_subcommand(1);
    int threads = 1;
    app.add_option("--threads", threads, "worker threads")->capture_default_str()->check(CLI::Range(1, 256));

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--n", sa.n, "number of samples")->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--seed", sa.seed, "generator seed")->capture_default_str();
    synth->add_option("--out", sa.out, "output directory")->required();
    synth->add_option("--skeleton", sa.skeleton, "preset name or skeleton config file")->capture_default_str();
    synth->add_option("--corruption", sa.corruption, "corruption preset")
        ->capture_default_str()
        ->check(CLI::IsMember({"default", "none"}));
    synth->add_option("--terminal-shift-max", sa.terminal_shift_max, "max terminal displacement (heatmap px)");
    synth->add_option("--distractor-prob", sa.distractor_prob, "probability of a distractor peak");
    synth->add_option("--distractor-amp", sa.distractor_amp, "distractor amplitude");
    synth->add_option("--attenuation", sa.attenuation, "terminal amplitude range lo,hi")->delimiter(',');
    synth->add_option("--base-noise-std", sa.base_noise_std, "additive pixel noise");
    synth->add_option("--sigma", sa.sigma, "Gaussian sigma (heatmap px)")->capture_default_str();
    synth->add_option("--amplitude", sa.amplitude, "peak convention")
        ->capture_default_str()
        ->check(CLI::IsMember({"unit_peak", "density"}));

    TrainArgs ta;
    auto* trn = app.add_subcommand("train", "train prediction and verification networks");
    trn->add_option("--data", ta.data, "dataset directory")->required();
    trn->add_option("--out", ta.out, "checkpoint directory")->required();
    trn->add_option("--epochs", ta.epochs, "training epochs")->capture_default_str();
    trn->add_option("--batch", ta.batch, "mini-batch size")->capture_default_str();
    trn->add_option("--lr", ta.lr, "Adam learning rate")->capture_default_str();
    trn->add_option("--warmup", ta.warmup, "independent warmup epochs")->capture_default_str();
    trn->add_option("--seed", ta.seed, "initialisation and shuffle seed")->capture_default_str();
    trn->add_flag("--shared", ta.shared, "share one network pair across groups");
    trn->add_option("--hidden", ta.hidden, "hidden layer widths")->delimiter(',')->capture_default_str();
    trn->add_flag("--quiet", ta.quiet, "suppress per-epoch logging");

    RefineArgs ra;
    auto* ref = app.add_subcommand("refine", "refine terminal keypoints by local search");
    ref->add_option("--ckpt-dir", ra.ckpt_dir, "checkpoint directory from train")->required();
    ref->add_option("--data", ra.data, "dataset directory")->required();
    ref->add_option("--out", ra.out, "output directory")->required();
    ref->add_option("--delta", ra.delta, "search radius (heatmap px)")->capture_default_str();
    ref->add_option("--steps", ra.steps, "objective evaluation budget")->capture_default_str();
    ref->add_option("--tau", ra.tau, "confidence gate")->capture_default_str();
    ref->add_option("--initial-step", ra.initial_step, "first compass step (default delta/2)");
    ref->add_option("--shrink", ra.shrink, "step shrink factor")->capture_default_str();
    ref->add_option("--split", ra.split, "which samples to refine")
        ->capture_default_str()
        ->check(CLI::IsMember({"train", "val", "all"}));
    ref->add_option("--reference", ra.reference, "anchor heatmap used by the objective")
        ->capture_default_str()
        ->check(CLI::IsMember({"observed", "rendered"}));

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "score predictions against ground truth");
    ev->add_option("--pred", ea.pred, "prediction annotations (NDJSON)")->required();
    ev->add_option("--gt", ea.gt, "ground-truth annotations (NDJSON)")->required();
    ev->add_option("--skeleton", ea.skeleton, "preset name or skeleton config file")->capture_default_str();
    ev->add_option("--out", ea.out, "directory for report.json / report.csv / keypoints.csv");

    ReportArgs pa;
    auto* rep = app.add_subcommand("report", "compare two evaluation reports and emit plot data");
    rep->add_option("--a", pa.a, "baseline report.json")->required();
    rep->add_option("--b", pa.b, "candidate report.json")->required();
    rep->add_option("--traces", pa.traces, "search_traces.csv to re-emit");
    rep->add_option("--losses", pa.losses, "loss_report.csv to re-emit");
    rep->add_option("--out", pa.out, "output directory");

    for (std::size_t i = 0; i < args.size(); ++i) {
        const auto& a = args[i];
        if (a == "--threads" || a == "--config") {
            ++i;
            continue;
        }
        if (a.empty() || a[0] == '-') continue;
        if (!app.get_subcommand_no_throw(a)) {
            err << "error: unknown subcommand '" << a << "'\n\n" << app.help();
            return kExitUsage;
        }
        break;
    }
    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (synth->parsed()) return cmd_synth(sa, threads, out);
        if (trn->parsed()) return cmd_train(ta, threads, out);
        if (ref->parsed()) return cmd_refine(ra, threads, out);
        if (ev->parsed()) return cmd_eval(ea, out);
        if (rep->parsed()) return cmd_report(pa, out);
    } catch (const Error& e) {
        err << "error [" << to_string(e.kind()) << "/" << e.detail() << "]: " << e.what() << "\n";
        return e.kind() == ErrorKind::ConfigError ? kExitUsage : kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    err << app.help();
    return kExitUsage;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return run_cli(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace scio
