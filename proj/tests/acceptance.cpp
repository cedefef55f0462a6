// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   acceptance --work DIR [--threads N] [--only 1,2,7]
//
// --samples and --epochs shrink the training run for smoke tests; any other
// value than the defaults is flagged on the affected criterion lines.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "scio/cli.hpp"
#include "scio/scio.hpp"
#include "support.hpp"

using namespace scio;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
    int id;
    std::string title;
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Verdict gradient_check() {
    const auto t0 = Clock::now();
    double worst_p = 0, worst_i = 0;
    int checked = 0, skipped = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto inst = testing::random_instance(1000 + seed);
        const auto r = testing::finite_difference_check(inst.net, inst.input, inst.grad_output, 1e-3);
        worst_p = std::max(worst_p, r.max_rel_param);
        worst_i = std::max(worst_i, r.max_rel_input);
        checked += r.checked, skipped += r.skipped;
    }
    const double secs = seconds_since(t0);
    const bool ok = worst_p < 1e-4 && worst_i < 1e-4 && secs < 60.0 && checked > 0;
    return {1, "gradient correctness", ok,
            fmt("20 instances, max rel err params %.2e inputs %.2e, %d probes (%d skipped at ReLU kinks), %.1f s",
                worst_p, worst_i, checked, skipped, secs)};
}

Verdict codec_fidelity() {
    const GridSize grid{64, 48};
    Rng rng(2);
    int exact = 0;
    for (int i = 0; i < 1000; ++i) {
        const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(grid.width)));
        const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(grid.height)));
        const auto k = decode_argmax(encode_keypoint<float>({double(x), double(y), 1, Visibility::Visible}, {}, grid));
        exact += k.x == x && k.y == y;
    }
    const auto peak = encode_keypoint<double>({10, 10, 1, Visibility::Visible}, {2.0, AmplitudeMode::Eq1Literal}, grid);
    const double expected = 1.0 / (2.0 * std::numbers::pi * 4.0);
    const bool ok = exact == 1000 && std::abs(peak.at(10, 10) - expected) < 1e-9;
    return {2, "codec fidelity", ok,
            fmt("%d/1000 exact roundtrips, normalised density peak %.9f (expected %.9f)", exact, peak.at(10, 10), expected)};
}

Verdict oks_values() {
    const auto skel = coco17_preset();
    std::vector<Keypoint> gt;
    for (int i = 0; i < skel.num_keypoints(); ++i) gt.push_back({3.0 * i, 100.0 - i, 1, Visibility::Visible});
    const double same = oks(make_pair(gt, gt, skel));

    EvalPair single;
    single.scale = 42.0;
    single.k = {0.107};
    single.ground_truth = {{5, 5, 1, Visibility::Visible}};
    single.predicted = {{5 + std::sqrt(2.0) * 42.0 * 0.107, 5, 1, Visibility::Visible}};
    const double e1 = oks(single);

    Rng rng(3);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        EvalPair p;
        p.scale = rng.uniform(10, 200);
        for (int i = 0; i < skel.num_keypoints(); ++i) {
            const double x = rng.uniform(0, 256), y = rng.uniform(0, 192);
            const auto v = i == 0 ? Visibility::Visible : static_cast<Visibility>(rng.below(3));
            p.ground_truth.push_back({x, y, 1, v});
            p.predicted.push_back({x + rng.normal() * 8, y + rng.normal() * 8, 1, Visibility::Visible});
            p.k.push_back(skel.oks_k[static_cast<std::size_t>(i)]);
        }
        worst = std::max(worst, std::abs(oks(p) - testing::oks_oracle(p.predicted, p.ground_truth, p.scale, p.k)));
    }
    const bool ok = same == 1.0 && std::abs(e1 - std::exp(-1.0)) < 1e-12 && worst < 1e-12;
    return {3, "OKS analytic values", ok,
            fmt("zero distance %.15f, d^2=2s^2k^2 gives %.15f (e^-1 %.15f), oracle max diff %.1e over 1000 pairs",
                same, e1, std::exp(-1.0), worst)};
}

Verdict search_vs_oracle() {
    const SearchConfig sc;
    const GridSize grid{64, 48};
    Rng rng(2024);
    int good = 0;
    for (int t = 0; t < 200; ++t) {
        const auto trial = testing::smooth_trial(rng, t);
        const auto r = compass_search(trial.f, trial.x0, trial.y0, sc, grid);
        good += testing::near_oracle(r.trace.final_objective,
                                     testing::exhaustive_min(trial.f, trial.x0, trial.y0, sc.delta, grid));
    }
    return {7, "search vs exhaustive oracle", good >= 190,
            fmt("%d/200 trials within 5%% (or 1e-6) of the 0.25 px lattice minimum, need 190", good)};
}

struct Scale {
    std::size_t samples = 2000;
    int epochs = 30;
    bool is_default() const { return samples == 2000 && epochs == 30; }
};

struct TrainedRun {
    Scale scale;
    Dataset data;
    TrainResult models;
    double seconds = 0;
};

TrainedRun train_default(const fs::path& work, int threads, Scale scale) {
    TrainedRun run;
    run.scale = scale;
    DatasetConfig dc;
    dc.threads = threads;
    const auto t0 = Clock::now();
    build_dataset(scale.samples, 7, work / "data", dc);
    run.data = load_dataset(work / "data", threads);
    std::cerr << fmt("dataset: %zu train / %zu val samples in %.0f s\n", run.data.train().size(),
                     run.data.val().size(), seconds_since(t0));
    TrainConfig tc;
    tc.epochs = scale.epochs;
    tc.warmup_epochs = 5;
    tc.threads = threads;
    const auto t1 = Clock::now();
    run.models = train(run.data.train(), run.data.skeleton, tc, [&](const LossRow& r) {
        if (r.group == "all")
            std::cerr << fmt("epoch %2d %-12s L_P^O %.6f L_P^S %.6f L_V %.6f  (%.0f s)\n", r.epoch,
                             std::string(to_string(r.phase)).c_str(), r.lp_o, r.lp_s, r.lv, seconds_since(t1));
    });
    run.seconds = seconds_since(t1);
    save_models(run.models, work / "ckpt");
    return run;
}

Verdict convergence(const TrainedRun& run, int threads) {
    const auto& rep = run.models.report;
    const int last = rep.epochs();
    bool ok = last == run.scale.epochs;
    std::string worst;
    double worst_ratio = 0.0;
    for (const auto& g : run.models.groups) {
        const double ratio = rep.at(last, g).lp_o / rep.at(1, g).lp_o;
        ok = ok && ratio <= 0.5;
        if (ratio > worst_ratio) worst_ratio = ratio, worst = g;
    }
    return {4, "SCL convergence", ok,
            fmt("worst group %s: final L_P^O / epoch-1 L_P^O = %.3f (need <= 0.5); training %.0f s on %d thread(s)",
                worst.c_str(), worst_ratio, run.seconds, threads)};
}

struct SampleOutcome {
    PoseRefinement refined;
    std::vector<Keypoint> baseline;
    std::vector<double> init_obj, final_obj;  // recomputed independently, per group
};

std::vector<SampleOutcome> refine_val(const TrainedRun& run, const RefineOptions& opt, int threads) {
    const auto val = run.data.val();
    const auto& skel = run.data.skeleton;
    std::vector<SampleOutcome> out(val.size());
    detail::parallel_for(val.size(), threads, [&](std::size_t i) {
        const auto& s = val[i];
        auto& o = out[i];
        o.baseline = decode_all(s.obs_heatmaps);
        o.refined = refine_pose(run.models, s.obs_heatmaps, s.feature_map, skel, opt);
        for (const auto& g : o.refined.groups) {
            const auto& grp = skel.groups[static_cast<std::size_t>(g.group)];
            const auto& gamma = run.models.for_group(static_cast<std::size_t>(g.group)).gamma;
            auto eval = [&](const Keypoint& k) {
                return objective(gamma, s.obs_heatmaps.heatmap(grp.anchor()), s.obs_heatmaps.heatmap(grp.base[1]),
                                 s.obs_heatmaps.heatmap(grp.base[2]), s.feature_map, k, opt.gaussian);
            };
            o.init_obj.push_back(eval(g.init));
            o.final_obj.push_back(eval(g.result));
        }
    });
    return out;
}

Keypoint truth_on_heatmap(const ObservedSample& s, int k, const DatasetManifest& m) {
    auto t = s.pose.keypoints[static_cast<std::size_t>(k)];
    t.x *= static_cast<double>(m.heatmap.width) / m.canvas.width;
    t.y *= static_cast<double>(m.heatmap.height) / m.canvas.height;
    return t;
}

Verdict efficacy(const TrainedRun& run, const std::vector<SampleOutcome>& res) {
    const auto val = run.data.val();
    double err_before = 0, err_after = 0, conf_before = 0, conf_after = 0;
    std::size_t n_err = 0, n_conf = 0;
    for (std::size_t i = 0; i < val.size(); ++i)
        for (const auto& g : run.data.skeleton.groups) {
            const auto t = static_cast<std::size_t>(g.terminal);
            const auto truth = truth_on_heatmap(val[i], g.terminal, run.data.manifest);
            const auto& b = res[i].baseline[t];
            const auto& a = res[i].refined.keypoints[t];
            conf_before += b.confidence, conf_after += a.confidence, ++n_conf;
            if (truth.visibility == Visibility::Invisible) continue;
            err_before += std::hypot(b.x - truth.x, b.y - truth.y);
            err_after += std::hypot(a.x - truth.x, a.y - truth.y);
            ++n_err;
        }
    err_before /= static_cast<double>(n_err), err_after /= static_cast<double>(n_err);
    conf_before /= static_cast<double>(n_conf), conf_after /= static_cast<double>(n_conf);
    const double drop = 1.0 - err_after / err_before;
    const bool ok = drop >= 0.20 && conf_after > conf_before;
    return {5, "SCO efficacy", ok,
            fmt("terminal error %.3f -> %.3f heatmap px (%.1f%% lower, need >= 20%%); confidence %.4f -> %.4f "
                "(need an increase); %zu samples",
                err_before, err_after, 100.0 * drop, conf_before, conf_after, val.size())};
}

Verdict invariants(const std::vector<SampleOutcome>& res, double delta) {
    std::size_t total = 0, bound_ok = 0, obj_ok = 0;
    double worst_dist = 0.0;
    for (const auto& o : res)
        for (std::size_t g = 0; g < o.refined.groups.size(); ++g) {
            const auto& gr = o.refined.groups[g];
            if (!gr.refined) continue;
            ++total;
            const double d = std::hypot(gr.result.x - gr.init.x, gr.result.y - gr.init.y);
            worst_dist = std::max(worst_dist, d);
            bound_ok += d <= delta;
            const bool moved = gr.result.x != gr.init.x || gr.result.y != gr.init.y;
            obj_ok += moved ? o.final_obj[g] < o.init_obj[g] : o.final_obj[g] == o.init_obj[g];
        }
    const bool ok = total > 0 && bound_ok == total && obj_ok == total;
    return {6, "no-regression and bound", ok,
            fmt("%zu/%zu within delta (max move %.4f px), %zu/%zu with objective(refined) <= objective(init)", bound_ok,
                total, worst_dist, obj_ok, total)};
}

Verdict trace_monotonicity(const std::vector<SampleOutcome>& res) {
    std::size_t traces = 0, monotone = 0;
    std::vector<TraceRow> rows;
    for (std::size_t i = 0; i < res.size(); ++i)
        for (const auto& g : res[i].refined.groups) {
            if (!g.refined) continue;
            ++traces;
            double last = g.trace.initial_objective;
            bool ok = true;
            for (const auto& p : g.trace.probes)
                if (p.accepted) ok = ok && p.objective < last, last = p.objective;
            monotone += ok;
            const auto best = g.trace.best_so_far();
            const auto id = std::to_string(i), grp = std::to_string(g.group);
            for (std::size_t e = 0; e < best.size(); ++e) rows.push_back({id, grp, static_cast<int>(e), 0, 0, 0, false, best[e]});
        }
    const auto curve = mean_search_curve(rows);
    std::size_t rises = 0;
    for (std::size_t i = 1; i < curve.size(); ++i) rises += curve[i] > curve[i - 1];
    const bool ok = traces > 0 && monotone == traces && rises == 0;
    return {8, "trace monotonicity", ok,
            fmt("%zu/%zu traces strictly decreasing; mean curve %.6g -> %.6g over %zu evaluations, %zu rises", monotone,
                traces, curve.empty() ? 0.0 : curve.front(), curve.empty() ? 0.0 : curve.back(),
                curve.empty() ? 0 : curve.size() - 1, rises)};
}

// Informational: the trained verification net should prefer the true terminal
// over a 10 px displacement for the objective to be worth searching.
std::string premise(const TrainedRun& run, const RefineOptions& opt) {
    const auto val = run.data.val();
    const auto& skel = run.data.skeleton;
    const auto grid = run.data.manifest.heatmap;
    Rng rng(99);
    std::size_t total = 0, holds = 0;
    for (const auto& s : val)
        for (std::size_t gi = 0; gi < skel.groups.size(); ++gi) {
            const auto& g = skel.groups[gi];
            auto truth = truth_on_heatmap(s, g.terminal, run.data.manifest);
            truth.x = std::clamp(truth.x, 0.0, grid.width - 1.0), truth.y = std::clamp(truth.y, 0.0, grid.height - 1.0);
            Keypoint off = truth;
            bool placed = false;
            for (int tries = 0; tries < 32 && !placed; ++tries) {
                const double a = rng.uniform(0, 2 * std::numbers::pi);
                off.x = truth.x + 10 * std::cos(a), off.y = truth.y + 10 * std::sin(a);
                placed = off.x >= 0 && off.y >= 0 && off.x <= grid.width - 1.0 && off.y <= grid.height - 1.0;
            }
            if (!placed) continue;
            const auto& gamma = run.models.for_group(gi).gamma;
            auto eval = [&](const Keypoint& k) {
                return objective(gamma, s.obs_heatmaps.heatmap(g.anchor()), s.obs_heatmaps.heatmap(g.base[1]),
                                 s.obs_heatmaps.heatmap(g.base[2]), s.feature_map, k, opt.gaussian);
            };
            ++total;
            holds += eval(truth) <= eval(off);
        }
    const double frac = total ? static_cast<double>(holds) / static_cast<double>(total) : 0.0;
    return fmt("premise (informational): objective(true terminal) <= objective(10 px away) on %zu/%zu = %.1f%% "
               "(reference level 90%%)",
               holds, total, 100.0 * frac);
}

std::vector<fs::path> files_under(const fs::path& root) {
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
    std::sort(out.begin(), out.end());
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Verdict determinism(const fs::path& work, int threads) {
    const std::string t = std::to_string(threads);
    std::string failure;
    for (const char* run : {"run1", "run2"}) {
        const auto dir = work / "determinism" / run;
        fs::remove_all(dir);
        fs::create_directories(dir);
        const auto d = (dir / "data").string(), c = (dir / "ckpt").string(), r = (dir / "refine").string();
        const std::vector<std::vector<std::string>> steps{
            {"--threads", t, "synth", "--n", "60", "--seed", "11", "--out", d},
            {"--threads", t, "train", "--data", d, "--out", c, "--epochs", "4", "--warmup", "1", "--seed", "3", "--quiet"},
            {"--threads", t, "refine", "--ckpt-dir", c, "--data", d, "--out", r, "--tau", "1"},
            {"eval", "--pred", r + "/predictions.ndjson", "--gt", d + "/annotations.ndjson", "--out",
             (dir / "eval").string()}};
        for (const auto& args : steps) {
            std::ostringstream out, err;
            if (const int code = run_cli(args, out, err); code != kExitOk)
                failure = fmt("%s %s exited %d: %s", run, args[args[0] == "--threads" ? 2 : 0].c_str(), code,
                              err.str().c_str());
        }
    }
    if (!failure.empty()) return {9, "determinism", false, failure};
    const auto a = work / "determinism" / "run1", b = work / "determinism" / "run2";
    const auto fa = files_under(a), fb = files_under(b);
    std::size_t same = 0;
    std::string first_diff;
    for (const auto& f : fa) {
        if (fs::exists(b / f) && slurp(a / f) == slurp(b / f)) ++same;
        else if (first_diff.empty()) first_diff = f.string();
    }
    const bool ok = fa == fb && same == fa.size() && !fa.empty();
    return {9, "determinism", ok,
            fmt("%zu/%zu files byte-identical across two synth/train/refine/eval runs%s%s", same, fa.size(),
                first_diff.empty() ? "" : ", first difference: ", first_diff.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria runner"};
    std::string work = "acceptance_work";
    int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::vector<int> only;
    app.add_option("--work", work, "scratch directory")->capture_default_str();
    app.add_option("--threads", threads, "worker threads")->capture_default_str();
    app.add_option("--only", only, "criteria to run")->delimiter(',');
    Scale scale;
    app.add_option("--samples", scale.samples, "dataset size for the training criteria")->capture_default_str();
    app.add_option("--epochs", scale.epochs, "epochs for the training criteria (5 of them warmup)")
        ->capture_default_str()
        ->check(CLI::Range(6, 1000));
    CLI11_PARSE(app, argc, argv);
    std::set<int> want(only.begin(), only.end());
    if (want.empty()) want = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    fs::create_directories(work);

    std::vector<Verdict> verdicts;
    auto report = [&](Verdict v) {
        if (!scale.is_default() && (v.id == 4 || v.id == 5 || v.id == 6 || v.id == 8))
            v.detail += fmt(" [smoke scale: %zu samples, %d epochs]", scale.samples, scale.epochs);
        std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << v.id << " (" << v.title << "): " << v.detail
                  << std::endl;
        verdicts.push_back(std::move(v));
    };

    if (want.count(1)) report(gradient_check());
    if (want.count(2)) report(codec_fidelity());
    if (want.count(3)) report(oks_values());
    if (want.count(4) || want.count(5) || want.count(6) || want.count(8)) {
        const auto run = train_default(work, threads, scale);
        if (want.count(4)) report(convergence(run, threads));
        RefineOptions opt;
        opt.search.confidence_gate = 1.0;
        opt.gaussian = run.data.manifest.gaussian;
        const auto t0 = Clock::now();
        const auto res = refine_val(run, opt, threads);
        std::cerr << fmt("refined %zu val samples in %.0f s\n", res.size(), seconds_since(t0));
        if (want.count(5)) report(efficacy(run, res));
        if (want.count(6)) report(invariants(res, opt.search.delta));
        if (want.count(8)) report(trace_monotonicity(res));
        std::cout << premise(run, opt) << std::endl;
    }
    if (want.count(7)) report(search_vs_oracle());
    if (want.count(9)) report(determinism(work, threads));

    std::size_t passed = 0;
    for (const auto& v : verdicts) passed += v.pass;
    std::cout << "acceptance: " << passed << "/" << verdicts.size() << " criteria passed" << std::endl;
    return passed == verdicts.size() ? 0 : 1;
}
