#include "rexo/cli.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "rexo/diffusion.hpp"
#include "rexo/pipeline.hpp"
#include "rexo/render.hpp"
#include "rexo/scenegen.hpp"
#include "rexo/tensor.hpp"

namespace fs = std::filesystem;

namespace rexo::cli {

namespace {

constexpr int kHistogramBins = 20;

std::string join(const std::string& dir, const char* name) {
    return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec && !fs::is_directory(dir))
        throw std::runtime_error("cannot create directory " + dir);
}

void require_file(const std::string& path) {
    if (!fs::is_regular_file(path))
        throw io::ConfigError("missing input " + path);
}

ScheduleKind schedule_kind(const io::RunConfig& cfg) {
    return cfg.schedule == "linear" ? ScheduleKind::linear : ScheduleKind::cosine;
}

RadarFrameSet render_frames(const io::RunConfig& cfg, const Scene& scene) {
    if (cfg.sim == "fft")
        return render_scene(scene.scatterers, RadarArrayConfig{}, cfg.stack);
    return blob_heatmap(scene.scatterers, cfg.stack, cfg.sigma_blob);
}

std::unique_ptr<Detector> make_detector(const io::RunConfig& cfg, const Scene& scene,
                                        std::uint64_t det_seed) {
    if (cfg.detector == "oracle")
        return std::make_unique<OracleDetector>(scene.annotations, cfg.oracle_eta0,
                                                cfg.bounds, det_seed);
    return std::make_unique<CentroidDetector>();
}

void write_manifest(const io::RunConfig& cfg, const std::string& command,
                    std::optional<std::uint64_t> infer_seed, const char* name) {
    io::json m{{"command", command},
               {"config", io::config_json(cfg)},
               {"calib", io::to_json(default_calib())}};
    if (infer_seed) m["infer_seed"] = *infer_seed;
    io::write_text_file(join(cfg.out, name), m.dump(2) + "\n");
}

std::vector<Scene> load_scene_set(const io::RunConfig& cfg) {
    const std::string sdir = cfg.scenes_dir();
    const std::string sp = join(sdir, "scatterers.jsonl");
    const std::string ap = join(sdir, "annotations.jsonl");
    require_file(sp);
    require_file(ap);
    return io::load_scenes(sp, ap);
}

EvalResult evaluate_detections(const std::vector<std::vector<Detection>>& dets,
                               const std::vector<Scene>& scenes) {
    std::vector<EvalFrame> frames(std::max(dets.size(), scenes.size()));
    for (size_t i = 0; i < frames.size(); ++i) {
        if (i < dets.size()) frames[i].dets = dets[i];
        if (i < scenes.size()) frames[i].gts = scenes[i].annotations;
    }
    return evaluate(frames);
}

void emit_heatmaps(const std::string& run_dir, const std::string& scenes_dir,
                   const std::string& out_dir) {
    const std::string hor_path = join(run_dir, "hor0.rxh");
    const std::string ver_path = join(run_dir, "ver0.rxh");
    const std::string det_path = join(run_dir, "detections.jsonl");
    const std::string ann_path = join(scenes_dir, "annotations.jsonl");
    const std::string sca_path = join(scenes_dir, "scatterers.jsonl");
    require_file(hor_path);
    require_file(ver_path);
    require_file(det_path);
    require_file(ann_path);
    require_file(sca_path);

    auto dets = io::load_detections(det_path);
    auto scenes = io::load_scenes(sca_path, ann_path);
    std::vector<ViewBox2D> gt_h, gt_v, pr_h, pr_v;
    if (!scenes.empty())
        for (const Annotation& a : scenes[0].annotations) {
            auto [hb, vb] = project_to_views(a.box3d);
            gt_h.push_back(hb);
            gt_v.push_back(vb);
        }
    if (!dets.empty())
        for (const Detection& d : dets[0]) {
            auto [hb, vb] = project_to_views(d.box3d);
            pr_h.push_back(hb);
            pr_v.push_back(vb);
        }

    const GridSpec grid{};  // tensors are stored on the default grid
    render::write_png(join(out_dir, "heatmap_hor.png"),
                      render::heatmap_image(load_rxh(hor_path), grid, gt_h, pr_h));
    render::write_png(join(out_dir, "heatmap_ver.png"),
                      render::heatmap_image(load_rxh(ver_path), grid, gt_v, pr_v));
}

void emit_histogram(const std::string& run_dir, const std::string& compare_dir,
                    const std::string& out_dir) {
    const std::string csv = join(run_dir, "iou_histogram.csv");
    require_file(csv);
    std::vector<int> counts = io::load_histogram_csv(csv);
    std::string svg;
    if (!compare_dir.empty()) {
        const std::string csv2 = join(compare_dir, "iou_histogram.csv");
        require_file(csv2);
        std::vector<int> other = io::load_histogram_csv(csv2);
        svg = render::histogram_svg(counts, "primary", &other, "comparison");
    } else {
        svg = render::histogram_svg(counts, "primary");
    }
    io::write_text_file(join(out_dir, "iou_histogram.svg"), svg);
}

}  // namespace

int num_workers() {
    if (const char* env = std::getenv("REXO_NUM_WORKERS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1)
            return static_cast<int>(std::min(v, 64L));
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc ? static_cast<int>(std::min(hc, 16u)) : 4;
}

std::vector<std::vector<Detection>> infer_scenes(const io::RunConfig& cfg,
                                                 const std::vector<Scene>& scenes,
                                                 std::uint64_t seed) {
    cfg.validate();
    const NoiseSchedule sched = build_schedule(cfg.T, schedule_kind(cfg));
    const std::vector<int> tau = tau_subsequence(cfg.T, cfg.steps);
    const CameraCalib calib = default_calib();

    InferenceConfig icfg;
    icfg.n_boxes = cfg.n;
    icfg.threshold = cfg.threshold;
    icfg.eta = cfg.eta;
    icfg.box_renewal = cfg.box_renewal;
    icfg.ground = cfg.ground;
    icfg.nms_iou = cfg.nms_iou;
    icfg.bounds = cfg.bounds;

    std::vector<std::vector<Detection>> dets(scenes.size());
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex err_mutex;
    std::string first_error;

    auto work = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= scenes.size() || failed.load()) return;
            try {
                const Scene& sc = scenes[i];
                const RadarFrameSet frames = render_frames(cfg, sc);
                Rng base = Rng(seed).split(i);
                Rng sampler = base.split(0);
                auto det = make_detector(cfg, sc, base.split(1).next_u64());
                dets[i] = run_inference(frames, *det, calib, sched, tau, icfg, sampler);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lk(err_mutex);
                if (!failed.exchange(true))
                    first_error = "frame " + std::to_string(i) + ": " + e.what();
            }
        }
    };

    const int nw = static_cast<int>(
        std::min<size_t>(num_workers(), std::max<size_t>(1, scenes.size())));
    std::vector<std::thread> pool;
    for (int w = 1; w < nw; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    if (failed.load()) throw std::runtime_error("inference failed: " + first_error);
    return dets;
}

void cmd_simulate(const io::RunConfig& cfg) {
    cfg.validate();
    ensure_dir(cfg.out);
    ensure_dir(cfg.scenes_dir());
    const CameraCalib calib = default_calib();
    std::vector<Scene> scenes(cfg.frames);
    for (int i = 0; i < cfg.frames; ++i) {
        Rng r = Rng(cfg.seed).split(0x5CEu).split(static_cast<std::uint64_t>(i));
        scenes[i] = generate_scene(r, calib, cfg.scenegen);
    }
    io::save_scenes(join(cfg.scenes_dir(), "scatterers.jsonl"),
                    join(cfg.scenes_dir(), "annotations.jsonl"), scenes);
    write_manifest(cfg, "simulate", std::nullopt, "manifest_simulate.json");
}

void cmd_infer(const io::RunConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ensure_dir(cfg.out);
    const std::vector<Scene> scenes = load_scene_set(cfg);
    const auto dets = infer_scenes(cfg, scenes, seed);
    io::save_detections(join(cfg.out, "detections.jsonl"), dets);
    // Keep the first frame's maps around for later rendering; a run with no
    // scenes still gets (all-zero) maps so downstream plotting always works.
    const RadarFrameSet frames = render_frames(cfg, scenes.empty() ? Scene{} : scenes[0]);
    save_rxh(join(cfg.out, "hor0.rxh"), frames.hor);
    save_rxh(join(cfg.out, "ver0.rxh"), frames.ver);
    write_manifest(cfg, "infer", seed, "manifest_infer.json");
}

EvalResult cmd_eval(const io::RunConfig& cfg) {
    cfg.validate();
    ensure_dir(cfg.out);
    const std::vector<Scene> scenes = load_scene_set(cfg);
    const std::string det_path = join(cfg.out, "detections.jsonl");
    require_file(det_path);
    const auto dets = io::load_detections(det_path);

    const EvalResult r = evaluate_detections(dets, scenes);
    io::save_metrics_json(join(cfg.out, "metrics.json"), r);
    io::save_metrics_csv(join(cfg.out, "metrics.csv"), r);
    io::save_histogram_csv(join(cfg.out, "iou_histogram.csv"),
                           iou_histogram(r.ious, kHistogramBins));
    io::save_loss_csv(join(cfg.out, "loss.csv"), dets, scenes, cfg.weights);
    write_manifest(cfg, "eval", std::nullopt, "manifest_eval.json");
    return r;
}

void cmd_plot(const std::string& run_dir, const std::string& compare_dir,
              const std::string& out_dir) {
    ensure_dir(out_dir);
    emit_histogram(run_dir, compare_dir, out_dir);
    emit_heatmaps(run_dir, run_dir, out_dir);
}

EvalResult cmd_run(const io::RunConfig& cfg, std::optional<std::uint64_t> seed) {
    cfg.validate();
    const std::uint64_t infer_seed = seed.value_or(cfg.seed);
    cmd_simulate(cfg);
    cmd_infer(cfg, infer_seed);
    EvalResult r = cmd_eval(cfg);
    emit_histogram(cfg.out, "", cfg.out);
    emit_heatmaps(cfg.out, cfg.scenes_dir(), cfg.out);

    if (!cfg.steps_sweep.empty()) {
        const std::vector<Scene> scenes = load_scene_set(cfg);
        std::ostringstream csv;
        csv << "steps,ap,ap50,ap75,ar1,ar10\n";
        for (int s : cfg.steps_sweep) {
            io::RunConfig swept = cfg;
            swept.steps = s;
            const EvalResult er =
                evaluate_detections(infer_scenes(swept, scenes, infer_seed), scenes);
            auto cell = [](const std::optional<double>& v) {
                if (!v) return std::string();
                char buf[40];
                std::snprintf(buf, sizeof(buf), "%.9g", *v * 100.0);
                return std::string(buf);
            };
            csv << s << "," << cell(er.ap) << "," << cell(er.ap50) << ","
                << cell(er.ap75) << "," << cell(er.ar1) << "," << cell(er.ar10)
                << "\n";
        }
        io::write_text_file(join(cfg.out, "steps_sweep.csv"), csv.str());
    }

    write_manifest(cfg, "run", infer_seed, "manifest.json");
    return r;
}

int main_cli(int argc, const char* const* argv) {
    CLI::App app{"rexo: multi-view radar 3D person detection via box diffusion"};
    app.require_subcommand(1);

    std::string config_path, out_override, scenes_override;
    std::uint64_t seed = 0;
    std::string plot_run, plot_compare, plot_out;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration")
            ->required();
        sub->add_option("--out", out_override, "override output directory");
        sub->add_option("--scenes", scenes_override, "override scene directory");
    };

    CLI::App* c_sim = app.add_subcommand("simulate", "generate synthetic scenes");
    add_common(c_sim);
    CLI::App* c_inf = app.add_subcommand("infer", "run reverse diffusion over scenes");
    add_common(c_inf);
    c_inf->add_option("--seed", seed, "inference seed")->required();
    CLI::App* c_eval = app.add_subcommand("eval", "score detections against annotations");
    add_common(c_eval);
    CLI::App* c_run = app.add_subcommand("run", "simulate, infer, eval and plot");
    add_common(c_run);
    c_run->add_option("--seed", seed, "inference seed (default: config seed)");

    CLI::App* c_plot = app.add_subcommand("plot", "render histogram SVG and heatmaps");
    c_plot->add_option("--run", plot_run, "finished run directory")->required();
    c_plot->add_option("--compare", plot_compare, "second run to overlay");
    c_plot->add_option("--out", plot_out, "output directory (default: run dir)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (c_plot->parsed()) {
            cmd_plot(plot_run, plot_compare, plot_out.empty() ? plot_run : plot_out);
            return kExitOk;
        }
        io::RunConfig cfg = io::load_config(config_path);
        if (!out_override.empty()) cfg.out = out_override;
        if (!scenes_override.empty()) cfg.scene_dir = scenes_override;
        cfg.validate();
        if (c_sim->parsed()) {
            cmd_simulate(cfg);
        } else if (c_inf->parsed()) {
            cmd_infer(cfg, seed);
        } else if (c_eval->parsed()) {
            cmd_eval(cfg);
        } else if (c_run->parsed()) {
            cmd_run(cfg, c_run->count("--seed") ? std::optional<std::uint64_t>(seed)
                                                : std::nullopt);
        }
        return kExitOk;
    } catch (const io::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
}

}  // namespace rexo::cli
