#include "ssc/cli.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ssc/completers.hpp"
#include "ssc/io/ply.hpp"
#include "ssc/io/sisv.hpp"
#include "ssc/metrics.hpp"
#include "ssc/trace_io.hpp"

namespace fs = std::filesystem;

namespace ssc {

namespace {

bool dir_usable(const std::string& dir, bool force, std::string& err) {
    if (fs::exists(dir) && !fs::is_directory(dir)) {
        err = dir + " exists and is not a directory";
        return false;
    }
    if (fs::exists(dir) && !fs::is_empty(dir) && !force) {
        err = dir + " is not empty (pass --force to overwrite)";
        return false;
    }
    return true;
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first error.
template <typename Fn>
void parallel_for(int n, int jobs, Fn fn) {
    jobs = std::max(1, std::min(jobs, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t)
        pool.emplace_back([&] {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= n || failed.load()) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!failed.exchange(true)) error = std::current_exception();
                    return;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

std::string scene_dir_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "scene_%04d", index);
    return buf;
}

nlohmann::json loop_config_json(const LoopConfig& cfg) {
    return {{"iterations", cfg.iterations},
            {"scene_completer", cfg.scene_completer},
            {"instance_completer", cfg.instance_completer},
            {"sample_points", cfg.sample_points},
            {"pool_points", cfg.pool_points},
            {"cluster_radius", cfg.cluster_radius},
            {"min_component", cfg.min_component},
            {"min_objectness", cfg.min_objectness},
            {"early_stop_fraction", cfg.early_stop_fraction},
            {"occ_threshold", cfg.occ_threshold},
            {"seed", cfg.seed},
            {"selection",
             {{"sigma", cfg.selection.sigma},
              {"beta", cfg.selection.beta},
              {"max_proposals", cfg.selection.max_proposals},
              {"pos_radius", cfg.selection.pos_radius},
              {"neg_radius", cfg.selection.neg_radius},
              {"nms_iou", cfg.selection.nms_iou}}}};
}

/// Runs one bundle through the loop and writes its trace directory.
/// Returns the per-stage summary lines.
std::vector<std::string> complete_one_bundle(const std::string& bundle_dir, const std::string& out_dir,
                                             const CompleteOptions& opt, const ClassPalette& palette,
                                             std::shared_ptr<const ShapeLibrary> library) {
    SceneBundle bundle = load_bundle(bundle_dir, palette);

    LoopDependencies deps;
    deps.palette = &palette;
    deps.camera_origin = bundle.scene.cam.translation;
    deps.scene = make_scene_completer(opt.loop.scene_completer, &bundle.scene.gt);
    deps.instance = make_instance_completer(opt.loop.instance_completer, library, bundle.scene.instances,
                                            1024, 0, opt.loop.seed);

    auto tsdf = std::make_shared<const TsdfVolume>(std::move(bundle.tsdf));
    LoopTrace trace = run_loop(tsdf, bundle.semantics, opt.loop, deps);

    write_trace(out_dir, trace, palette, opt.loop.occ_threshold, &bundle.scene.gt);
    {
        nlohmann::json echo;
        echo["bundle"] = bundle_dir;
        echo["loop"] = loop_config_json(opt.loop);
        echo["shape_library"] = opt.shape_library_dir.empty() ? "builtin" : opt.shape_library_dir;
        std::ofstream out(fs::path(out_dir) / "run_config.json");
        out << echo.dump(2) << "\n";
    }

    std::vector<std::string> lines;
    auto metrics = evaluate_trace(trace, bundle.scene.gt, opt.loop.occ_threshold);
    for (const StageMetrics& sm : metrics) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s s%d: SC-IoU %.3f  SSC-mIoU %.3f", bundle_dir.c_str(),
                      sm.iteration, sm.sc.iou, sm.ssc.mean_iou);
        lines.emplace_back(buf);
    }
    return lines;
}

LabelVolume load_pred_labels(const std::string& volume_path, int num_classes, float occ_threshold) {
    SisvVolume raw = read_sisv(volume_path);
    if (raw.dtype == 1 && raw.channels == 1) return load_labels(volume_path, num_classes);
    if (raw.dtype == 0 && raw.channels >= 2) {
        SemanticVolume sem = load_semantic(volume_path);
        return argmax_labels(sem, occ_threshold);
    }
    throw IoError(volume_path, 0, "expected a label or semantic volume");
}

}  // namespace

int cmd_generate(const GenerateOptions& opt) {
    std::string err;
    if (!dir_usable(opt.out_dir, opt.force, err)) {
        std::cerr << "error: " << err << "\n";
        return kExitUsage;
    }
    fs::create_directories(opt.out_dir);

    const ClassPalette& palette = ClassPalette::indoor11();
    ShapeLibrary library = ShapeLibrary::builtin(palette);

    if (opt.count == 0) std::cerr << "warning: --count 0, no bundles generated\n";

    std::vector<std::string> bundle_dirs(size_t(opt.count));
    parallel_for(opt.count, opt.jobs, [&](int i) {
        SceneRecipe recipe = opt.recipe;
        recipe.seed = opt.seed + uint64_t(i);
        SyntheticScene scene = generate(recipe, palette, library);
        auto [tsdf, sem] = occlude(scene);
        SceneBundle bundle{std::move(scene), std::move(tsdf), std::move(sem)};
        std::string dir = (fs::path(opt.out_dir) / scene_dir_name(i)).string();
        fs::create_directories(dir);
        save_bundle(dir, bundle, palette);
        bundle_dirs[size_t(i)] = scene_dir_name(i);
    });

    nlohmann::json manifest;
    manifest["format"] = "ssc-dataset-v1";
    manifest["seed"] = opt.seed;
    manifest["count"] = opt.count;
    manifest["recipe"] = {{"min_instances", opt.recipe.min_instances},
                          {"max_instances", opt.recipe.max_instances},
                          {"seg_noise_rate", opt.recipe.seg_noise_rate}};
    nlohmann::json bundles = nlohmann::json::array();
    for (const std::string& d : bundle_dirs)
        bundles.push_back({{"dir", d}, {"manifest_crc32", file_crc32((fs::path(opt.out_dir) / d / "manifest.json").string())}});
    manifest["bundles"] = bundles;

    std::ofstream out(fs::path(opt.out_dir) / "dataset.json");
    out << manifest.dump(2) << "\n";

    if (!opt.quiet)
        for (const std::string& d : bundle_dirs) std::cout << (fs::path(opt.out_dir) / d).string() << "\n";
    return kExitOk;
}

int cmd_complete(const CompleteOptions& opt) {
    std::string err;
    if (!dir_usable(opt.out_dir, opt.force, err)) {
        std::cerr << "error: " << err << "\n";
        return kExitUsage;
    }

    const ClassPalette& palette = ClassPalette::indoor11();
    auto library = std::make_shared<const ShapeLibrary>(
        opt.shape_library_dir.empty() ? ShapeLibrary::builtin(palette)
                                      : ShapeLibrary::load(opt.shape_library_dir));

    // dataset directory or a single bundle?
    std::vector<std::string> bundles;
    std::vector<std::string> trace_dirs;
    if (fs::exists(fs::path(opt.bundle_dir) / "dataset.json")) {
        std::ifstream in(fs::path(opt.bundle_dir) / "dataset.json");
        nlohmann::json ds = nlohmann::json::parse(in);
        for (const auto& b : ds.at("bundles")) {
            std::string d = b.at("dir").get<std::string>();
            bundles.push_back((fs::path(opt.bundle_dir) / d).string());
            trace_dirs.push_back((fs::path(opt.out_dir) / d).string());
        }
    } else {
        bundles.push_back(opt.bundle_dir);
        trace_dirs.push_back(opt.out_dir);
    }

    std::vector<std::vector<std::string>> summaries(bundles.size());
    parallel_for(int(bundles.size()), opt.jobs, [&](int i) {
        fs::create_directories(trace_dirs[size_t(i)]);
        summaries[size_t(i)] =
            complete_one_bundle(bundles[size_t(i)], trace_dirs[size_t(i)], opt, palette, library);
    });

    if (!opt.quiet)
        for (const auto& lines : summaries)
            for (const std::string& line : lines) std::cout << line << "\n";
    return kExitOk;
}

int cmd_evaluate(const EvaluateOptions& opt) {
    const ClassPalette& palette = ClassPalette::indoor11();

    SceneBundle gt_bundle = load_bundle(opt.gt_bundle, palette);
    const LabelVolume& gt = gt_bundle.scene.gt;

    LabelVolume pred(gt.spec, gt.num_classes);
    std::vector<DetectionBox> pred_boxes;
    bool have_det = false;

    if (!opt.trace_dir.empty()) {
        pred = read_trace_labels(opt.trace_dir, palette.num_classes());
        // detection report from the last iteration's proposals, when present
        for (int i = 64; i >= 1 && !have_det; --i) {
            fs::path p = fs::path(opt.trace_dir) / ("i" + std::to_string(i)) / "proposals.txt";
            if (fs::exists(p)) {
                pred_boxes = read_proposals_txt(p.string());
                have_det = true;
            }
        }
    } else if (!opt.volume_path.empty()) {
        pred = load_pred_labels(opt.volume_path, palette.num_classes(), opt.occ_threshold);
    } else {
        std::cerr << "error: evaluate needs --trace or --volume\n";
        return kExitUsage;
    }

    if (!(pred.spec == gt.spec)) {
        std::cerr << "error: prediction and ground-truth grids differ\n";
        return kExitData;
    }
    pred.vis = gt.vis;  // evaluation always masks by ground truth

    SCReport sc = eval_sc(pred, gt);
    SSCReport ssc = eval_ssc(pred, gt, opt.fixed_class_list);

    DetReport det;
    if (have_det) {
        std::vector<DetectionBox> gt_boxes;
        for (const GtInstance& inst : gt_bundle.scene.instances)
            gt_boxes.push_back({inst.box, inst.class_id, 0.0});
        det = eval_detection(pred_boxes, gt_boxes, opt.det_iou);
    }

    if (opt.report == "json") {
        std::cout << format_report_json(sc, ssc, palette, have_det ? &det : nullptr) << "\n";
    } else {
        std::cout << format_report_table(sc, ssc, palette, "pred");
        if (have_det) {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "detection | recall %.3f  mAP(IoU=%.2f) %.3f\n", det.recall,
                          opt.det_iou, det.mean_ap);
            std::cout << buf;
        }
    }
    return kExitOk;
}

int cmd_export_mesh(const ExportMeshOptions& opt) {
    const ClassPalette& palette = ClassPalette::indoor11();
    LabelVolume labels = load_pred_labels(opt.volume_path, palette.num_classes(), opt.occ_threshold);

    TriMesh mesh;
    const GridSpec& spec = labels.spec;
    // fixed cube topology, 8 vertices and 12 triangles per occupied voxel
    static const int corner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                     {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
    static const uint32_t tris[12][3] = {{0, 2, 1}, {0, 3, 2}, {4, 5, 6}, {4, 6, 7},
                                         {0, 1, 5}, {0, 5, 4}, {3, 7, 6}, {3, 6, 2},
                                         {0, 4, 7}, {0, 7, 3}, {1, 2, 6}, {1, 6, 5}};

    for (size_t i = 0; i < spec.count(); ++i) {
        int cls = labels.labels[i];
        if (cls == 0) continue;
        VoxelIndex v = spec.unindex(i);
        Vec3f base = spec.origin +
                     Vec3f{v.x * spec.voxel_size, v.y * spec.voxel_size, v.z * spec.voxel_size};
        std::array<uint8_t, 3> color{128, 128, 128};
        if (cls <= palette.num_classes()) color = palette.info(cls).color;

        uint32_t v0 = uint32_t(mesh.vertices.size());
        for (const auto& c : corner) {
            mesh.vertices.push_back(base + Vec3f{c[0] * spec.voxel_size, c[1] * spec.voxel_size,
                                                 c[2] * spec.voxel_size});
            mesh.colors.push_back(color);
        }
        for (const auto& t : tris) mesh.faces.push_back({v0 + t[0], v0 + t[1], v0 + t[2]});
    }

    write_ply_mesh(opt.out_path, mesh,
                   opt.format == "ascii" ? PlyFormat::Ascii : PlyFormat::BinaryLittleEndian);
    std::cout << opt.out_path << ": " << mesh.vertices.size() << " vertices, " << mesh.faces.size()
              << " triangles\n";
    return kExitOk;
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"semantic scene completion pipeline (voxelization, proposals, instance completion, "
                 "iterative refinement, evaluation)"};
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "read options from a config file (global flag; use [subcommand] sections)");
    app.failure_message(CLI::FailureMessage::help);

    GenerateOptions gen;
    auto* g = app.add_subcommand("generate", "generate synthetic scene bundles");
    g->add_option("--out", gen.out_dir, "output dataset directory")->required();
    g->add_option("--count", gen.count, "number of scenes")->check(CLI::NonNegativeNumber);
    g->add_option("--seed", gen.seed, "base seed (scene i uses seed+i)");
    g->add_option("--min-instances", gen.recipe.min_instances, "minimum instances per scene");
    g->add_option("--max-instances", gen.recipe.max_instances, "maximum instances per scene");
    g->add_option("--noise", gen.recipe.seg_noise_rate, "2D label confusion rate")
        ->check(CLI::Range(0.0, 1.0));
    g->add_option("--jobs", gen.jobs, "parallel scene workers")->check(CLI::PositiveNumber);
    g->add_flag("--force", gen.force, "overwrite an existing output directory");
    g->add_flag("--quiet", gen.quiet, "suppress bundle path listing");

    CompleteOptions comp;
    auto* c = app.add_subcommand("complete", "run the completion loop on a bundle or dataset");
    c->add_option("--bundle", comp.bundle_dir, "bundle or dataset directory")->required();
    c->add_option("--out", comp.out_dir, "trace output directory")->required();
    c->add_option("--iterations", comp.loop.iterations, "refinement iterations N")
        ->check(CLI::NonNegativeNumber);
    c->add_option("--scene-completer", comp.loop.scene_completer, "heuristic|oracle|passthrough");
    c->add_option("--instance-completer", comp.loop.instance_completer,
                  "shape_prior|oracle|passthrough");
    c->add_option("--shape-library", comp.shape_library_dir, "shape library directory (default builtin)");
    c->add_option("--seed", comp.loop.seed, "pipeline seed");
    c->add_option("--sample-points", comp.loop.sample_points, "scene points sampled per iteration (M)");
    c->add_option("--pool-points", comp.loop.pool_points, "points pooled per proposal (N_P)");
    c->add_option("--sigma", comp.loop.selection.sigma, "training selection center distance");
    c->add_option("--beta", comp.loop.selection.beta, "training selection objectness floor");
    c->add_option("--max-proposals", comp.loop.selection.max_proposals, "training selection cap K");
    c->add_option("--nms-iou", comp.loop.selection.nms_iou, "NMS IoU threshold");
    c->add_option("--min-objectness", comp.loop.min_objectness, "inference objectness floor");
    c->add_option("--early-stop-frac", comp.loop.early_stop_fraction,
                  "stop when the label diff fraction falls below this (0 disables)");
    c->add_option("--jobs", comp.jobs, "parallel bundle workers")->check(CLI::PositiveNumber);
    c->add_flag("--force", comp.force, "overwrite an existing output directory");
    c->add_flag("--quiet", comp.quiet, "suppress per-stage summary lines");

    EvaluateOptions ev;
    auto* e = app.add_subcommand("evaluate", "score a trace or volume against ground truth");
    auto* ev_trace = e->add_option("--trace", ev.trace_dir, "trace directory");
    e->add_option("--volume", ev.volume_path, "SISV volume file")->excludes(ev_trace);
    e->add_option("--gt", ev.gt_bundle, "ground-truth bundle directory")->required();
    e->add_option("--report", ev.report, "report format")->check(CLI::IsMember({"table", "json"}));
    e->add_flag("--fixed-classes", ev.fixed_class_list,
                "average the SSC mean over the full class list (absent classes count as 0)");
    e->add_option("--iou", ev.det_iou, "detection IoU threshold")->check(CLI::Range(0.0, 1.0));

    ExportMeshOptions ex;
    auto* x = app.add_subcommand("export-mesh", "write a colored voxel-cube PLY");
    x->add_option("--volume", ex.volume_path, "SISV volume file")->required();
    x->add_option("--out", ex.out_path, "output PLY path")->required();
    x->add_option("--format", ex.format, "PLY encoding")->check(CLI::IsMember({"ascii", "binary"}));

    try {
        app.parse(argc, const_cast<char**>(argv));
    } catch (const CLI::ParseError& err) {
        return app.exit(err) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (g->parsed()) return cmd_generate(gen);
        if (c->parsed()) return cmd_complete(comp);
        if (e->parsed()) return cmd_evaluate(ev);
        if (x->parsed()) return cmd_export_mesh(ex);
    } catch (const std::invalid_argument& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace ssc
