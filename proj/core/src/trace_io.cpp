#include "ssc/trace_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ssc/io/ply.hpp"
#include "ssc/io/sisv.hpp"
#include "ssc/pointgrid.hpp"

namespace fs = std::filesystem;

namespace ssc {

std::vector<StageMetrics> evaluate_trace(const LoopTrace& trace, const LabelVolume& gt,
                                         float occ_threshold) {
    std::vector<StageMetrics> out;
    for (const LoopStage& stage : trace.stages) {
        if (!stage_has_volumes(stage)) continue;  // released by low-memory mode
        StageMetrics sm;
        sm.iteration = stage.iteration;
        LabelVolume pred = argmax_labels(stage.completed, occ_threshold, trace.tsdf->vis);
        sm.sc = eval_sc(pred, gt);
        sm.ssc = eval_ssc(pred, gt);
        out.push_back(std::move(sm));
    }
    return out;
}

void write_proposals_txt(const std::string& path, std::span<const Proposal> proposals) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError(path, 0, "cannot open for writing");
    char line[256];
    for (const Proposal& p : proposals) {
        std::snprintf(line, sizeof(line), "%d %.6f %.6f %.6f %.6f %.6f %.6f %.6f\n", p.argmax_class(),
                      double(p.center.x), double(p.center.y), double(p.center.z), double(p.size.x),
                      double(p.size.y), double(p.size.z), double(p.objectness));
        out << line;
    }
}

std::vector<DetectionBox> read_proposals_txt(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path, 0, "cannot open");
    std::vector<DetectionBox> out;
    DetectionBox b;
    double obj;
    while (in >> b.class_id >> b.box.center.x >> b.box.center.y >> b.box.center.z >> b.box.size.x >>
           b.box.size.y >> b.box.size.z >> obj) {
        b.score = obj;
        out.push_back(b);
    }
    return out;
}

void write_trace(const std::string& dir, const LoopTrace& trace, const ClassPalette& palette,
                 float occ_threshold, const LabelVolume* gt) {
    fs::create_directories(dir);

    nlohmann::json manifest;
    manifest["format"] = "ssc-trace-v1";
    manifest["config_fingerprint"] = trace.config_fingerprint;
    manifest["requested_iterations"] = trace.requested_iterations;
    manifest["early_stopped"] = trace.early_stopped;

    std::vector<StageMetrics> metrics;
    if (gt) metrics = evaluate_trace(trace, *gt, occ_threshold);

    nlohmann::json stages = nlohmann::json::array();
    std::vector<std::string> files;

    size_t metric_index = 0;
    for (size_t si = 0; si < trace.stages.size(); ++si) {
        const LoopStage& stage = trace.stages[si];
        nlohmann::json js;
        js["iteration"] = stage.iteration;
        js["completer_fingerprint"] = stage.completer_fingerprint;

        if (!stage_has_volumes(stage)) {
            js["volume"] = nullptr;  // released by low-memory mode
            stages.push_back(std::move(js));
            continue;
        }
        std::string vol_file = "s" + std::to_string(stage.iteration) + ".sisv";
        LabelVolume labels = argmax_labels(stage.completed, occ_threshold, trace.tsdf->vis);
        save_labels((fs::path(dir) / vol_file).string(), labels);
        files.push_back(vol_file);
        js["volume"] = vol_file;

        if (stage.iteration > 0) {
            std::string idir = "i" + std::to_string(stage.iteration);
            fs::create_directories(fs::path(dir) / idir);
            std::string prop_file = idir + "/proposals.txt";
            write_proposals_txt((fs::path(dir) / prop_file).string(), stage.proposals);
            files.push_back(prop_file);
            js["proposals"] = prop_file;
            js["num_proposals"] = stage.proposals.size();

            nlohmann::json inst_files = nlohmann::json::array();
            for (size_t k = 0; k < stage.instances.size(); ++k) {
                const CompletedInstance& inst = stage.instances[k];
                std::string ply = idir + "/instance_" + std::to_string(k) + ".ply";
                PointCloud world = decanonicalize(inst.points, inst.frame);
                write_ply_points((fs::path(dir) / ply).string(), world, PlyFormat::BinaryLittleEndian,
                                 {uint8_t(inst.class_id)});
                files.push_back(ply);
                inst_files.push_back(ply);
            }
            js["instances"] = inst_files;
        }

        if (gt) {
            const StageMetrics& sm = metrics[metric_index++];
            nlohmann::json per;
            for (const auto& c : palette.classes()) per[c.name] = sm.ssc.per_class[size_t(c.id) - 1].iou;
            js["metrics"] = {{"sc_iou", sm.sc.iou},
                             {"sc_precision", sm.sc.precision},
                             {"sc_recall", sm.sc.recall},
                             {"ssc_miou", sm.ssc.mean_iou},
                             {"ssc_per_class", per}};
        }
        stages.push_back(std::move(js));
    }
    manifest["stages"] = stages;

    nlohmann::json checksums;
    for (const std::string& f : files) checksums[f] = file_crc32((fs::path(dir) / f).string());
    manifest["checksums"] = checksums;

    std::ofstream out(fs::path(dir) / "trace.json");
    if (!out) throw IoError((fs::path(dir) / "trace.json").string(), 0, "cannot open for writing");
    out << manifest.dump(2) << "\n";
}

LabelVolume read_trace_labels(const std::string& dir, int num_classes, int stage) {
    std::ifstream in(fs::path(dir) / "trace.json");
    if (!in) throw IoError((fs::path(dir) / "trace.json").string(), 0, "cannot open trace manifest");
    nlohmann::json manifest = nlohmann::json::parse(in);
    const auto& stages = manifest.at("stages");
    if (stages.empty()) throw IoError(dir, 0, "trace has no stages");
    size_t idx = stage < 0 ? stages.size() - 1 : size_t(stage);
    if (idx >= stages.size()) throw IoError(dir, 0, "trace stage out of range");
    std::string vol = stages.at(idx).at("volume").get<std::string>();
    return load_labels((fs::path(dir) / vol).string(), num_classes);
}

}  // namespace ssc
