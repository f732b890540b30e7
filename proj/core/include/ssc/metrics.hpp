#pragma once

#include <span>
#include <string>
#include <vector>

#include "ssc/palette.hpp"
#include "ssc/proposals.hpp"
#include "ssc/volumes.hpp"

namespace ssc {

/// Binary scene-completion report over occluded in-frustum voxels. Ratios
/// are recomputed from the integer counts; 0/0 cases report 1.0.
struct SCReport {
    uint64_t tp = 0, fp = 0, fn = 0;
    double precision = 1.0, recall = 1.0, iou = 1.0;
};

/// Per-class semantic report over surface and occluded in-frustum voxels.
struct SSCReport {
    struct PerClass {
        uint64_t tp = 0, fp = 0, fn = 0;
        bool present = false;  // class occurs in gt or prediction inside the mask
        double iou = 0.0;
    };
    std::vector<PerClass> per_class;  // index c-1 for class id c
    double mean_iou = 0.0;
    uint64_t evaluated_voxels = 0;
};

struct DetReport {
    double recall = 0.0;  // matched gt / total gt, all classes pooled
    double mean_ap = 0.0;
    std::vector<double> per_class_ap;  // -1 for classes with no gt
    uint64_t total_gt = 0, matched_gt = 0;
};

/// Evaluation mask always comes from the ground-truth volume.
SCReport eval_sc(const LabelVolume& pred, const LabelVolume& gt);

/// `fixed_class_list` forces the mean over all C classes (absent classes
/// count as 0) for format parity with fixed-class benchmarks; the default
/// mean skips classes absent from both volumes.
SSCReport eval_ssc(const LabelVolume& pred, const LabelVolume& gt, bool fixed_class_list = false);

struct DetectionBox {
    Box3f box;
    int class_id = 0;
    double score = 0.0;  // ignored on ground-truth boxes
};

/// Greedy per-class matching at the IoU threshold by descending score;
/// AP by all-point precision/recall interpolation, mAP over classes with gt.
DetReport eval_detection(std::span<const DetectionBox> pred, std::span<const DetectionBox> gt,
                         double iou_threshold = 0.25);

/// Aligned text table in the benchmark column order:
/// prec. recall IoU | ceil. floor wall win. chair bed sofa table tvs furn. objs. avg.
std::string format_report_table(const SCReport& sc, const SSCReport& ssc, const ClassPalette& palette,
                                const std::string& row_label);

/// Same numbers as JSON (single object; detection block optional).
std::string format_report_json(const SCReport& sc, const SSCReport& ssc, const ClassPalette& palette,
                               const DetReport* det = nullptr);

}  // namespace ssc
