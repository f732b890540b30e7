#include "ssc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

namespace ssc {

namespace {

double ratio(uint64_t num, uint64_t den) { return den == 0 ? 1.0 : double(num) / double(den); }

void check_specs(const LabelVolume& pred, const LabelVolume& gt) {
    if (!(pred.spec == gt.spec)) throw std::invalid_argument("metric: volume specs differ");
    if (pred.num_classes != gt.num_classes)
        throw std::invalid_argument("metric: class counts differ");
}

}  // namespace

SCReport eval_sc(const LabelVolume& pred, const LabelVolume& gt) {
    check_specs(pred, gt);
    SCReport r;
    for (size_t i = 0; i < gt.labels.size(); ++i) {
        if (gt.vis[i] != Visibility::Occluded) continue;
        bool p = pred.labels[i] != 0;
        bool g = gt.labels[i] != 0;
        if (p && g)
            ++r.tp;
        else if (p && !g)
            ++r.fp;
        else if (!p && g)
            ++r.fn;
    }
    r.precision = ratio(r.tp, r.tp + r.fp);
    r.recall = ratio(r.tp, r.tp + r.fn);
    r.iou = ratio(r.tp, r.tp + r.fp + r.fn);
    return r;
}

SSCReport eval_ssc(const LabelVolume& pred, const LabelVolume& gt, bool fixed_class_list) {
    check_specs(pred, gt);
    SSCReport r;
    r.per_class.resize(size_t(gt.num_classes));

    for (size_t i = 0; i < gt.labels.size(); ++i) {
        Visibility v = gt.vis[i];
        if (v != Visibility::Surface && v != Visibility::Occluded) continue;
        ++r.evaluated_voxels;
        int p = pred.labels[i], g = gt.labels[i];
        for (int c = 1; c <= gt.num_classes; ++c) {
            auto& pc = r.per_class[size_t(c) - 1];
            bool in_p = p == c, in_g = g == c;
            if (in_p && in_g)
                ++pc.tp;
            else if (in_p)
                ++pc.fp;
            else if (in_g)
                ++pc.fn;
        }
    }

    double sum = 0.0;
    int counted = 0;
    for (auto& pc : r.per_class) {
        pc.present = (pc.tp + pc.fp + pc.fn) > 0;
        pc.iou = pc.present ? double(pc.tp) / double(pc.tp + pc.fp + pc.fn) : 0.0;
        if (fixed_class_list || pc.present) {
            sum += pc.iou;
            ++counted;
        }
    }
    r.mean_iou = counted > 0 ? sum / counted : 1.0;
    return r;
}

DetReport eval_detection(std::span<const DetectionBox> pred, std::span<const DetectionBox> gt,
                         double iou_threshold) {
    int max_class = 0;
    for (const auto& b : pred) max_class = std::max(max_class, b.class_id);
    for (const auto& b : gt) max_class = std::max(max_class, b.class_id);

    DetReport r;
    r.per_class_ap.assign(size_t(max_class), -1.0);
    r.total_gt = gt.size();

    double ap_sum = 0.0;
    int ap_classes = 0;

    for (int cls = 1; cls <= max_class; ++cls) {
        std::vector<size_t> gt_idx;
        for (size_t i = 0; i < gt.size(); ++i)
            if (gt[i].class_id == cls) gt_idx.push_back(i);

        std::vector<size_t> pred_idx;
        for (size_t i = 0; i < pred.size(); ++i)
            if (pred[i].class_id == cls) pred_idx.push_back(i);
        std::stable_sort(pred_idx.begin(), pred_idx.end(),
                         [&](size_t a, size_t b) { return pred[a].score > pred[b].score; });

        if (gt_idx.empty()) continue;  // classes without gt do not enter the mean

        std::vector<uint8_t> taken(gt_idx.size(), 0);
        std::vector<uint8_t> is_tp(pred_idx.size(), 0);
        for (size_t k = 0; k < pred_idx.size(); ++k) {
            double best_iou = iou_threshold;
            int best = -1;
            for (size_t g = 0; g < gt_idx.size(); ++g) {
                if (taken[g]) continue;
                double iou = box_iou(pred[pred_idx[k]].box, gt[gt_idx[g]].box);
                if (iou >= best_iou) {
                    best_iou = iou;
                    best = int(g);
                }
            }
            if (best >= 0) {
                taken[size_t(best)] = 1;
                is_tp[k] = 1;
                ++r.matched_gt;
            }
        }

        // all-point interpolated AP: area under the exact PR staircase with
        // precision replaced by its running maximum from the right
        std::vector<double> prec(pred_idx.size()), rec(pred_idx.size());
        uint64_t tp = 0;
        for (size_t k = 0; k < pred_idx.size(); ++k) {
            tp += is_tp[k];
            prec[k] = double(tp) / double(k + 1);
            rec[k] = double(tp) / double(gt_idx.size());
        }
        for (size_t k = pred_idx.size(); k-- > 1;) prec[k - 1] = std::max(prec[k - 1], prec[k]);

        double ap = 0.0;
        double prev_rec = 0.0;
        for (size_t k = 0; k < pred_idx.size(); ++k) {
            ap += (rec[k] - prev_rec) * prec[k];
            prev_rec = rec[k];
        }
        r.per_class_ap[size_t(cls) - 1] = ap;
        ap_sum += ap;
        ++ap_classes;
    }

    r.mean_ap = ap_classes > 0 ? ap_sum / ap_classes : 0.0;
    r.recall = r.total_gt > 0 ? double(r.matched_gt) / double(r.total_gt) : 0.0;
    return r;
}

std::string format_report_table(const SCReport& sc, const SSCReport& ssc, const ClassPalette& palette,
                                const std::string& row_label) {
    std::string head = "stage      |  prec. recall    IoU |";
    std::string row;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-10s | %6.3f %6.3f %6.3f |", row_label.c_str(), sc.precision,
                  sc.recall, sc.iou);
    row = buf;
    for (const auto& c : palette.classes()) {
        std::snprintf(buf, sizeof(buf), " %6s", c.name.c_str());
        head += buf;
        std::snprintf(buf, sizeof(buf), " %6.3f", ssc.per_class[size_t(c.id) - 1].iou);
        row += buf;
    }
    head += "   avg.";
    std::snprintf(buf, sizeof(buf), " %6.3f", ssc.mean_iou);
    row += buf;
    return head + "\n" + row + "\n";
}

std::string format_report_json(const SCReport& sc, const SSCReport& ssc, const ClassPalette& palette,
                               const DetReport* det) {
    nlohmann::json j;
    j["sc"] = {{"precision", sc.precision}, {"recall", sc.recall}, {"iou", sc.iou},
               {"tp", sc.tp},               {"fp", sc.fp},         {"fn", sc.fn}};
    nlohmann::json per;
    for (const auto& c : palette.classes()) {
        const auto& pc = ssc.per_class[size_t(c.id) - 1];
        per[c.name] = {{"iou", pc.iou}, {"present", pc.present}, {"tp", pc.tp}, {"fp", pc.fp}, {"fn", pc.fn}};
    }
    j["ssc"] = {{"per_class", per}, {"mean_iou", ssc.mean_iou}, {"evaluated_voxels", ssc.evaluated_voxels}};
    if (det) {
        nlohmann::json d;
        d["recall"] = det->recall;
        d["map"] = det->mean_ap;
        d["total_gt"] = det->total_gt;
        d["matched_gt"] = det->matched_gt;
        nlohmann::json ap = nlohmann::json::object();
        for (size_t c = 0; c < det->per_class_ap.size(); ++c)
            if (det->per_class_ap[c] >= 0.0 && int(c) < palette.num_classes())
                ap[palette.info(int(c) + 1).name] = det->per_class_ap[c];
        d["per_class_ap"] = ap;
        j["detection"] = d;
    }
    return j.dump(2);
}

}  // namespace ssc
