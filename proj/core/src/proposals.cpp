#include "ssc/proposals.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace ssc {

ScenePointSample sample_scene_points(const SemanticVolume& sem, const LabelVolume& labels,
                                     const ClassPalette& palette, int m, Rng& rng) {
    if (m < 1) throw std::invalid_argument("sample_scene_points: M must be >= 1");
    if (!(sem.spec == labels.spec)) throw std::invalid_argument("sample_scene_points: spec mismatch");

    std::vector<size_t> occupied;
    for (size_t i = 0; i < labels.labels.size(); ++i)
        if (palette.is_instance_class(labels.labels[i])) occupied.push_back(i);
    if (occupied.empty()) throw std::runtime_error("sample_scene_points: scene has no instance-class voxel");

    std::vector<size_t> chosen;
    chosen.reserve(size_t(m));
    if (occupied.size() >= size_t(m)) {
        // partial Fisher-Yates: first m entries of a seeded shuffle
        for (int k = 0; k < m; ++k) {
            size_t j = k + rng.uniform_u32(uint32_t(occupied.size() - k));
            std::swap(occupied[k], occupied[j]);
            chosen.push_back(occupied[k]);
        }
    } else {
        chosen = occupied;  // every occupied voxel appears once
        while (chosen.size() < size_t(m))
            chosen.push_back(occupied[rng.uniform_u32(uint32_t(occupied.size()))]);
    }

    const int c_classes = sem.num_classes;
    ScenePointSample out;
    out.cloud.num_classes = c_classes;
    out.cloud.points.reserve(chosen.size());
    out.cloud.class_conf.reserve(chosen.size() * c_classes);
    out.cloud.height.reserve(chosen.size());
    out.voxel_index = chosen;

    for (size_t vi : chosen) {
        VoxelIndex v = labels.spec.unindex(vi);
        out.cloud.points.push_back(labels.spec.voxel_center(v));
        out.cloud.height.push_back(v.y * labels.spec.voxel_size);

        const float* p = sem.at(vi);
        float total = 0.0f;
        for (int c = 1; c <= c_classes; ++c) total += p[c];
        for (int c = 1; c <= c_classes; ++c) {
            float conf = total > 0.0f ? p[c] / total : (labels.labels[vi] == c ? 1.0f : 0.0f);
            out.cloud.class_conf.push_back(conf);
        }
    }
    return out;
}

VoteSet compute_gt_offsets(const ScenePointSample& sample, std::span<const GtInstance> instances) {
    const size_t n = sample.cloud.size();
    VoteSet votes;
    votes.predicted.assign(n, Vec3f{});
    votes.target.assign(n, Vec3f{});
    votes.foreground.assign(n, 0);

    for (size_t i = 0; i < n; ++i) {
        const Vec3f p = sample.cloud.points[i];
        float best = std::numeric_limits<float>::max();
        const GtInstance* owner = nullptr;
        for (const GtInstance& inst : instances) {
            if (!inst.box.contains(p, 1e-4f)) continue;
            float d = dist_sq(p, inst.box.center);
            if (d < best) {
                best = d;
                owner = &inst;
            }
        }
        if (owner) {
            votes.foreground[i] = 1;
            votes.target[i] = owner->box.center - p;
        }
    }
    return votes;
}

namespace {

/// Connected components (6-connectivity) over same-label instance-class
/// voxels. Returns per-voxel component id (-1 outside) plus centroid/size
/// per component.
struct Components {
    std::vector<int32_t> comp;  // per voxel
    std::vector<Vec3f> centroid;
    std::vector<uint32_t> size;
};

Components label_components(const LabelVolume& labels, const ClassPalette& palette) {
    const GridSpec& spec = labels.spec;
    Components out;
    out.comp.assign(spec.count(), -1);

    std::deque<size_t> queue;
    for (size_t start = 0; start < spec.count(); ++start) {
        uint8_t cls = labels.labels[start];
        if (out.comp[start] != -1 || !palette.is_instance_class(cls)) continue;

        int32_t id = int32_t(out.centroid.size());
        out.centroid.push_back({});
        out.size.push_back(0);
        out.comp[start] = id;
        queue.push_back(start);
        Vec3f sum{};
        uint32_t count = 0;

        while (!queue.empty()) {
            size_t cur = queue.front();
            queue.pop_front();
            VoxelIndex v = spec.unindex(cur);
            sum += spec.voxel_center(v);
            ++count;

            const int dirs[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
            for (const auto& d : dirs) {
                VoxelIndex nb{v.x + d[0], v.y + d[1], v.z + d[2]};
                if (!spec.in_bounds(nb)) continue;
                size_t ni = spec.index(nb);
                if (out.comp[ni] == -1 && labels.labels[ni] == cls) {
                    out.comp[ni] = id;
                    queue.push_back(ni);
                }
            }
        }
        out.centroid[size_t(id)] = sum / float(count);
        out.size[size_t(id)] = count;
    }
    return out;
}

}  // namespace

VoteSet estimate_votes(const ScenePointSample& sample, const LabelVolume& labels,
                       const ClassPalette& palette, int min_component) {
    Components comps = label_components(labels, palette);

    const size_t n = sample.cloud.size();
    VoteSet votes;
    votes.predicted.assign(n, Vec3f{});
    votes.target.assign(n, Vec3f{});
    votes.foreground.assign(n, 0);

    for (size_t i = 0; i < n; ++i) {
        int32_t id = comps.comp[sample.voxel_index[i]];
        if (id < 0 || comps.size[size_t(id)] < uint32_t(min_component)) continue;
        votes.foreground[i] = 1;
        votes.predicted[i] = comps.centroid[size_t(id)] - sample.cloud.points[i];
    }
    return votes;
}

std::vector<VoteCluster> cluster_votes(const ScenePointSample& sample, const VoteSet& votes,
                                       float radius) {
    if (!(radius > 0.0f)) throw std::invalid_argument("cluster_votes: radius must be > 0");

    std::vector<uint32_t> fg;
    for (uint32_t i = 0; i < votes.size(); ++i)
        if (votes.foreground[i]) fg.push_back(i);

    std::vector<Vec3f> shifted(fg.size());
    for (size_t k = 0; k < fg.size(); ++k)
        shifted[k] = sample.cloud.points[fg[k]] + votes.predicted[fg[k]];

    const float r_sq = radius * radius;
    std::vector<uint32_t> density(fg.size(), 0);
    for (size_t a = 0; a < fg.size(); ++a)
        for (size_t b = a + 1; b < fg.size(); ++b)
            if (dist_sq(shifted[a], shifted[b]) <= r_sq) {
                ++density[a];
                ++density[b];
            }

    std::vector<uint8_t> assigned(fg.size(), 0);
    std::vector<VoteCluster> clusters;
    for (;;) {
        // unassigned point with the highest local density, ties to lowest index
        int best = -1;
        for (size_t k = 0; k < fg.size(); ++k) {
            if (assigned[k]) continue;
            if (best < 0 || density[k] > density[size_t(best)]) best = int(k);
        }
        if (best < 0) break;

        VoteCluster cluster;
        cluster.seed_center = shifted[size_t(best)];
        for (size_t k = 0; k < fg.size(); ++k) {
            if (assigned[k] || dist_sq(shifted[k], cluster.seed_center) > r_sq) continue;
            assigned[k] = 1;
            cluster.members.push_back(fg[k]);
        }
        clusters.push_back(std::move(cluster));
    }
    return clusters;
}

std::vector<Proposal> fit_proposals(const ScenePointSample& sample, const VoteSet& votes,
                                    std::span<const VoteCluster> clusters, const ClassPalette& palette,
                                    const std::optional<Vec3f>& camera_origin,
                                    const std::optional<float>& ground_y) {
    std::vector<Proposal> out;
    if (clusters.empty()) return out;

    const int c_classes = palette.num_classes();
    double mean_pop = 0.0;
    for (const VoteCluster& c : clusters) mean_pop += double(c.members.size());
    mean_pop /= double(clusters.size());

    for (size_t ci = 0; ci < clusters.size(); ++ci) {
        const VoteCluster& cluster = clusters[ci];
        if (cluster.members.empty()) continue;

        Proposal p;
        p.cluster_id = int(ci);
        p.class_conf.assign(size_t(c_classes), 0.0f);

        Vec3f center{};
        Vec3f lo{std::numeric_limits<float>::max(), std::numeric_limits<float>::max(),
                 std::numeric_limits<float>::max()};
        Vec3f hi{-std::numeric_limits<float>::max(), -std::numeric_limits<float>::max(),
                 -std::numeric_limits<float>::max()};
        for (uint32_t m : cluster.members) {
            center += sample.cloud.points[m] + votes.predicted[m];
            auto conf = sample.cloud.conf_at(m);
            for (int c = 0; c < c_classes; ++c) p.class_conf[size_t(c)] += conf[size_t(c)];
            const Vec3f q = sample.cloud.points[m];
            for (int a = 0; a < 3; ++a) {
                lo[a] = std::min(lo[a], q[a]);
                hi[a] = std::max(hi[a], q[a]);
            }
        }
        const float inv = 1.0f / float(cluster.members.size());
        center = center * inv;
        for (float& c : p.class_conf) c *= inv;

        const int cls = p.argmax_class();
        const Vec3f tmpl = palette.info(cls).template_size;
        const Vec3f extent = hi - lo;

        // Per-instance uniform scale from the observed extent: the median
        // axis ratio is robust against the one axis the completion fattens.
        float ratios[3] = {extent.x / tmpl.x, extent.y / tmpl.y, extent.z / tmpl.z};
        std::sort(ratios, ratios + 3);
        float scale = std::clamp(ratios[1], 0.8f, 1.25f);
        p.size = tmpl * scale;

        if (camera_origin) {
            // Slide the center along the view ray so the box's near face sits
            // on the observed front of the cluster (never pulled toward the
            // camera, only pushed away). A low percentile stands in for the
            // minimum so fringe voxels ahead of the true surface don't drag
            // the box forward.
            Vec3f dir = center - *camera_origin;
            float len = norm(dir);
            if (len > 1e-6f) {
                dir = dir / len;
                std::vector<float> along_pts;
                along_pts.reserve(cluster.members.size());
                for (uint32_t m : cluster.members)
                    along_pts.push_back(dot(sample.cloud.points[m] - *camera_origin, dir));
                std::sort(along_pts.begin(), along_pts.end());
                float front = along_pts[size_t(0.1 * double(along_pts.size() - 1))];
                float half_support = 0.5f * (std::fabs(dir.x) * p.size.x + std::fabs(dir.y) * p.size.y +
                                             std::fabs(dir.z) * p.size.z);
                float along = dot(center - *camera_origin, dir);
                float push = (front + half_support) - along;
                if (push > 0.0f) center += dir * push;
            }
        }

        if (ground_y && !palette.info(cls).wall_mounted) center.y = *ground_y + 0.5f * p.size.y;

        p.center = center;
        p.size_class = cls;
        p.size_residual = p.size - tmpl;
        p.objectness = mean_pop > 0.0 ? float(std::min(1.0, double(cluster.members.size()) / mean_pop)) : 0.0f;
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<Assignment> assign_proposals(std::span<const Proposal> proposals,
                                         std::span<const Box3f> gt_boxes, const SelectionConfig& cfg,
                                         std::vector<int>* matched_gt) {
    cfg.validate();
    std::vector<Assignment> out(proposals.size(), Assignment::Negative);
    if (matched_gt) matched_gt->assign(proposals.size(), -1);

    for (size_t i = 0; i < proposals.size(); ++i) {
        float best = std::numeric_limits<float>::max();
        int best_gt = -1;
        for (size_t g = 0; g < gt_boxes.size(); ++g) {
            float d = dist(proposals[i].center, gt_boxes[g].center);
            if (d < best) {
                best = d;
                best_gt = int(g);
            }
        }
        if (matched_gt) (*matched_gt)[i] = best_gt;
        if (best_gt < 0) {
            out[i] = Assignment::Negative;  // no ground truth at all
        } else if (best < cfg.pos_radius) {
            out[i] = Assignment::Positive;
        } else if (best > cfg.neg_radius) {
            out[i] = Assignment::Negative;
        } else {
            out[i] = Assignment::Ignored;
        }
    }
    return out;
}

std::vector<Proposal> nms3d(std::vector<Proposal> proposals, float iou_threshold) {
    if (!(iou_threshold > 0.0f && iou_threshold < 1.0f))
        throw std::invalid_argument("nms3d: iou threshold must be in (0,1)");

    std::stable_sort(proposals.begin(), proposals.end(),
                     [](const Proposal& a, const Proposal& b) { return a.objectness > b.objectness; });
    std::vector<Proposal> kept;
    for (const Proposal& p : proposals) {
        bool suppressed = false;
        for (const Proposal& k : kept)
            if (box_iou(p.box(), k.box()) > iou_threshold) {
                suppressed = true;
                break;
            }
        if (!suppressed) kept.push_back(p);
    }
    return kept;
}

std::vector<Proposal> select_training_proposals(std::span<const Proposal> proposals,
                                                std::span<const Box3f> gt_boxes,
                                                const SelectionConfig& cfg) {
    cfg.validate();
    std::vector<Proposal> qualified;
    for (const Proposal& p : proposals) {
        float best = std::numeric_limits<float>::max();
        for (const Box3f& g : gt_boxes) best = std::min(best, dist(p.center, g.center));
        if (best < cfg.sigma && p.objectness > cfg.beta) qualified.push_back(p);
    }
    std::stable_sort(qualified.begin(), qualified.end(),
                     [](const Proposal& a, const Proposal& b) { return a.objectness > b.objectness; });
    if (qualified.size() > size_t(cfg.max_proposals)) qualified.resize(size_t(cfg.max_proposals));
    return qualified;
}

namespace {

// error norm in double so finite-difference gradient checks are not limited
// by float rounding
double offset_error_norm(Vec3f pred, Vec3f target) {
    double dx = double(pred.x) - double(target.x);
    double dy = double(pred.y) - double(target.y);
    double dz = double(pred.z) - double(target.z);
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace

double loss_loc_reg(const VoteSet& votes) {
    size_t n = votes.foreground_count();
    if (n == 0) return 0.0;
    double sum = 0.0;
    for (size_t i = 0; i < votes.size(); ++i) {
        if (!votes.foreground[i]) continue;
        sum += offset_error_norm(votes.predicted[i], votes.target[i]);
    }
    return sum / double(n);
}

std::vector<Vec3f> loss_loc_reg_grad(const VoteSet& votes) {
    std::vector<Vec3f> grad(votes.size(), Vec3f{});
    size_t n = votes.foreground_count();
    if (n == 0) return grad;
    for (size_t i = 0; i < votes.size(); ++i) {
        if (!votes.foreground[i]) continue;
        double len = offset_error_norm(votes.predicted[i], votes.target[i]);
        if (len <= 0.0) continue;
        double scale = 1.0 / (len * double(n));
        grad[i] = {float((double(votes.predicted[i].x) - double(votes.target[i].x)) * scale),
                   float((double(votes.predicted[i].y) - double(votes.target[i].y)) * scale),
                   float((double(votes.predicted[i].z) - double(votes.target[i].z)) * scale)};
    }
    return grad;
}

double loss_box(std::span<const BoxPrediction> preds, std::span<const BoxTarget> targets,
                double lambda1, double delta) {
    if (preds.size() != targets.size()) throw std::invalid_argument("loss_box: size mismatch");
    if (preds.empty()) return 0.0;

    double total = 0.0;
    for (size_t i = 0; i < preds.size(); ++i) {
        const BoxPrediction& p = preds[i];
        const BoxTarget& t = targets[i];
        double term = 0.0;
        for (int a = 0; a < 3; ++a) term += smooth_l1(double(p.center[a]) - double(t.center[a]), delta);
        double prob = std::max(p.size_class_probs.at(size_t(t.size_class)), 1e-12);
        term += lambda1 * -std::log(prob);
        for (int a = 0; a < 3; ++a)
            term += smooth_l1(double(p.size_residual[a]) - double(t.size_residual[a]), delta);
        total += term;
    }
    return total / double(preds.size());
}

std::vector<BoxGrad> loss_box_grad(std::span<const BoxPrediction> preds,
                                   std::span<const BoxTarget> targets, double lambda1, double delta) {
    if (preds.size() != targets.size()) throw std::invalid_argument("loss_box_grad: size mismatch");
    std::vector<BoxGrad> grads(preds.size());
    if (preds.empty()) return grads;

    const double inv = 1.0 / double(preds.size());
    for (size_t i = 0; i < preds.size(); ++i) {
        const BoxPrediction& p = preds[i];
        const BoxTarget& t = targets[i];
        BoxGrad& g = grads[i];
        g.d_size_class_probs.assign(p.size_class_probs.size(), 0.0);
        for (int a = 0; a < 3; ++a) {
            g.d_center[a] = float(inv * smooth_l1_deriv(double(p.center[a]) - double(t.center[a]), delta));
            g.d_size_residual[a] =
                float(inv * smooth_l1_deriv(double(p.size_residual[a]) - double(t.size_residual[a]), delta));
        }
        double prob = std::max(p.size_class_probs.at(size_t(t.size_class)), 1e-12);
        g.d_size_class_probs[size_t(t.size_class)] = inv * lambda1 * (-1.0 / prob);
    }
    return grads;
}

double loss_objectness(std::span<const double> objectness_probs,
                       std::span<const Assignment> assignments) {
    if (objectness_probs.size() != assignments.size())
        throw std::invalid_argument("loss_objectness: size mismatch");
    double sum = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < assignments.size(); ++i) {
        if (assignments[i] == Assignment::Ignored) continue;
        double p = std::clamp(objectness_probs[i], 1e-12, 1.0 - 1e-12);
        sum += assignments[i] == Assignment::Positive ? -std::log(p) : -std::log(1.0 - p);
        ++n;
    }
    return n > 0 ? sum / double(n) : 0.0;
}

double loss_semantic_cls(std::span<const std::vector<double>> class_probs,
                         std::span<const int> gt_classes, std::span<const Assignment> assignments) {
    if (class_probs.size() != assignments.size() || gt_classes.size() != assignments.size())
        throw std::invalid_argument("loss_semantic_cls: size mismatch");
    double sum = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < assignments.size(); ++i) {
        if (assignments[i] != Assignment::Positive) continue;
        double p = std::max(class_probs[i].at(size_t(gt_classes[i])), 1e-12);
        sum += -std::log(p);
        ++n;
    }
    return n > 0 ? sum / double(n) : 0.0;
}

double loss_det(const DetLossParts& parts, const LossWeights& weights) {
    return parts.loc_reg + parts.box + weights.obj_cls * parts.obj_cls + weights.sem_cls * parts.sem_cls;
}

}  // namespace ssc
