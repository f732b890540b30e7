#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ssc/camera.hpp"
#include "ssc/palette.hpp"
#include "ssc/point_cloud.hpp"
#include "ssc/volumes.hpp"

namespace ssc {

/// Ground-truth instance: class, world box, occupied scene voxels, and the
/// canonical shape the box was stamped from.
struct GtInstance {
    int id = 0;
    int class_id = 0;
    Box3f box;
    std::vector<size_t> voxels;
    PointCloud canonical_shape;
};

/// M scene points sampled from instance-class voxels, with per-point class
/// confidences (renormalized over classes), a height channel (voxel base
/// height above the grid origin), and the source voxel index.
struct ScenePointSample {
    PointCloud cloud;                 // carries class_conf (length C) and height
    std::vector<size_t> voxel_index;  // one per point
};

/// Per-point vote state. `predicted` comes from a vote estimator,
/// `target` from ground truth (training only); both are defined on
/// foreground points only.
struct VoteSet {
    std::vector<Vec3f> predicted;
    std::vector<Vec3f> target;
    std::vector<uint8_t> foreground;  // 0/1 per point

    size_t size() const { return foreground.size(); }
    size_t foreground_count() const {
        size_t n = 0;
        for (uint8_t f : foreground) n += f;
        return n;
    }
};

struct Proposal {
    Vec3f center;
    Vec3f size;
    int size_class = 0;       // one size class per semantic class
    Vec3f size_residual;      // size - template(size_class)
    float objectness = 0.0f;  // [0, 1]
    std::vector<float> class_conf;  // length C
    int cluster_id = -1;

    Box3f box() const { return {center, size}; }
    int argmax_class() const {
        int best = 0;
        for (size_t c = 1; c < class_conf.size(); ++c)
            if (class_conf[c] > class_conf[best]) best = int(c);
        return best + 1;
    }
};

struct LossWeights {
    double size_cls = 0.1;   // lambda1
    double obj_cls = 0.5;    // lambda2
    double sem_cls = 0.1;    // lambda3
};

struct SelectionConfig {
    float sigma = 0.3f;        // training selection: center distance bound
    float beta = 0.5f;         // training selection: objectness bound
    int max_proposals = 16;    // K
    float pos_radius = 0.3f;   // assignment: positive below
    float neg_radius = 0.6f;   // assignment: negative above
    float nms_iou = 0.25f;

    void validate() const {
        if (!(sigma > 0.0f)) throw std::invalid_argument("sigma must be > 0");
        if (beta < 0.0f || beta > 1.0f) throw std::invalid_argument("beta must be in [0,1]");
        if (max_proposals < 1) throw std::invalid_argument("K must be >= 1");
        if (!(pos_radius < neg_radius)) throw std::invalid_argument("pos_radius must be < neg_radius");
    }
};

enum class Assignment : uint8_t { Positive, Negative, Ignored };

/// Samples M instance-class voxels (uniform, without replacement while
/// enough exist; every occupied voxel appears once before any repeats).
/// Throws when the scene has no instance-class voxel.
ScenePointSample sample_scene_points(const SemanticVolume& sem, const LabelVolume& labels,
                                     const ClassPalette& palette, int m, Rng& rng);

/// Fills the target offsets: points inside a gt box vote for that box's
/// center (nearest center when boxes overlap); others are background.
VoteSet compute_gt_offsets(const ScenePointSample& sample, std::span<const GtInstance> instances);

/// Deterministic vote predictor: each point votes for the centroid of its
/// voxel's same-class connected component (6-connectivity over instance-class
/// voxels). Components smaller than min_component are background.
VoteSet estimate_votes(const ScenePointSample& sample, const LabelVolume& labels,
                       const ClassPalette& palette, int min_component = 4);

struct VoteCluster {
    std::vector<uint32_t> members;  // indices into the sample
    Vec3f seed_center;
};

/// Greedy radius clustering of the center-shifted foreground points, seeded
/// by descending local density (ties toward the lower point index).
std::vector<VoteCluster> cluster_votes(const ScenePointSample& sample, const VoteSet& votes,
                                       float radius);

/// Deterministic proposal head: center = mean of member votes (optionally
/// pushed along the view ray so the box's near face touches the observed
/// front), size = class template scaled by the median member-extent ratio,
/// objectness = member count over the scene-average cluster population.
/// When `ground_y` is given, non-wall-mounted classes rest on it.
std::vector<Proposal> fit_proposals(const ScenePointSample& sample, const VoteSet& votes,
                                    std::span<const VoteCluster> clusters, const ClassPalette& palette,
                                    const std::optional<Vec3f>& camera_origin,
                                    const std::optional<float>& ground_y = {});

/// Center-distance assignment: < pos_radius positive, > neg_radius negative,
/// the band between is ignored. `matched_gt` receives the nearest gt index.
std::vector<Assignment> assign_proposals(std::span<const Proposal> proposals,
                                         std::span<const Box3f> gt_boxes, const SelectionConfig& cfg,
                                         std::vector<int>* matched_gt = nullptr);

/// Greedy descending-objectness suppression by axis-aligned 3D IoU.
std::vector<Proposal> nms3d(std::vector<Proposal> proposals, float iou_threshold);

/// Training-time selection: keep proposals with gt-center distance < sigma
/// and objectness > beta, sorted by objectness, truncated to K.
std::vector<Proposal> select_training_proposals(std::span<const Proposal> proposals,
                                                std::span<const Box3f> gt_boxes,
                                                const SelectionConfig& cfg);

// ---- Detection reference losses (with analytic gradients for the
// ---- finite-difference checks). All use doubles.

/// Mean L2 norm of (predicted - target) over foreground points; 0 when no
/// foreground exists.
double loss_loc_reg(const VoteSet& votes);
/// d loss / d predicted[i], zero on background points.
std::vector<Vec3f> loss_loc_reg_grad(const VoteSet& votes);

struct BoxPrediction {
    Vec3f center;
    std::vector<double> size_class_probs;
    Vec3f size_residual;  // residual for the target's size class
};
struct BoxTarget {
    Vec3f center;
    int size_class = 0;
    Vec3f size_residual;
};

/// Eq-style box loss: smooth-L1 center regression + lambda1 * size-class
/// cross entropy + smooth-L1 residual regression, averaged over positives.
double loss_box(std::span<const BoxPrediction> preds, std::span<const BoxTarget> targets,
                double lambda1, double delta = 1.0);

struct BoxGrad {
    Vec3f d_center;
    std::vector<double> d_size_class_probs;
    Vec3f d_size_residual;
};
std::vector<BoxGrad> loss_box_grad(std::span<const BoxPrediction> preds,
                                   std::span<const BoxTarget> targets, double lambda1,
                                   double delta = 1.0);

/// Normalized objectness cross entropy over positive and negative proposals
/// (ignored proposals contribute nothing): mean of -log p for positives and
/// -log(1-p) for negatives.
double loss_objectness(std::span<const double> objectness_probs,
                       std::span<const Assignment> assignments);

/// Mean cross entropy of class probabilities over positive proposals.
double loss_semantic_cls(std::span<const std::vector<double>> class_probs,
                         std::span<const int> gt_classes, std::span<const Assignment> assignments);

struct DetLossParts {
    double loc_reg = 0.0;
    double box = 0.0;
    double obj_cls = 0.0;
    double sem_cls = 0.0;
};

/// Weighted total: loc_reg + box + lambda2 * obj_cls + lambda3 * sem_cls.
double loss_det(const DetLossParts& parts, const LossWeights& weights);

}  // namespace ssc
