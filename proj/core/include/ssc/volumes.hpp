#pragma once

#include <span>
#include <vector>

#include "ssc/camera.hpp"
#include "ssc/grid.hpp"

namespace ssc {

/// Truncated signed distance volume of the view frustum. Negative distance
/// means the voxel is occluded (behind the observed surface); the sign
/// convention is recorded in the SISV header on disk.
struct TsdfVolume {
    GridSpec spec;
    float truncation = 0.24f;
    std::vector<float> distance;     // spec.count(), meters, |d| <= truncation
    std::vector<Visibility> vis;     // spec.count()

    TsdfVolume() = default;
    TsdfVolume(const GridSpec& s, float trunc)
        : spec(s), truncation(trunc), distance(s.count(), trunc), vis(s.count(), Visibility::OutsideFrustum) {}
};

/// Per-voxel class confidences. Channel 0 is an explicit "empty" channel so
/// completed scenes can assign free space a probability; channels 1..C map to
/// class ids 1..C. Projected (input) volumes never touch channel 0, so their
/// payload is the C-class confidence content; voxels without evidence hold
/// the all-zero vector.
struct SemanticVolume {
    GridSpec spec;
    int num_classes = 0;
    std::vector<float> conf;  // spec.count() * (num_classes + 1), voxel-major

    SemanticVolume() = default;
    SemanticVolume(const GridSpec& s, int c)
        : spec(s), num_classes(c), conf(s.count() * size_t(c + 1), 0.0f) {}

    int channels() const { return num_classes + 1; }
    float* at(size_t voxel) { return conf.data() + voxel * channels(); }
    const float* at(size_t voxel) const { return conf.data() + voxel * channels(); }

    void set_one_hot(size_t voxel, int class_id) {
        float* p = at(voxel);
        for (int c = 0; c <= num_classes; ++c) p[c] = 0.0f;
        p[class_id] = 1.0f;
    }

    /// True when any class channel (1..C) carries mass.
    bool has_class_evidence(size_t voxel, float eps = 0.0f) const {
        const float* p = at(voxel);
        for (int c = 1; c <= num_classes; ++c)
            if (p[c] > eps) return true;
        return false;
    }
};

/// Hard per-voxel labels (0 = empty) plus the visibility mask metrics
/// evaluate against. A volume produced without a camera context carries an
/// all-OutsideFrustum mask, which evaluates nothing by construction.
struct LabelVolume {
    GridSpec spec;
    int num_classes = 0;
    std::vector<uint8_t> labels;   // spec.count(), 0..C
    std::vector<Visibility> vis;   // spec.count()

    LabelVolume() = default;
    LabelVolume(const GridSpec& s, int c)
        : spec(s), num_classes(c), labels(s.count(), 0), vis(s.count(), Visibility::OutsideFrustum) {}
};

/// Back-projects every valid pixel through the pinhole model and the
/// camera-to-world pose. Invalid pixels produce no point; an empty result is
/// not an error.
std::vector<Vec3f> depth_to_points(const DepthMap& depth, const CameraModel& cam);

/// Classifies every voxel center against the depth map: outside the image or
/// on an invalid ray -> OutsideFrustum; in front of the observed depth ->
/// VisibleFree; behind -> Occluded; within half a voxel of it -> Surface.
std::vector<Visibility> classify_visibility(const GridSpec& spec, const DepthMap& depth,
                                            const CameraModel& cam);

/// Builds the TSDF from the observed surface points. The depth map supplies
/// the frustum and per-ray visibility; `points` is normally
/// depth_to_points(depth, cam) but may be any surface sample. Voxels
/// containing a surface point are flagged Surface regardless of the ray test.
TsdfVolume build_tsdf(std::span<const Vec3f> points, const DepthMap& depth, const CameraModel& cam,
                      const GridSpec& spec, float trunc);

/// Convenience overload deriving the surface points from the depth map.
TsdfVolume build_tsdf(const DepthMap& depth, const CameraModel& cam, const GridSpec& spec, float trunc);

/// Raw accumulation step of project_semantics, exposed for the per-class
/// mass-conservation property: returns the un-normalized per-voxel class
/// sums (channel 0 untouched) and the number of pixels accumulated per voxel.
struct SemanticAccumulation {
    SemanticVolume sums;
    std::vector<uint32_t> pixel_count;
};
SemanticAccumulation accumulate_semantics(const SegmentationMap& seg, const DepthMap& depth,
                                          const CameraModel& cam, const GridSpec& spec);

/// Scatters each valid pixel's confidence vector into the voxel containing
/// its back-projected point, then renormalizes touched voxels to sum 1.
SemanticVolume project_semantics(const SegmentationMap& seg, const DepthMap& depth,
                                 const CameraModel& cam, const GridSpec& spec);

/// Hard labels from a confidence volume. The argmax runs over all channels
/// (empty included); ties break toward the lowest id, and a winning class
/// whose confidence is below occ_threshold is demoted to empty. `vis`
/// replaces the output mask when nonempty.
LabelVolume argmax_labels(const SemanticVolume& sem, float occ_threshold,
                          std::span<const Visibility> vis = {});

}  // namespace ssc
