#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ssc/camera.hpp"
#include "ssc/instances.hpp"
#include "ssc/proposals.hpp"
#include "ssc/volumes.hpp"

namespace ssc {

/// Seeded recipe for one synthetic room. The room shell (floor, ceiling,
/// back and side walls) fills the grid; the z=0 face stays open for the
/// camera, which sits just outside it looking down +z.
struct SceneRecipe {
    uint64_t seed = 0;
    GridSpec grid;                 // defaults to 60x36x60 @ 0.08 m
    int min_instances = 5;
    int max_instances = 8;
    float seg_noise_rate = 0.0f;   // symmetric label-confusion probability
    int depth_width = 96;
    int depth_height = 72;
    float focal = 80.0f;
    float pitch_deg = 18.0f;  // downward camera tilt (jittered per scene)
    float truncation = 0.24f;
    int placement_retries = 40;

    void validate() const {
        grid.validate();
        if (min_instances < 0 || max_instances < min_instances)
            throw std::invalid_argument("invalid instance count range");
        if (seg_noise_rate < 0.0f || seg_noise_rate > 1.0f)
            throw std::invalid_argument("noise rate must be in [0,1]");
    }
};

struct SyntheticScene {
    SceneRecipe recipe;
    LabelVolume gt;                    // labels + visibility mask
    std::vector<GtInstance> instances;
    DepthMap depth;
    SegmentationMap seg2d;
    CameraModel cam;
};

/// Thrown when the requested instances cannot be placed without overlap.
struct PlacementError : std::runtime_error {
    explicit PlacementError(uint64_t seed)
        : std::runtime_error("cannot place requested instances without overlap (recipe seed " +
                             std::to_string(seed) + ")") {}
};

/// Builds the ground-truth scene, renders the depth map by first-hit ray
/// march, and derives the 2D semantics from the hit labels.
SyntheticScene generate(const SceneRecipe& recipe, const ClassPalette& palette,
                        const ShapeLibrary& library);

/// Applies the input-volume construction to the rendered depth/semantics;
/// the returned pair is exactly what the completion loop consumes.
std::pair<TsdfVolume, SemanticVolume> occlude(const SyntheticScene& scene);

/// Independent first-hit distance for one pixel (test oracle; simple
/// fixed-step march rather than the DDA used by the renderer).
float ray_march_depth_oracle(const SyntheticScene& scene, int u, int v, float step = 0.005f);

// ---- scene bundle directory (the CLI's dataset unit) ----

struct SceneBundle {
    SyntheticScene scene;
    TsdfVolume tsdf;
    SemanticVolume semantics;
};

void save_bundle(const std::string& dir, const SceneBundle& bundle, const ClassPalette& palette);
SceneBundle load_bundle(const std::string& dir, const ClassPalette& palette);

}  // namespace ssc
