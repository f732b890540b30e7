#pragma once

#include <cstdint>
#include <vector>

#include "ssc/grid.hpp"
#include "ssc/point_cloud.hpp"

namespace ssc {

struct GridDims {
    int h = 32, w = 32, d = 32;

    size_t count() const { return size_t(h) * w * d; }
    size_t index(int i, int j, int k) const { return size_t(i) + size_t(h) * (size_t(j) + size_t(w) * k); }
    void validate() const {
        if (h < 2 || w < 2 || d < 2) throw std::invalid_argument("instance grid dims must be >= 2 per axis");
    }
};

/// Dense instance grid over canonical [-1,1]^3. Cells are addressed by their
/// centers; `values` holds accumulated trilinear mass (channels == 1) or
/// per-class mass (channels == C, summing to the total mass). `moments`
/// accumulates mass-weighted canonical positions so regridding can emit
/// sub-cell points; grids built directly (e.g. binary occupancy) leave it
/// empty and regrid to cell centers.
struct InstanceGrid {
    GridDims dims;
    int channels = 1;
    std::vector<float> values;   // dims.count() * channels, cell-major
    std::vector<Vec3f> moments;  // dims.count() when present
    CanonicalFrame frame;

    InstanceGrid() = default;
    InstanceGrid(GridDims d_, int ch) : dims(d_), channels(ch), values(d_.count() * ch, 0.0f) {}

    float cell_mass(size_t cell) const {
        const float* p = values.data() + cell * channels;
        float m = 0.0f;
        for (int c = 0; c < channels; ++c) m += p[c];
        return m;
    }

    /// Canonical position of a cell center along one axis with n cells.
    static float axis_center(int i, int n) { return -1.0f + (2.0f * i + 1.0f) / n; }

    Vec3f cell_center(int i, int j, int k) const {
        return {axis_center(i, dims.h), axis_center(j, dims.w), axis_center(k, dims.d)};
    }

    float total_mass() const {
        double m = 0.0;
        for (float v : values) m += v;
        return float(m);
    }
};

struct CanonicalizeResult {
    PointCloud points;      // in [-1,1]^3
    CanonicalFrame frame;
    size_t dropped = 0;     // points outside the box after the transform
};

/// Normalizes points into the box's canonical frame; points beyond
/// `keep_limit` (canonical units, default the box itself) are dropped and
/// counted. Throws on degenerate boxes.
CanonicalizeResult canonicalize(const PointCloud& points, const Box3f& box,
                                float keep_limit = 1.0f + 1e-6f);

/// Exact inverse of canonicalize on in-range points.
PointCloud decanonicalize(const PointCloud& points, const CanonicalFrame& frame);

/// Trilinear scatter: each point distributes unit mass over the 8 cell
/// centers surrounding it; boundary weights clamp to the edge cells so total
/// mass is conserved exactly. When the cloud carries class confidences and
/// `class_channels` > 0, per-class mass is accumulated instead of a scalar.
InstanceGrid gridding(const PointCloud& points, GridDims dims, int class_channels = 0);

/// Emits one point per cell with mass >= threshold, at the cell's
/// mass-weighted position (clamped into the cell) or the cell center when
/// the grid carries no moments. Cells are visited in index order; when
/// `cells` is given it receives the linear cell index of each emitted point.
PointCloud regridding(const InstanceGrid& grid, float threshold, std::vector<size_t>* cells = nullptr);

struct SceneVoxelization {
    std::vector<size_t> voxels;  // sorted, deduplicated linear indices
    int class_id = 0;
    size_t dropped = 0;          // points outside the scene grid
};

/// Maps world points onto scene voxels (floor rule), deduplicated.
SceneVoxelization voxelize_instance_to_scene(const PointCloud& world_points, int class_id,
                                             const GridSpec& spec);

}  // namespace ssc
