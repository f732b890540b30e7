#include "ssc/pointgrid.hpp"

#include <algorithm>
#include <cmath>

namespace ssc {

CanonicalizeResult canonicalize(const PointCloud& points, const Box3f& box, float keep_limit) {
    CanonicalFrame frame{box.center, box.size * 0.5f};
    frame.validate();

    CanonicalizeResult out;
    out.frame = frame;
    out.points.num_classes = points.num_classes;
    const float lim = keep_limit;
    for (size_t i = 0; i < points.size(); ++i) {
        Vec3f q = frame.to_canonical(points.points[i]);
        if (std::fabs(q.x) > lim || std::fabs(q.y) > lim || std::fabs(q.z) > lim) {
            ++out.dropped;
            continue;
        }
        size_t at = out.points.size();
        out.points.append_from(points, i);
        out.points.points[at] = q;
    }
    return out;
}

PointCloud decanonicalize(const PointCloud& points, const CanonicalFrame& frame) {
    PointCloud out = points;
    for (Vec3f& p : out.points) p = frame.to_world(p);
    return out;
}

InstanceGrid gridding(const PointCloud& points, GridDims dims, int class_channels) {
    dims.validate();
    if (class_channels > 0 && (!points.has_conf() || points.num_classes != class_channels))
        throw std::invalid_argument("gridding: class channels requested but cloud carries no matching confidences");

    InstanceGrid grid(dims, class_channels > 0 ? class_channels : 1);
    grid.moments.assign(dims.count(), Vec3f{});

    const int n[3] = {dims.h, dims.w, dims.d};
    for (size_t pi = 0; pi < points.size(); ++pi) {
        const Vec3f p = points.points[pi];
        // continuous cell-center coordinates per axis
        float g[3], fr[3];
        int i0[3];
        for (int a = 0; a < 3; ++a) {
            g[a] = (p[a] + 1.0f) * 0.5f * n[a] - 0.5f;
            i0[a] = int(std::floor(g[a]));
            fr[a] = g[a] - i0[a];
        }
        for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                    float w = (dx ? fr[0] : 1.0f - fr[0]) * (dy ? fr[1] : 1.0f - fr[1]) *
                              (dz ? fr[2] : 1.0f - fr[2]);
                    if (w == 0.0f) continue;
                    int ci = std::clamp(i0[0] + dx, 0, n[0] - 1);
                    int cj = std::clamp(i0[1] + dy, 0, n[1] - 1);
                    int ck = std::clamp(i0[2] + dz, 0, n[2] - 1);
                    size_t cell = dims.index(ci, cj, ck);
                    if (grid.channels == 1) {
                        grid.values[cell] += w;
                    } else {
                        auto conf = points.conf_at(pi);
                        float* dst = grid.values.data() + cell * grid.channels;
                        for (int c = 0; c < grid.channels; ++c) dst[c] += w * conf[c];
                    }
                    grid.moments[cell] += p * w;
                }
    }
    return grid;
}

PointCloud regridding(const InstanceGrid& grid, float threshold, std::vector<size_t>* cells) {
    PointCloud out;
    if (cells) cells->clear();
    const bool has_moments = !grid.moments.empty();
    const float half[3] = {1.0f / grid.dims.h, 1.0f / grid.dims.w, 1.0f / grid.dims.d};
    for (int k = 0; k < grid.dims.d; ++k)
        for (int j = 0; j < grid.dims.w; ++j)
            for (int i = 0; i < grid.dims.h; ++i) {
                size_t cell = grid.dims.index(i, j, k);
                float m = grid.cell_mass(cell);
                if (m < threshold || m <= 0.0f) continue;
                Vec3f c = grid.cell_center(i, j, k);
                Vec3f p = c;
                if (has_moments) {
                    p = grid.moments[cell] / m;
                    for (int a = 0; a < 3; ++a) p[a] = std::clamp(p[a], c[a] - half[a], c[a] + half[a]);
                }
                out.push_back(p);
                if (cells) cells->push_back(cell);
            }
    return out;
}

SceneVoxelization voxelize_instance_to_scene(const PointCloud& world_points, int class_id,
                                             const GridSpec& spec) {
    if (class_id < 1) throw std::invalid_argument("voxelize_instance_to_scene: class id must be >= 1");
    SceneVoxelization out;
    out.class_id = class_id;
    out.voxels.reserve(world_points.size());
    for (const Vec3f& p : world_points.points) {
        VoxelIndex v = spec.world_to_voxel(p);
        if (!spec.in_bounds(v)) {
            ++out.dropped;
            continue;
        }
        out.voxels.push_back(spec.index(v));
    }
    std::sort(out.voxels.begin(), out.voxels.end());
    out.voxels.erase(std::unique(out.voxels.begin(), out.voxels.end()), out.voxels.end());
    return out;
}

}  // namespace ssc
