#include "ssc/volumes.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace ssc {

std::vector<Vec3f> depth_to_points(const DepthMap& depth, const CameraModel& cam) {
    cam.validate();
    std::vector<Vec3f> points;
    points.reserve(depth.valid_count());
    for (int v = 0; v < depth.height; ++v) {
        for (int u = 0; u < depth.width; ++u) {
            if (!depth.is_valid(u, v)) continue;
            float z = depth.at(u, v);
            if (!(z > 0.0f) || !std::isfinite(z)) continue;
            Vec3f pc{(u - cam.cx) * z / cam.fx, (v - cam.cy) * z / cam.fy, z};
            points.push_back(cam.cam_to_world(pc));
        }
    }
    return points;
}

std::vector<Visibility> classify_visibility(const GridSpec& spec, const DepthMap& depth,
                                            const CameraModel& cam) {
    cam.validate();
    spec.validate();
    std::vector<Visibility> vis(spec.count(), Visibility::OutsideFrustum);
    const float band = 0.5f * spec.voxel_size;
    for (int z = 0; z < spec.nz; ++z) {
        for (int y = 0; y < spec.ny; ++y) {
            for (int x = 0; x < spec.nx; ++x) {
                Vec3f pc = cam.world_to_cam(spec.voxel_center(x, y, z));
                if (!(pc.z > 0.0f)) continue;
                float u, v;
                cam.project(pc, u, v);
                int ui = int(std::lround(u)), vi = int(std::lround(v));
                if (!depth.in_bounds(ui, vi) || !depth.is_valid(ui, vi)) continue;
                float ds = depth.at(ui, vi);
                size_t i = spec.index(x, y, z);
                if (pc.z < ds - band)
                    vis[i] = Visibility::VisibleFree;
                else if (pc.z > ds + band)
                    vis[i] = Visibility::Occluded;
                else
                    vis[i] = Visibility::Surface;
            }
        }
    }
    return vis;
}

namespace {

/// Uniform-grid nearest-surface accelerator. Distances are only needed up to
/// the truncation radius, so the cell size equals trunc and queries scan the
/// 3x3x3 neighborhood.
class SurfaceIndex {
public:
    SurfaceIndex(std::span<const Vec3f> points, float cell) : cell_(cell), points_(points) {
        cells_.reserve(points.size());
        for (size_t i = 0; i < points.size(); ++i) cells_[key(points[i])].push_back(uint32_t(i));
    }

    /// Distance from p to the nearest point, clamped to `cap`.
    float nearest_dist(Vec3f p, float cap) const {
        int64_t kx = coord(p.x), ky = coord(p.y), kz = coord(p.z);
        float best_sq = cap * cap;
        for (int64_t dz = -1; dz <= 1; ++dz)
            for (int64_t dy = -1; dy <= 1; ++dy)
                for (int64_t dx = -1; dx <= 1; ++dx) {
                    auto it = cells_.find(pack(kx + dx, ky + dy, kz + dz));
                    if (it == cells_.end()) continue;
                    for (uint32_t i : it->second) best_sq = std::min(best_sq, dist_sq(p, points_[i]));
                }
        return std::sqrt(best_sq);
    }

private:
    int64_t coord(float v) const { return int64_t(std::floor(v / cell_)); }
    static uint64_t pack(int64_t x, int64_t y, int64_t z) {
        // 21 bits per axis, offset to keep coordinates positive
        return (uint64_t(x + (1 << 20)) << 42) | (uint64_t(y + (1 << 20)) << 21) | uint64_t(z + (1 << 20));
    }
    uint64_t key(Vec3f p) const { return pack(coord(p.x), coord(p.y), coord(p.z)); }

    float cell_;
    std::span<const Vec3f> points_;
    std::unordered_map<uint64_t, std::vector<uint32_t>> cells_;
};

}  // namespace

TsdfVolume build_tsdf(std::span<const Vec3f> points, const DepthMap& depth, const CameraModel& cam,
                      const GridSpec& spec, float trunc) {
    if (points.empty()) throw std::invalid_argument("build_tsdf: empty surface, TSDF undefined");
    if (trunc < spec.voxel_size) throw std::invalid_argument("build_tsdf: trunc must be >= voxel_size");

    TsdfVolume out(spec, trunc);
    out.vis = classify_visibility(spec, depth, cam);

    // Surface flag by containment: any voxel holding a surface point.
    for (const Vec3f& p : points) {
        VoxelIndex v = spec.world_to_voxel(p);
        if (spec.in_bounds(v) && in_frustum(out.vis[spec.index(v)]))
            out.vis[spec.index(v)] = Visibility::Surface;
    }

    SurfaceIndex index(points, trunc);
    for (size_t i = 0; i < spec.count(); ++i) {
        Visibility f = out.vis[i];
        if (f == Visibility::OutsideFrustum) {
            out.distance[i] = trunc;
            continue;
        }
        float d = index.nearest_dist(spec.voxel_center(spec.unindex(i)), trunc);
        out.distance[i] = (f == Visibility::Occluded) ? -d : d;
    }
    return out;
}

TsdfVolume build_tsdf(const DepthMap& depth, const CameraModel& cam, const GridSpec& spec, float trunc) {
    auto pts = depth_to_points(depth, cam);
    return build_tsdf(pts, depth, cam, spec, trunc);
}

SemanticAccumulation accumulate_semantics(const SegmentationMap& seg, const DepthMap& depth,
                                          const CameraModel& cam, const GridSpec& spec) {
    if (seg.width != depth.width || seg.height != depth.height)
        throw std::invalid_argument("project_semantics: segmentation and depth dimensions differ");
    cam.validate();
    spec.validate();

    SemanticAccumulation acc{SemanticVolume(spec, seg.num_classes), std::vector<uint32_t>(spec.count(), 0)};
    for (int v = 0; v < depth.height; ++v) {
        for (int u = 0; u < depth.width; ++u) {
            if (!depth.is_valid(u, v)) continue;
            float z = depth.at(u, v);
            if (!(z > 0.0f)) continue;
            Vec3f pw = cam.cam_to_world({(u - cam.cx) * z / cam.fx, (v - cam.cy) * z / cam.fy, z});
            VoxelIndex vx = spec.world_to_voxel(pw);
            if (!spec.in_bounds(vx)) continue;
            size_t i = spec.index(vx);
            const float* pix = seg.at(u, v);
            float* dst = acc.sums.at(i);
            for (int c = 0; c < seg.num_classes; ++c) dst[c + 1] += pix[c];
            acc.pixel_count[i] += 1;
        }
    }
    return acc;
}

SemanticVolume project_semantics(const SegmentationMap& seg, const DepthMap& depth,
                                 const CameraModel& cam, const GridSpec& spec) {
    SemanticAccumulation acc = accumulate_semantics(seg, depth, cam, spec);
    SemanticVolume& vol = acc.sums;
    for (size_t i = 0; i < spec.count(); ++i) {
        if (acc.pixel_count[i] == 0) continue;
        float* p = vol.at(i);
        float total = 0.0f;
        for (int c = 1; c <= vol.num_classes; ++c) total += p[c];
        if (total > 0.0f)
            for (int c = 1; c <= vol.num_classes; ++c) p[c] /= total;
    }
    return vol;
}

LabelVolume argmax_labels(const SemanticVolume& sem, float occ_threshold, std::span<const Visibility> vis) {
    if (!vis.empty() && vis.size() != sem.spec.count())
        throw std::invalid_argument("argmax_labels: visibility mask size mismatch");

    LabelVolume out(sem.spec, sem.num_classes);
    if (!vis.empty()) out.vis.assign(vis.begin(), vis.end());

    for (size_t i = 0; i < sem.spec.count(); ++i) {
        const float* p = sem.at(i);
        int best = 0;
        for (int c = 1; c <= sem.num_classes; ++c)
            if (p[c] > p[best]) best = c;
        if (best != 0 && p[best] < occ_threshold) best = 0;
        out.labels[i] = uint8_t(best);
    }
    return out;
}

}  // namespace ssc
