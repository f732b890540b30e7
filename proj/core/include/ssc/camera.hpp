#pragma once

#include <cstdint>
#include <vector>

#include "ssc/geometry.hpp"

namespace ssc {

/// Pinhole camera with a rigid camera-to-world pose.
/// Pixel (u, v) at depth z back-projects to camera coordinates
/// ((u - cx) * z / fx, (v - cy) * z / fy, z); integer pixel indices map to
/// exact pixel coordinates (no half-pixel offset).
struct CameraModel {
    float fx = 1.0f, fy = 1.0f;
    float cx = 0.0f, cy = 0.0f;
    Mat3f rotation;     // camera -> world
    Vec3f translation;  // camera origin in world coordinates

    void validate() const {
        if (!(fx > 0.0f) || !(fy > 0.0f)) throw std::invalid_argument("camera focal lengths must be > 0");
        if (!rotation.is_rotation(1e-6f))
            throw std::invalid_argument("camera pose rotation is not orthonormal with det +1");
    }

    Vec3f cam_to_world(Vec3f p) const { return rotation * p + translation; }
    Vec3f world_to_cam(Vec3f p) const { return rotation.transposed() * (p - translation); }

    /// Projects a camera-frame point to pixel coordinates; caller checks z > 0.
    void project(Vec3f pc, float& u, float& v) const {
        u = pc.x / pc.z * fx + cx;
        v = pc.y / pc.z * fy + cy;
    }
};

/// Per-pixel depth in meters with a validity mask. Invalid pixels carry no
/// depth at all (they are skipped, never NaN-propagated).
struct DepthMap {
    int width = 0, height = 0;
    std::vector<float> depth;     // width*height, row-major, v fastest over u
    std::vector<uint8_t> valid;   // same layout, 0/1

    DepthMap() = default;
    DepthMap(int w, int h) : width(w), height(h), depth(size_t(w) * h, 0.0f), valid(size_t(w) * h, 0) {}

    size_t idx(int u, int v) const { return size_t(v) * width + u; }
    bool in_bounds(int u, int v) const { return u >= 0 && u < width && v >= 0 && v < height; }

    void set(int u, int v, float d) {
        depth[idx(u, v)] = d;
        valid[idx(u, v)] = 1;
    }
    bool is_valid(int u, int v) const { return valid[idx(u, v)] != 0; }
    float at(int u, int v) const { return depth[idx(u, v)]; }

    size_t valid_count() const {
        size_t n = 0;
        for (uint8_t m : valid) n += m;
        return n;
    }
};

/// 2D per-pixel C-class segmentation confidences (each valid pixel sums to 1).
struct SegmentationMap {
    int width = 0, height = 0;
    int num_classes = 0;
    std::vector<float> conf;  // width*height*num_classes, pixel-major, class fastest

    SegmentationMap() = default;
    SegmentationMap(int w, int h, int c)
        : width(w), height(h), num_classes(c), conf(size_t(w) * h * c, 0.0f) {}

    float* at(int u, int v) { return conf.data() + (size_t(v) * width + u) * num_classes; }
    const float* at(int u, int v) const { return conf.data() + (size_t(v) * width + u) * num_classes; }

    void set_one_hot(int u, int v, int class_id) {
        float* p = at(u, v);
        for (int c = 0; c < num_classes; ++c) p[c] = 0.0f;
        p[class_id - 1] = 1.0f;  // class ids are 1-based, channels 0-based
    }
};

}  // namespace ssc
