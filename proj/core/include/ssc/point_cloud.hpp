#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "ssc/geometry.hpp"

namespace ssc {

/// N x 3 point set with optional per-point class confidences (length C,
/// flattened) and an optional height channel. Attribute vectors are either
/// empty or sized to the point count.
struct PointCloud {
    std::vector<Vec3f> points;
    std::vector<float> class_conf;  // points.size() * num_classes when present
    std::vector<float> height;      // points.size() when present
    int num_classes = 0;

    size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    bool has_conf() const { return !class_conf.empty(); }

    std::span<const float> conf_at(size_t i) const {
        return {class_conf.data() + i * num_classes, size_t(num_classes)};
    }

    void push_back(Vec3f p) { points.push_back(p); }

    /// Copies point i of `src` (with its attributes) onto the back of this cloud.
    void append_from(const PointCloud& src, size_t i) {
        points.push_back(src.points[i]);
        if (src.has_conf()) {
            num_classes = src.num_classes;
            auto c = src.conf_at(i);
            class_conf.insert(class_conf.end(), c.begin(), c.end());
        }
        if (!src.height.empty()) height.push_back(src.height[i]);
    }

    void validate_finite() const {
        for (const Vec3f& p : points)
            if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
                throw std::invalid_argument("point cloud contains non-finite coordinates");
    }
};

/// Mapping between an instance's world box and its canonical [-1,1]^3 frame:
/// canonical = (world - center) / half_extents, componentwise.
struct CanonicalFrame {
    Vec3f center;
    Vec3f half_extents{1.0f, 1.0f, 1.0f};

    void validate() const {
        if (half_extents.x <= 1e-6f || half_extents.y <= 1e-6f || half_extents.z <= 1e-6f)
            throw std::invalid_argument("degenerate box: half extents must exceed 1e-6 m");
    }

    Vec3f to_canonical(Vec3f world) const { return div(world - center, half_extents); }
    Vec3f to_world(Vec3f canonical) const { return center + mul(canonical, half_extents); }
};

}  // namespace ssc
