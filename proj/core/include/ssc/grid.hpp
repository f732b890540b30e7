#pragma once

#include <cstdint>
#include <stdexcept>

#include "ssc/geometry.hpp"

namespace ssc {

/// Per-voxel visibility with respect to the input camera. Drives TSDF signs
/// and every evaluation mask.
enum class Visibility : uint8_t {
    OutsideFrustum = 0,  // not observed; excluded from evaluation
    VisibleFree = 1,     // in front of the first surface along its ray
    Surface = 2,         // on the observed surface
    Occluded = 3,        // behind the first surface along its ray
};

inline bool in_frustum(Visibility v) { return v != Visibility::OutsideFrustum; }

struct VoxelIndex {
    int x = 0, y = 0, z = 0;
};

/// Scene voxel lattice: dims, voxel edge length, and the world position of
/// the (0,0,0) voxel corner. Linear indexing is row-major with X fastest,
/// matching the SISV payload order.
struct GridSpec {
    int nx = 60, ny = 36, nz = 60;
    float voxel_size = 0.08f;
    Vec3f origin{0.0f, 0.0f, 0.0f};

    void validate() const {
        if (nx < 1 || ny < 1 || nz < 1) throw std::invalid_argument("grid dims must be >= 1");
        if (!(voxel_size > 0.0f)) throw std::invalid_argument("voxel_size must be > 0");
    }

    size_t count() const { return size_t(nx) * ny * nz; }

    size_t index(int x, int y, int z) const { return size_t(x) + size_t(nx) * (size_t(y) + size_t(ny) * z); }
    size_t index(VoxelIndex v) const { return index(v.x, v.y, v.z); }

    VoxelIndex unindex(size_t i) const {
        VoxelIndex v;
        v.x = int(i % nx);
        v.y = int((i / nx) % ny);
        v.z = int(i / (size_t(nx) * ny));
        return v;
    }

    bool in_bounds(int x, int y, int z) const {
        return x >= 0 && x < nx && y >= 0 && y < ny && z >= 0 && z < nz;
    }
    bool in_bounds(VoxelIndex v) const { return in_bounds(v.x, v.y, v.z); }

    Vec3f voxel_center(int x, int y, int z) const {
        return origin + Vec3f{(x + 0.5f) * voxel_size, (y + 0.5f) * voxel_size, (z + 0.5f) * voxel_size};
    }
    Vec3f voxel_center(VoxelIndex v) const { return voxel_center(v.x, v.y, v.z); }

    /// Floor rule: points exactly on a voxel boundary go to the lower-index voxel.
    VoxelIndex world_to_voxel(Vec3f p) const {
        Vec3f q = (p - origin) / voxel_size;
        return {int(std::floor(q.x)), int(std::floor(q.y)), int(std::floor(q.z))};
    }

    Vec3f world_extent() const { return {nx * voxel_size, ny * voxel_size, nz * voxel_size}; }

    bool operator==(const GridSpec& o) const {
        return nx == o.nx && ny == o.ny && nz == o.nz && voxel_size == o.voxel_size && origin == o.origin;
    }
};

}  // namespace ssc
