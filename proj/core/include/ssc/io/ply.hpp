#pragma once

#include <array>
#include <string>
#include <vector>

#include "ssc/point_cloud.hpp"

namespace ssc {

enum class PlyFormat { Ascii, BinaryLittleEndian };

/// Writes x/y/z float properties plus an optional uchar class_id column
/// (one value per point, or a single value broadcast to all points).
void write_ply_points(const std::string& path, const PointCloud& cloud, PlyFormat format,
                      const std::vector<uint8_t>& class_ids = {});

struct PlyPoints {
    PointCloud cloud;
    std::vector<uint8_t> class_ids;  // empty when the file has no class_id property
};
PlyPoints read_ply_points(const std::string& path);

/// Colored triangle mesh (for voxel-cube export).
struct TriMesh {
    std::vector<Vec3f> vertices;
    std::vector<std::array<uint8_t, 3>> colors;  // per vertex
    std::vector<std::array<uint32_t, 3>> faces;
};
void write_ply_mesh(const std::string& path, const TriMesh& mesh, PlyFormat format);

}  // namespace ssc
