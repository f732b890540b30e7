#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssc/grid.hpp"
#include "ssc/volumes.hpp"

namespace ssc {

/// Data error carrying the file and byte offset where parsing failed.
struct IoError : std::runtime_error {
    IoError(const std::string& file, size_t offset, const std::string& what)
        : std::runtime_error(file + " @" + std::to_string(offset) + ": " + what), path(file), byte_offset(offset) {}
    std::string path;
    size_t byte_offset;
};

/// SISV1 volume file: 8-byte magic "SISVOL01", little-endian header
/// {dims 3xu32, voxel_size f32, origin 3xf32, channels u32, dtype u8
/// (0=f32, 1=u8), sign_convention u8}, then the payload row-major with X
/// fastest and channels interleaved per voxel.
/// sign_convention 0 means negative distance = occluded.
struct SisvVolume {
    GridSpec spec;
    uint32_t channels = 1;
    uint8_t dtype = 0;            // 0 = f32, 1 = u8
    uint8_t sign_convention = 0;  // 0 = negative-is-occluded
    std::vector<float> f32;       // count*channels when dtype == 0
    std::vector<uint8_t> u8;      // count*channels when dtype == 1
};

void write_sisv(const std::string& path, const SisvVolume& vol);
SisvVolume read_sisv(const std::string& path);

// Typed wrappers used by the pipeline. TSDF distances and semantic
// confidences store as f32; labels and visibility flags as u8.
void save_tsdf(const std::string& path, const TsdfVolume& vol);
void save_semantic(const std::string& path, const SemanticVolume& vol);
void save_labels(const std::string& path, const LabelVolume& vol);
void save_visibility(const std::string& path, const GridSpec& spec, const std::vector<Visibility>& vis);

TsdfVolume load_tsdf(const std::string& path, float trunc);
SemanticVolume load_semantic(const std::string& path);
LabelVolume load_labels(const std::string& path, int num_classes);
std::vector<Visibility> load_visibility(const std::string& path, GridSpec* spec_out = nullptr);

/// CRC32 of a file's full contents; throws IoError when unreadable.
uint32_t file_crc32(const std::string& path);

}  // namespace ssc
