#include "ssc/io/sisv.hpp"

#include <cstring>
#include <fstream>

namespace ssc {

namespace {

constexpr char kMagic[8] = {'S', 'I', 'S', 'V', 'O', 'L', '0', '1'};

// Header fields after the magic, packed little-endian: dims (3xu32),
// voxel_size (f32), origin (3xf32), channels (u32), dtype (u8), sign (u8).
constexpr size_t kHeaderBytes = 8 + 12 + 4 + 12 + 4 + 1 + 1;

template <typename T>
void put(std::string& buf, T v) {
    char tmp[sizeof(T)];
    std::memcpy(tmp, &v, sizeof(T));
    buf.append(tmp, sizeof(T));  // host is little-endian on all supported targets
}

template <typename T>
T take(const std::string& buf, size_t& off) {
    T v;
    std::memcpy(&v, buf.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

}  // namespace

void write_sisv(const std::string& path, const SisvVolume& vol) {
    const size_t n = vol.spec.count() * vol.channels;
    if (vol.dtype == 0 && vol.f32.size() != n)
        throw std::invalid_argument("write_sisv: f32 payload size mismatch");
    if (vol.dtype == 1 && vol.u8.size() != n)
        throw std::invalid_argument("write_sisv: u8 payload size mismatch");

    std::string header;
    header.append(kMagic, 8);
    put<uint32_t>(header, uint32_t(vol.spec.nx));
    put<uint32_t>(header, uint32_t(vol.spec.ny));
    put<uint32_t>(header, uint32_t(vol.spec.nz));
    put<float>(header, vol.spec.voxel_size);
    put<float>(header, vol.spec.origin.x);
    put<float>(header, vol.spec.origin.y);
    put<float>(header, vol.spec.origin.z);
    put<uint32_t>(header, vol.channels);
    put<uint8_t>(header, vol.dtype);
    put<uint8_t>(header, vol.sign_convention);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path, 0, "cannot open for writing");
    out.write(header.data(), std::streamsize(header.size()));
    if (vol.dtype == 0)
        out.write(reinterpret_cast<const char*>(vol.f32.data()), std::streamsize(n * sizeof(float)));
    else
        out.write(reinterpret_cast<const char*>(vol.u8.data()), std::streamsize(n));
    if (!out) throw IoError(path, header.size(), "write failed");
}

SisvVolume read_sisv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path, 0, "cannot open");
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (buf.size() < kHeaderBytes) throw IoError(path, buf.size(), "truncated header");
    if (std::memcmp(buf.data(), kMagic, 8) != 0) throw IoError(path, 0, "bad magic, not a SISV1 file");

    size_t off = 8;
    SisvVolume vol;
    vol.spec.nx = int(take<uint32_t>(buf, off));
    vol.spec.ny = int(take<uint32_t>(buf, off));
    vol.spec.nz = int(take<uint32_t>(buf, off));
    vol.spec.voxel_size = take<float>(buf, off);
    vol.spec.origin.x = take<float>(buf, off);
    vol.spec.origin.y = take<float>(buf, off);
    vol.spec.origin.z = take<float>(buf, off);
    vol.channels = take<uint32_t>(buf, off);
    vol.dtype = take<uint8_t>(buf, off);
    vol.sign_convention = take<uint8_t>(buf, off);

    if (vol.spec.nx < 1 || vol.spec.ny < 1 || vol.spec.nz < 1 || vol.channels < 1)
        throw IoError(path, 8, "invalid dims or channels");
    if (vol.dtype > 1) throw IoError(path, off - 2, "unknown dtype");

    const size_t n = vol.spec.count() * vol.channels;
    const size_t need = n * (vol.dtype == 0 ? sizeof(float) : 1);
    if (buf.size() - off != need) throw IoError(path, off, "payload size mismatch");

    if (vol.dtype == 0) {
        vol.f32.resize(n);
        std::memcpy(vol.f32.data(), buf.data() + off, need);
    } else {
        vol.u8.assign(buf.begin() + std::ptrdiff_t(off), buf.end());
    }
    return vol;
}

void save_tsdf(const std::string& path, const TsdfVolume& vol) {
    SisvVolume s;
    s.spec = vol.spec;
    s.channels = 2;  // channel 0 = signed distance, channel 1 = visibility flag
    s.dtype = 0;
    s.f32.resize(vol.spec.count() * 2);
    for (size_t i = 0; i < vol.spec.count(); ++i) {
        s.f32[2 * i] = vol.distance[i];
        s.f32[2 * i + 1] = float(uint8_t(vol.vis[i]));
    }
    write_sisv(path, s);
}

TsdfVolume load_tsdf(const std::string& path, float trunc) {
    SisvVolume s = read_sisv(path);
    if (s.dtype != 0 || s.channels != 2) throw IoError(path, 0, "not a TSDF volume (need f32 x2 channels)");
    TsdfVolume vol(s.spec, trunc);
    for (size_t i = 0; i < s.spec.count(); ++i) {
        vol.distance[i] = s.f32[2 * i];
        vol.vis[i] = Visibility(uint8_t(s.f32[2 * i + 1]));
    }
    return vol;
}

void save_semantic(const std::string& path, const SemanticVolume& vol) {
    SisvVolume s;
    s.spec = vol.spec;
    s.channels = uint32_t(vol.channels());
    s.dtype = 0;
    s.f32 = vol.conf;
    write_sisv(path, s);
}

SemanticVolume load_semantic(const std::string& path) {
    SisvVolume s = read_sisv(path);
    if (s.dtype != 0 || s.channels < 2) throw IoError(path, 0, "not a semantic volume");
    SemanticVolume vol(s.spec, int(s.channels) - 1);
    vol.conf = std::move(s.f32);
    return vol;
}

void save_labels(const std::string& path, const LabelVolume& vol) {
    SisvVolume s;
    s.spec = vol.spec;
    s.channels = 1;
    s.dtype = 1;
    s.u8 = vol.labels;
    write_sisv(path, s);
}

LabelVolume load_labels(const std::string& path, int num_classes) {
    SisvVolume s = read_sisv(path);
    if (s.dtype != 1 || s.channels != 1) throw IoError(path, 0, "not a label volume (need u8 x1 channel)");
    LabelVolume vol(s.spec, num_classes);
    vol.labels = std::move(s.u8);
    return vol;
}

void save_visibility(const std::string& path, const GridSpec& spec, const std::vector<Visibility>& vis) {
    SisvVolume s;
    s.spec = spec;
    s.channels = 1;
    s.dtype = 1;
    s.u8.resize(vis.size());
    for (size_t i = 0; i < vis.size(); ++i) s.u8[i] = uint8_t(vis[i]);
    write_sisv(path, s);
}

std::vector<Visibility> load_visibility(const std::string& path, GridSpec* spec_out) {
    SisvVolume s = read_sisv(path);
    if (s.dtype != 1 || s.channels != 1) throw IoError(path, 0, "not a visibility volume");
    if (spec_out) *spec_out = s.spec;
    std::vector<Visibility> vis(s.u8.size());
    for (size_t i = 0; i < s.u8.size(); ++i) {
        if (s.u8[i] > 3) throw IoError(path, kHeaderBytes + i, "invalid visibility flag");
        vis[i] = Visibility(s.u8[i]);
    }
    return vis;
}

uint32_t file_crc32(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path, 0, "cannot open");
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return crc32(buf.data(), buf.size());
}

}  // namespace ssc
