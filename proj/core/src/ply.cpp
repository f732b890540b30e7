#include "ssc/io/ply.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ssc/io/sisv.hpp"

namespace ssc {

namespace {

// %.9g round-trips IEEE f32 exactly and keeps ascii output deterministic.
void append_float(std::string& s, float v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", double(v));
    s += buf;
}

}  // namespace

void write_ply_points(const std::string& path, const PointCloud& cloud, PlyFormat format,
                      const std::vector<uint8_t>& class_ids) {
    const size_t n = cloud.size();
    const bool with_class = !class_ids.empty();
    if (with_class && class_ids.size() != 1 && class_ids.size() != n)
        throw std::invalid_argument("write_ply_points: class_ids must be empty, 1, or per-point");

    std::string out;
    out += "ply\n";
    out += format == PlyFormat::Ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n";
    out += "element vertex " + std::to_string(n) + "\n";
    out += "property float x\nproperty float y\nproperty float z\n";
    if (with_class) out += "property uchar class_id\n";
    out += "end_header\n";

    if (format == PlyFormat::Ascii) {
        for (size_t i = 0; i < n; ++i) {
            const Vec3f& p = cloud.points[i];
            append_float(out, p.x);
            out += ' ';
            append_float(out, p.y);
            out += ' ';
            append_float(out, p.z);
            if (with_class) out += ' ' + std::to_string(class_ids.size() == 1 ? class_ids[0] : class_ids[i]);
            out += '\n';
        }
    } else {
        for (size_t i = 0; i < n; ++i) {
            const Vec3f& p = cloud.points[i];
            char rec[13];
            std::memcpy(rec, &p.x, 4);
            std::memcpy(rec + 4, &p.y, 4);
            std::memcpy(rec + 8, &p.z, 4);
            size_t len = 12;
            if (with_class) {
                rec[12] = char(class_ids.size() == 1 ? class_ids[0] : class_ids[i]);
                len = 13;
            }
            out.append(rec, len);
        }
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(path, 0, "cannot open for writing");
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw IoError(path, 0, "write failed");
}

PlyPoints read_ply_points(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError(path, 0, "cannot open");
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    size_t pos = 0;
    auto next_line = [&]() -> std::string {
        size_t e = buf.find('\n', pos);
        if (e == std::string::npos) throw IoError(path, pos, "unterminated header");
        std::string line = buf.substr(pos, e - pos);
        pos = e + 1;
        return line;
    };

    if (next_line() != "ply") throw IoError(path, 0, "not a PLY file");
    std::string fmt = next_line();
    bool binary;
    if (fmt == "format ascii 1.0")
        binary = false;
    else if (fmt == "format binary_little_endian 1.0")
        binary = true;
    else
        throw IoError(path, pos, "unsupported PLY format: " + fmt);

    size_t n = 0;
    bool with_class = false;
    std::vector<std::string> props;
    for (;;) {
        std::string line = next_line();
        if (line == "end_header") break;
        std::istringstream ss(line);
        std::string tok;
        ss >> tok;
        if (tok == "comment") continue;
        if (tok == "element") {
            std::string name;
            ss >> name >> n;
            if (name != "vertex") throw IoError(path, pos, "only vertex elements supported");
        } else if (tok == "property") {
            std::string type, name;
            ss >> type >> name;
            props.push_back(name);
            if (name == "class_id") {
                if (type != "uchar") throw IoError(path, pos, "class_id must be uchar");
                with_class = true;
            } else if (type != "float") {
                throw IoError(path, pos, "unsupported property type: " + type);
            }
        }
    }
    if (props.size() < 3 || props[0] != "x" || props[1] != "y" || props[2] != "z")
        throw IoError(path, pos, "expected x y z properties first");

    PlyPoints out;
    out.cloud.points.reserve(n);
    if (with_class) out.class_ids.reserve(n);

    if (binary) {
        const size_t stride = 12 + (with_class ? 1 : 0);
        if (buf.size() - pos < n * stride) throw IoError(path, pos, "truncated binary payload");
        for (size_t i = 0; i < n; ++i) {
            Vec3f p;
            std::memcpy(&p.x, buf.data() + pos, 4);
            std::memcpy(&p.y, buf.data() + pos + 4, 4);
            std::memcpy(&p.z, buf.data() + pos + 8, 4);
            if (with_class) out.class_ids.push_back(uint8_t(buf[pos + 12]));
            out.cloud.push_back(p);
            pos += stride;
        }
    } else {
        std::istringstream body(buf.substr(pos));
        for (size_t i = 0; i < n; ++i) {
            Vec3f p;
            body >> p.x >> p.y >> p.z;
            if (with_class) {
                int c;
                body >> c;
                out.class_ids.push_back(uint8_t(c));
            }
            if (!body) throw IoError(path, pos, "truncated ascii payload at vertex " + std::to_string(i));
            out.cloud.push_back(p);
        }
    }
    return out;
}

void write_ply_mesh(const std::string& path, const TriMesh& mesh, PlyFormat format) {
    if (mesh.colors.size() != mesh.vertices.size())
        throw std::invalid_argument("write_ply_mesh: one color per vertex required");

    std::string out;
    out += "ply\n";
    out += format == PlyFormat::Ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n";
    out += "element vertex " + std::to_string(mesh.vertices.size()) + "\n";
    out += "property float x\nproperty float y\nproperty float z\n";
    out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    out += "element face " + std::to_string(mesh.faces.size()) + "\n";
    out += "property list uchar uint vertex_indices\n";
    out += "end_header\n";

    if (format == PlyFormat::Ascii) {
        for (size_t i = 0; i < mesh.vertices.size(); ++i) {
            const Vec3f& p = mesh.vertices[i];
            append_float(out, p.x);
            out += ' ';
            append_float(out, p.y);
            out += ' ';
            append_float(out, p.z);
            for (int c = 0; c < 3; ++c) out += ' ' + std::to_string(mesh.colors[i][c]);
            out += '\n';
        }
        for (const auto& f : mesh.faces)
            out += "3 " + std::to_string(f[0]) + ' ' + std::to_string(f[1]) + ' ' + std::to_string(f[2]) + '\n';
    } else {
        for (size_t i = 0; i < mesh.vertices.size(); ++i) {
            char rec[15];
            std::memcpy(rec, &mesh.vertices[i].x, 4);
            std::memcpy(rec + 4, &mesh.vertices[i].y, 4);
            std::memcpy(rec + 8, &mesh.vertices[i].z, 4);
            rec[12] = char(mesh.colors[i][0]);
            rec[13] = char(mesh.colors[i][1]);
            rec[14] = char(mesh.colors[i][2]);
            out.append(rec, 15);
        }
        for (const auto& f : mesh.faces) {
            char rec[13];
            rec[0] = 3;
            std::memcpy(rec + 1, &f[0], 4);
            std::memcpy(rec + 5, &f[1], 4);
            std::memcpy(rec + 9, &f[2], 4);
            out.append(rec, 13);
        }
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(path, 0, "cannot open for writing");
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw IoError(path, 0, "write failed");
}

}  // namespace ssc
