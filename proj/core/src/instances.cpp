#include "ssc/instances.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "ssc/io/ply.hpp"
#include "ssc/io/sisv.hpp"

namespace fs = std::filesystem;

namespace ssc {

namespace {

double nearest_sq(const Vec3f& p, const PointCloud& cloud) {
    // squared distances in double: the reference loss is checked against a
    // brute-force oracle at 1e-9 absolute
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3f& q : cloud.points) {
        double dx = double(p.x) - double(q.x);
        double dy = double(p.y) - double(q.y);
        double dz = double(p.z) - double(q.z);
        best = std::min(best, dx * dx + dy * dy + dz * dz);
    }
    return best;
}

}  // namespace

double chamfer_one_directional(const PointCloud& from, const PointCloud& to) {
    if (from.empty() || to.empty()) throw std::invalid_argument("chamfer: empty point set");
    double sum = 0.0;
    for (const Vec3f& p : from.points) sum += nearest_sq(p, to);
    return sum / double(from.size());
}

double chamfer(const PointCloud& a, const PointCloud& b) {
    return chamfer_one_directional(a, b) + chamfer_one_directional(b, a);
}

ShapeLibrary::ShapeLibrary(std::vector<Entry> entries) : entries_(std::move(entries)) {}

std::vector<const ShapeLibrary::Entry*> ShapeLibrary::templates_for(int class_id) const {
    std::vector<const Entry*> out;
    for (const Entry& e : entries_)
        if (e.class_id == class_id) out.push_back(&e);
    return out;
}

bool ShapeLibrary::has_class(int class_id) const {
    for (const Entry& e : entries_)
        if (e.class_id == class_id) return true;
    return false;
}

void ShapeLibrary::validate(const ClassPalette& palette) const {
    for (int id : palette.instance_class_ids())
        if (!has_class(id)) throw std::runtime_error("shape library missing templates for class " + std::to_string(id));
    for (const Entry& e : entries_)
        for (const Vec3f& p : e.points.points)
            if (std::fabs(p.x) > 1.0f || std::fabs(p.y) > 1.0f || std::fabs(p.z) > 1.0f)
                throw std::runtime_error("template " + e.name + " leaves the canonical cube");
}

uint32_t ShapeLibrary::checksum() const {
    uint32_t c = 0;
    for (const Entry& e : entries_) {
        c = crc32(e.name.data(), e.name.size(), c);
        c = crc32(&e.class_id, sizeof(e.class_id), c);
        c = crc32(e.points.points.data(), e.points.points.size() * sizeof(Vec3f), c);
    }
    return c;
}

namespace {

/// Quantizes an occupancy predicate over [-1,1]^3 to cell-center points.
PointCloud quantize_shape(int resolution, const std::function<bool(Vec3f)>& occupied) {
    PointCloud out;
    for (int k = 0; k < resolution; ++k)
        for (int j = 0; j < resolution; ++j)
            for (int i = 0; i < resolution; ++i) {
                Vec3f c{InstanceGrid::axis_center(i, resolution), InstanceGrid::axis_center(j, resolution),
                        InstanceGrid::axis_center(k, resolution)};
                if (occupied(c)) out.push_back(c);
            }
    return out;
}

bool within(float v, float lo, float hi) { return v >= lo && v <= hi; }

}  // namespace

ShapeLibrary ShapeLibrary::builtin(const ClassPalette& palette, int resolution) {
    std::vector<Entry> entries;
    auto add = [&](const char* name, int class_id, std::function<bool(Vec3f)> pred) {
        entries.push_back({class_id, name, quantize_shape(resolution, pred)});
    };

    int win = palette.id_of("win."), chair = palette.id_of("chair"), bed = palette.id_of("bed");
    int sofa = palette.id_of("sofa"), table = palette.id_of("table"), tvs = palette.id_of("tvs");
    int furn = palette.id_of("furn."), objs = palette.id_of("objs.");

    if (win)
        add("pane", win, [](Vec3f) { return true; });  // thin slab fills its thin box
    if (chair) {
        add("side_chair", chair, [](Vec3f p) {
            bool legs = p.y < -0.2f && std::fabs(p.x) > 0.55f && std::fabs(p.z) > 0.55f;
            bool seat = within(p.y, -0.2f, 0.1f);
            bool back = p.y > 0.1f && p.z > 0.55f;
            return legs || seat || back;
        });
        add("armchair", chair, [](Vec3f p) {
            bool legs = p.y < -0.3f && std::fabs(p.x) > 0.5f && std::fabs(p.z) > 0.5f;
            bool seat = within(p.y, -0.3f, 0.1f);
            bool back = p.y > 0.1f && p.z > 0.5f;
            bool arms = within(p.y, 0.1f, 0.55f) && std::fabs(p.x) > 0.7f;
            return legs || seat || back || arms;
        });
    }
    if (bed)
        add("bed", bed, [](Vec3f p) {
            bool base = p.y < 0.1f;
            bool headboard = p.z > 0.8f;
            return base || headboard;
        });
    if (sofa)
        add("sofa", sofa, [](Vec3f p) {
            bool base = p.y < 0.2f;
            bool back = p.z > 0.5f;
            bool arms = std::fabs(p.x) > 0.75f && p.y < 0.6f;
            return base || back || arms;
        });
    if (table) {
        add("table_legs", table, [](Vec3f p) {
            bool top = p.y > 0.7f;
            bool legs = std::fabs(p.x) > 0.7f && std::fabs(p.z) > 0.7f;
            return top || legs;
        });
        add("table_pedestal", table, [](Vec3f p) {
            bool top = p.y > 0.7f;
            bool stem = std::fabs(p.x) < 0.25f && std::fabs(p.z) < 0.25f;
            bool base = p.y < -0.8f && std::fabs(p.x) < 0.6f && std::fabs(p.z) < 0.6f;
            return top || stem || base;
        });
    }
    if (tvs)
        add("screen", tvs, [](Vec3f) { return true; });
    if (furn)
        add("cabinet", furn, [](Vec3f) { return true; });
    if (objs) {
        add("ball", objs, [](Vec3f p) { return norm_sq(p) <= 1.0f; });
        add("box", objs, [](Vec3f) { return true; });
    }

    ShapeLibrary lib(std::move(entries));
    lib.validate(palette);
    return lib;
}

void ShapeLibrary::save(const std::string& dir) const {
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["entries"] = nlohmann::json::array();
    for (const Entry& e : entries_) {
        std::string file = std::to_string(e.class_id) + "_" + e.name + ".ply";
        write_ply_points((fs::path(dir) / file).string(), e.points, PlyFormat::BinaryLittleEndian,
                         {uint8_t(e.class_id)});
        manifest["entries"].push_back({{"class_id", e.class_id},
                                       {"name", e.name},
                                       {"file", file},
                                       {"points", e.points.size()},
                                       {"crc32", file_crc32((fs::path(dir) / file).string())}});
    }
    std::ofstream out(fs::path(dir) / "library.json");
    out << manifest.dump(2) << "\n";
}

ShapeLibrary ShapeLibrary::load(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "library.json");
    if (!in) throw IoError((fs::path(dir) / "library.json").string(), 0, "cannot open library manifest");
    nlohmann::json manifest = nlohmann::json::parse(in);

    std::vector<Entry> entries;
    for (const auto& j : manifest.at("entries")) {
        Entry e;
        e.class_id = j.at("class_id").get<int>();
        e.name = j.at("name").get<std::string>();
        std::string path = (fs::path(dir) / j.at("file").get<std::string>()).string();
        if (j.contains("crc32") && file_crc32(path) != j.at("crc32").get<uint32_t>())
            throw IoError(path, 0, "checksum mismatch against library manifest");
        e.points = read_ply_points(path).cloud;
        entries.push_back(std::move(e));
    }
    return ShapeLibrary(std::move(entries));
}

PointCloud resample_farthest(const PointCloud& cloud, size_t target, uint64_t seed) {
    if (cloud.size() <= target || target == 0) return cloud;

    const size_t n = cloud.size();
    std::vector<float> best_sq(n, std::numeric_limits<float>::max());
    std::vector<uint32_t> picked;
    picked.reserve(target);

    Rng rng(seed);
    uint32_t cur = rng.uniform_u32(uint32_t(n));
    picked.push_back(cur);
    for (size_t it = 1; it < target; ++it) {
        float far_d = -1.0f;
        uint32_t far_i = 0;
        for (size_t i = 0; i < n; ++i) {
            float d = dist_sq(cloud.points[i], cloud.points[cur]);
            if (d < best_sq[i]) best_sq[i] = d;
            if (best_sq[i] > far_d) {
                far_d = best_sq[i];
                far_i = uint32_t(i);
            }
        }
        cur = far_i;
        picked.push_back(cur);
    }

    PointCloud out;
    out.num_classes = cloud.num_classes;
    for (uint32_t i : picked) out.append_from(cloud, i);
    return out;
}

PointCloud resample_stride(const PointCloud& cloud, size_t target, uint64_t seed) {
    if (cloud.size() <= target || target == 0) return cloud;
    const size_t n = cloud.size();
    PointCloud out;
    out.num_classes = cloud.num_classes;
    Rng rng(seed);
    size_t phase = rng.uniform_u32(uint32_t(n));
    for (size_t k = 0; k < target; ++k) out.append_from(cloud, (phase + (k * n) / target) % n);
    return out;
}

CompletedInstance PassthroughInstanceCompleter::complete(const PointCloud& partial,
                                                         std::span<const float> class_conf,
                                                         const CanonicalFrame& frame) const {
    if (partial.empty()) throw std::invalid_argument("passthrough completer: empty partial cloud");
    int best = 0;
    for (size_t c = 1; c < class_conf.size(); ++c)
        if (class_conf[c] > class_conf[best]) best = int(c);
    CompletedInstance out;
    out.points = partial;
    out.frame = frame;
    out.class_id = best + 1;
    return out;
}

ShapePriorCompleter::ShapePriorCompleter(std::shared_ptr<const ShapeLibrary> library, size_t match_points,
                                         size_t output_points, uint64_t seed)
    : library_(std::move(library)), match_points_(match_points), output_points_(output_points), seed_(seed) {
    const auto& entries = library_->entries();
    match_sets_.reserve(entries.size());
    output_sets_.reserve(entries.size());
    for (size_t i = 0; i < entries.size(); ++i) {
        match_sets_.push_back(resample_stride(entries[i].points, match_points_, seed_ ^ (i * 2 + 1)));
        output_sets_.push_back(output_points_ > 0
                                   ? resample_farthest(entries[i].points, output_points_, seed_ ^ (i * 2 + 2))
                                   : entries[i].points);
    }
}

size_t ShapePriorCompleter::retrieve_index(const PointCloud& partial, int class_id) const {
    const auto& entries = library_->entries();
    double best_cost = std::numeric_limits<double>::infinity();
    size_t best = entries.size();
    for (size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].class_id != class_id) continue;
        double cost = chamfer_one_directional(partial, match_sets_[i]);
        if (cost < best_cost) {
            best_cost = cost;
            best = i;
        }
    }
    if (best == entries.size()) throw NoPriorError(class_id);
    return best;
}

CompletedInstance ShapePriorCompleter::complete(const PointCloud& partial, std::span<const float> class_conf,
                                                const CanonicalFrame& frame) const {
    if (partial.empty()) throw std::invalid_argument("shape-prior completer: empty partial cloud");
    int best = -1;
    float best_conf = 0.0f;
    for (size_t c = 0; c < class_conf.size(); ++c) {
        if (class_conf[c] > best_conf) {
            best_conf = class_conf[c];
            best = int(c);
        }
    }
    if (best < 0) throw std::invalid_argument("shape-prior completer: all-zero class confidences");
    int class_id = best + 1;

    size_t idx = retrieve_index(partial, class_id);
    CompletedInstance out;
    out.points = output_sets_[idx];
    out.frame = frame;
    out.class_id = class_id;
    return out;
}

std::string ShapePriorCompleter::fingerprint() const {
    return "instance=shape_prior;match=" + std::to_string(match_points_) +
           ";out=" + std::to_string(output_points_) + ";seed=" + std::to_string(seed_) +
           ";lib=" + std::to_string(library_->checksum());
}

namespace {

struct MatchMasks {
    std::vector<uint8_t> boundary;  // template boundary, dilated per axis
    std::vector<uint8_t> solid;
};

/// Match masks for shape registration. Observed partials are surface shells,
/// so the positive mask is the template's boundary (cells with an empty
/// 6-neighbor) dilated by the evidence quantization radius per axis; a thin
/// world axis cannot be localized below one scene voxel, so its dilation
/// widens accordingly. The solid mask flags wrong fits that pull the shell
/// into the template interior.
MatchMasks build_match_masks(const PointCloud& shape, GridDims dims, const Vec3f& half_extents,
                             float evidence_voxel) {
    const int n[3] = {dims.h, dims.w, dims.d};
    MatchMasks m;
    m.solid.assign(dims.count(), 0);
    for (const Vec3f& p : shape.points) {
        int idx[3];
        bool ok = true;
        for (int a = 0; a < 3; ++a) {
            idx[a] = int(std::floor((p[a] + 1.0f) * 0.5f * n[a]));
            if (idx[a] < 0 || idx[a] >= n[a]) ok = false;
        }
        if (ok) m.solid[dims.index(idx[0], idx[1], idx[2])] = 1;
    }

    auto at = [&](int i, int j, int k) -> uint8_t {
        if (i < 0 || i >= n[0] || j < 0 || j >= n[1] || k < 0 || k >= n[2]) return 0;
        return m.solid[dims.index(i, j, k)];
    };

    std::vector<uint8_t> boundary(dims.count(), 0);
    for (int k = 0; k < n[2]; ++k)
        for (int j = 0; j < n[1]; ++j)
            for (int i = 0; i < n[0]; ++i) {
                if (!at(i, j, k)) continue;
                if (!at(i - 1, j, k) || !at(i + 1, j, k) || !at(i, j - 1, k) || !at(i, j + 1, k) ||
                    !at(i, j, k - 1) || !at(i, j, k + 1))
                    boundary[dims.index(i, j, k)] = 1;
            }

    // half a scene voxel of slack, expressed in cells of each axis
    int radius[3];
    const float he[3] = {half_extents.x, half_extents.y, half_extents.z};
    for (int a = 0; a < 3; ++a) {
        float cell_world = 2.0f * he[a] / n[a];
        radius[a] = std::clamp(int(std::lround(0.5f * evidence_voxel / cell_world)), 1, 8);
    }

    m.boundary.assign(dims.count(), 0);
    for (int k = 0; k < n[2]; ++k)
        for (int j = 0; j < n[1]; ++j)
            for (int i = 0; i < n[0]; ++i) {
                if (!boundary[dims.index(i, j, k)]) continue;
                for (int dk = -radius[2]; dk <= radius[2]; ++dk)
                    for (int dj = -radius[1]; dj <= radius[1]; ++dj)
                        for (int di = -radius[0]; di <= radius[0]; ++di) {
                            int ii = i + di, jj = j + dj, kk = k + dk;
                            if (ii >= 0 && ii < n[0] && jj >= 0 && jj < n[1] && kk >= 0 && kk < n[2])
                                m.boundary[dims.index(ii, jj, kk)] = 1;
                        }
            }
    return m;
}

}  // namespace

FrameFit refine_frame(const PointCloud& partial_canonical, const PointCloud& completed_canonical,
                      const CanonicalFrame& frame, float search_radius, float step, bool lock_y,
                      float evidence_voxel, GridDims dims) {
    if (partial_canonical.empty() || completed_canonical.empty()) return {};

    const int n[3] = {dims.h, dims.w, dims.d};
    MatchMasks masks = build_match_masks(completed_canonical, dims, frame.half_extents, evidence_voxel);
    PointCloud sample = resample_stride(partial_canonical, 256, 0);

    // scales ordered by distance from 1 so ties keep the least distortion
    static const float kScales[] = {1.0f, 0.95f, 1.05f, 0.9f, 1.1f, 0.85f, 1.15f, 0.8f, 1.2f, 1.25f};

    // boundary hit +1, interior hit -1: a shell pulled inside the solid is a
    // wrong fit even when every point lands on occupied cells
    auto score_at = [&](Vec3f d, float scale) {
        Vec3f shift = div(d, frame.half_extents);
        int score = 0;
        for (const Vec3f& p : sample.points) {
            int idx[3];
            bool ok = true;
            for (int a = 0; a < 3; ++a) {
                float v = (p[a] - shift[a]) / scale;
                idx[a] = int(std::floor((v + 1.0f) * 0.5f * n[a]));
                if (idx[a] < 0 || idx[a] >= n[a]) ok = false;
            }
            if (!ok) continue;
            size_t cell = dims.index(idx[0], idx[1], idx[2]);
            if (masks.boundary[cell])
                ++score;
            else if (masks.solid[cell])
                --score;
        }
        return score;
    };

    auto search = [&](Vec3f around, float radius, float grid_step, FrameFit& best, int& best_score) {
        const int k = std::max(1, int(std::lround(radius / grid_step)));
        const int ky = lock_y ? 0 : k;
        struct Offset {
            Vec3f d;
            float mag_sq;
        };
        std::vector<Offset> offsets;
        for (int dz = -k; dz <= k; ++dz)
            for (int dy = -ky; dy <= ky; ++dy)
                for (int dx = -k; dx <= k; ++dx) {
                    Vec3f d = around + Vec3f{dx * grid_step, dy * grid_step, dz * grid_step};
                    offsets.push_back({d, norm_sq(d)});
                }
        std::stable_sort(offsets.begin(), offsets.end(),
                         [](const Offset& a, const Offset& b) { return a.mag_sq < b.mag_sq; });
        for (float scale : kScales)
            for (const Offset& off : offsets) {
                int s = score_at(off.d, scale);
                if (s > best_score) {
                    best_score = s;
                    best = {off.d, scale};
                }
            }
    };

    FrameFit best;
    int best_score = -1;
    search({0, 0, 0}, 2.0f * search_radius, 2.0f * step, best, best_score);  // coarse
    search(best.offset, 1.5f * step, step * 0.5f, best, best_score);         // local refine
    return best;
}

InstanceCompletionResult complete_instance_grid(const PointCloud& partial,
                                                std::span<const float> class_conf,
                                                const CanonicalFrame& frame,
                                                const InstanceCompleter& completer, GridDims dims) {
    InstanceCompletionResult out;
    out.partial_grid = gridding(partial, dims);
    out.instance = completer.complete(partial, class_conf, frame);
    out.completed_grid = gridding(out.instance.points, dims);

    // Round-trip consistency: each completed point must be within one cell
    // of the regridded point emitted by its containing cell.
    std::vector<size_t> cells;
    PointCloud back = regridding(out.completed_grid, 1e-6f, &cells);
    std::unordered_map<size_t, Vec3f> by_cell;
    by_cell.reserve(cells.size());
    for (size_t i = 0; i < cells.size(); ++i) by_cell[cells[i]] = back.points[i];

    const int n[3] = {dims.h, dims.w, dims.d};
    const float edge[3] = {2.0f / n[0], 2.0f / n[1], 2.0f / n[2]};
    for (const Vec3f& p : out.instance.points.points) {
        int idx[3];
        for (int a = 0; a < 3; ++a)
            idx[a] = std::clamp(int(std::floor((p[a] + 1.0f) * 0.5f * n[a])), 0, n[a] - 1);
        auto it = by_cell.find(dims.index(idx[0], idx[1], idx[2]));
        if (it == by_cell.end())
            throw std::runtime_error("instance grid round trip lost a point's cell");
        Vec3f q = it->second;
        for (int a = 0; a < 3; ++a)
            if (std::fabs(p[a] - q[a]) > edge[a])
                throw std::runtime_error("instance grid round trip moved a point by more than one cell");
    }
    return out;
}

double loss_instance(double det_loss, double cd_loss) {
    if (det_loss < 0.0 || cd_loss < 0.0) throw std::invalid_argument("loss_instance: losses must be >= 0");
    return det_loss + cd_loss;
}

}  // namespace ssc
