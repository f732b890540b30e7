#include "ssc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ssc/io/ply.hpp"
#include "ssc/io/sisv.hpp"
#include "ssc/pointgrid.hpp"

namespace fs = std::filesystem;

namespace ssc {

namespace {

void stamp_shell(LabelVolume& gt, const ClassPalette& palette) {
    const GridSpec& s = gt.spec;
    int ceil_id = palette.id_of("ceil."), floor_id = palette.id_of("floor"), wall_id = palette.id_of("wall");
    for (int z = 0; z < s.nz; ++z)
        for (int y = 0; y < s.ny; ++y)
            for (int x = 0; x < s.nx; ++x) {
                int label = 0;
                if (y == 0)
                    label = floor_id;
                else if (y == s.ny - 1)
                    label = ceil_id;
                else if (x == 0 || x == s.nx - 1 || z == s.nz - 1)
                    label = wall_id;  // z=0 face stays open for the camera
                if (label) gt.labels[s.index(x, y, z)] = uint8_t(label);
            }
}

/// Voxels covered by the template stamped into the box; cell centers map
/// into scene voxels densely because template cells are finer than voxels.
std::vector<size_t> stamp_voxels(const PointCloud& canonical, const Box3f& box, const GridSpec& spec) {
    CanonicalFrame frame{box.center, box.size * 0.5f};
    PointCloud world = decanonicalize(canonical, frame);
    return voxelize_instance_to_scene(world, 1, spec).voxels;
}

struct Renderer {
    const GridSpec& spec;
    const std::vector<uint8_t>& labels;

    /// First-hit march (Amanatides & Woo). Direction has camera z == 1, so
    /// the returned parameter t is the camera-frame depth of the entry point.
    bool cast(Vec3f origin, Vec3f dir, float& depth_out, int& label_out) const {
        Vec3f lo = spec.origin, hi = spec.origin + spec.world_extent();
        float t0 = 0.0f, t1 = std::numeric_limits<float>::max();
        for (int a = 0; a < 3; ++a) {
            if (std::fabs(dir[a]) < 1e-12f) {
                if (origin[a] < lo[a] || origin[a] > hi[a]) return false;
                continue;
            }
            float ta = (lo[a] - origin[a]) / dir[a];
            float tb = (hi[a] - origin[a]) / dir[a];
            if (ta > tb) std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
        }
        if (t0 >= t1) return false;

        const float eps = 1e-5f;
        Vec3f p = origin + dir * (t0 + eps);
        VoxelIndex v = spec.world_to_voxel(p);
        v.x = std::clamp(v.x, 0, spec.nx - 1);
        v.y = std::clamp(v.y, 0, spec.ny - 1);
        v.z = std::clamp(v.z, 0, spec.nz - 1);

        int step[3];
        float t_max[3], t_delta[3];
        const int dims[3] = {spec.nx, spec.ny, spec.nz};
        int idx[3] = {v.x, v.y, v.z};
        for (int a = 0; a < 3; ++a) {
            if (dir[a] > 0) {
                step[a] = 1;
                float edge = spec.origin[a] + (idx[a] + 1) * spec.voxel_size;
                t_max[a] = (edge - origin[a]) / dir[a];
                t_delta[a] = spec.voxel_size / dir[a];
            } else if (dir[a] < 0) {
                step[a] = -1;
                float edge = spec.origin[a] + idx[a] * spec.voxel_size;
                t_max[a] = (edge - origin[a]) / dir[a];
                t_delta[a] = -spec.voxel_size / dir[a];
            } else {
                step[a] = 0;
                t_max[a] = std::numeric_limits<float>::max();
                t_delta[a] = std::numeric_limits<float>::max();
            }
        }

        float t_enter = t0;
        for (;;) {
            uint8_t label = labels[spec.index(idx[0], idx[1], idx[2])];
            if (label != 0) {
                depth_out = t_enter;
                label_out = label;
                return true;
            }
            int a = 0;
            if (t_max[1] < t_max[a]) a = 1;
            if (t_max[2] < t_max[a]) a = 2;
            t_enter = t_max[a];
            idx[a] += step[a];
            if (idx[a] < 0 || idx[a] >= dims[a]) return false;
            t_max[a] += t_delta[a];
        }
    }
};

}  // namespace

SyntheticScene generate(const SceneRecipe& recipe, const ClassPalette& palette,
                        const ShapeLibrary& library) {
    recipe.validate();
    library.validate(palette);

    SyntheticScene scene;
    scene.recipe = recipe;
    const GridSpec& spec = recipe.grid;
    scene.gt = LabelVolume(spec, palette.num_classes());
    stamp_shell(scene.gt, palette);

    Rng rng(recipe.seed);
    const Vec3f room = spec.world_extent();
    const float vs = spec.voxel_size;
    const int wanted =
        recipe.min_instances + int(rng.uniform_u32(uint32_t(recipe.max_instances - recipe.min_instances + 1)));

    const std::vector<int> instance_ids = palette.instance_class_ids();
    for (int n = 0; n < wanted; ++n) {
        bool placed = false;
        for (int attempt = 0; attempt < recipe.placement_retries && !placed; ++attempt) {
            int class_id = instance_ids[rng.uniform_u32(uint32_t(instance_ids.size()))];
            auto templates = library.templates_for(class_id);
            const ShapeLibrary::Entry* tmpl = templates[rng.uniform_u32(uint32_t(templates.size()))];

            float scale = float(rng.uniform(0.85, 1.2));
            Vec3f size = palette.info(class_id).template_size * scale;
            if (size.y > room.y - 3 * vs) size.y = room.y - 3 * vs;

            bool on_wall = palette.info(class_id).wall_mounted;
            Box3f box;
            box.size = size;
            if (on_wall) {
                box.center.z = spec.origin.z + room.z - vs - size.z * 0.5f - 1e-4f;
                box.center.y = spec.origin.y +
                               float(rng.uniform(std::max(0.9f, size.y * 0.5f + vs),
                                                 std::min(room.y - vs - size.y * 0.5f, 2.0f)));
                box.center.x =
                    spec.origin.x + float(rng.uniform(vs + size.x * 0.5f + 0.05f, room.x - vs - size.x * 0.5f - 0.05f));
            } else {
                box.center.y = spec.origin.y + vs + size.y * 0.5f;  // resting on the floor
                box.center.x =
                    spec.origin.x + float(rng.uniform(vs + size.x * 0.5f + 0.05f, room.x - vs - size.x * 0.5f - 0.05f));
                box.center.z =
                    spec.origin.z + float(rng.uniform(vs + size.z * 0.5f + 0.05f, room.z - vs - size.z * 0.5f - 0.05f));
            }

            std::vector<size_t> voxels = stamp_voxels(tmpl->points, box, spec);
            bool clash = voxels.empty();
            for (size_t v : voxels)
                if (scene.gt.labels[v] != 0) {
                    clash = true;
                    break;
                }
            if (clash) continue;

            for (size_t v : voxels) scene.gt.labels[v] = uint8_t(class_id);
            GtInstance inst;
            inst.id = int(scene.instances.size());
            inst.class_id = class_id;
            inst.box = box;
            inst.voxels = std::move(voxels);
            inst.canonical_shape = tmpl->points;
            scene.instances.push_back(std::move(inst));
            placed = true;
        }
        if (!placed) throw PlacementError(recipe.seed);
    }

    // Camera just outside the open z face, looking down +z with a downward
    // pitch so floor and object tops are properly observed.
    scene.cam.fx = scene.cam.fy = recipe.focal;
    scene.cam.cx = recipe.depth_width / 2.0f;
    scene.cam.cy = recipe.depth_height / 2.0f;
    float pitch = (recipe.pitch_deg + float(rng.uniform(-4.0, 4.0))) * 3.14159265358979f / 180.0f;
    float cp = std::cos(pitch), sp = std::sin(pitch);
    scene.cam.rotation.m = {1, 0, 0, 0, cp, -sp, 0, sp, cp};  // forward tilts toward -y
    scene.cam.translation = spec.origin + Vec3f{room.x * 0.5f + float(rng.uniform(-0.4, 0.4)),
                                                float(rng.uniform(1.4, 1.8)),
                                                -0.6f + float(rng.uniform(-0.15, 0.15))};

    // First-hit depth render + per-pixel semantics (optionally confused).
    scene.depth = DepthMap(recipe.depth_width, recipe.depth_height);
    scene.seg2d = SegmentationMap(recipe.depth_width, recipe.depth_height, palette.num_classes());
    Renderer renderer{spec, scene.gt.labels};
    Rng noise_rng = rng.fork(0xfeed);
    for (int v = 0; v < recipe.depth_height; ++v) {
        for (int u = 0; u < recipe.depth_width; ++u) {
            Vec3f dir_cam{(u - scene.cam.cx) / scene.cam.fx, (v - scene.cam.cy) / scene.cam.fy, 1.0f};
            Vec3f dir = scene.cam.rotation * dir_cam;
            float depth;
            int label;
            if (!renderer.cast(scene.cam.translation, dir, depth, label)) continue;
            scene.depth.set(u, v, depth);
            int reported = label;
            if (recipe.seg_noise_rate > 0.0f && noise_rng.uniform() < double(recipe.seg_noise_rate)) {
                int other = 1 + int(noise_rng.uniform_u32(uint32_t(palette.num_classes() - 1)));
                if (other >= label) ++other;  // symmetric confusion to any other class
                reported = other;
            }
            scene.seg2d.set_one_hot(u, v, reported);
        }
    }

    // Evaluation mask from the same construction the pipeline uses.
    TsdfVolume tsdf = build_tsdf(scene.depth, scene.cam, spec, recipe.truncation);
    scene.gt.vis = tsdf.vis;
    return scene;
}

std::pair<TsdfVolume, SemanticVolume> occlude(const SyntheticScene& scene) {
    TsdfVolume tsdf = build_tsdf(scene.depth, scene.cam, scene.recipe.grid, scene.recipe.truncation);
    SemanticVolume sem = project_semantics(scene.seg2d, scene.depth, scene.cam, scene.recipe.grid);
    return {std::move(tsdf), std::move(sem)};
}

float ray_march_depth_oracle(const SyntheticScene& scene, int u, int v, float step) {
    const GridSpec& spec = scene.recipe.grid;
    Vec3f dir_cam{(u - scene.cam.cx) / scene.cam.fx, (v - scene.cam.cy) / scene.cam.fy, 1.0f};
    Vec3f dir = scene.cam.rotation * dir_cam;
    Vec3f lo = spec.origin, hi = spec.origin + spec.world_extent();
    float far = norm(hi - lo) + norm(scene.cam.translation - lo) + 1.0f;
    for (float t = step; t < far; t += step) {
        Vec3f p = scene.cam.translation + dir * t;
        if (p.x < lo.x || p.y < lo.y || p.z < lo.z || p.x >= hi.x || p.y >= hi.y || p.z >= hi.z) continue;
        VoxelIndex vi = spec.world_to_voxel(p);
        if (scene.gt.labels[spec.index(vi)] != 0) return t;
    }
    return -1.0f;
}

namespace {

void save_depth(const std::string& path, const DepthMap& depth) {
    SisvVolume s;
    s.spec.nx = depth.width;
    s.spec.ny = depth.height;
    s.spec.nz = 1;
    s.spec.voxel_size = 1.0f;
    s.channels = 1;
    s.dtype = 0;
    s.f32.assign(depth.depth.size(), 0.0f);
    for (size_t i = 0; i < depth.depth.size(); ++i) s.f32[i] = depth.valid[i] ? depth.depth[i] : 0.0f;
    write_sisv(path, s);
}

DepthMap load_depth(const std::string& path) {
    SisvVolume s = read_sisv(path);
    if (s.dtype != 0 || s.channels != 1 || s.spec.nz != 1) throw IoError(path, 0, "not a depth map");
    DepthMap depth(s.spec.nx, s.spec.ny);
    for (size_t i = 0; i < s.f32.size(); ++i)
        if (s.f32[i] > 0.0f) {
            depth.depth[i] = s.f32[i];
            depth.valid[i] = 1;
        }
    return depth;
}

void save_seg(const std::string& path, const SegmentationMap& seg) {
    SisvVolume s;
    s.spec.nx = seg.width;
    s.spec.ny = seg.height;
    s.spec.nz = 1;
    s.spec.voxel_size = 1.0f;
    s.channels = uint32_t(seg.num_classes);
    s.dtype = 0;
    s.f32 = seg.conf;
    write_sisv(path, s);
}

SegmentationMap load_seg(const std::string& path) {
    SisvVolume s = read_sisv(path);
    if (s.dtype != 0 || s.spec.nz != 1) throw IoError(path, 0, "not a segmentation map");
    SegmentationMap seg(s.spec.nx, s.spec.ny, int(s.channels));
    seg.conf = std::move(s.f32);
    return seg;
}

nlohmann::json vec_json(Vec3f v) { return nlohmann::json::array({v.x, v.y, v.z}); }
Vec3f vec_from_json(const nlohmann::json& j) { return {j.at(0), j.at(1), j.at(2)}; }

}  // namespace

void save_bundle(const std::string& dir, const SceneBundle& bundle, const ClassPalette& palette) {
    fs::create_directories(fs::path(dir) / "shapes");
    const SyntheticScene& scene = bundle.scene;

    save_labels((fs::path(dir) / "gt_labels.sisv").string(), scene.gt);
    save_visibility((fs::path(dir) / "gt_vis.sisv").string(), scene.gt.spec, scene.gt.vis);
    save_tsdf((fs::path(dir) / "tsdf.sisv").string(), bundle.tsdf);
    save_semantic((fs::path(dir) / "semantics.sisv").string(), bundle.semantics);
    save_depth((fs::path(dir) / "depth.sisv").string(), scene.depth);
    save_seg((fs::path(dir) / "seg2d.sisv").string(), scene.seg2d);

    nlohmann::json m;
    m["format"] = "ssc-bundle-v1";
    m["seed"] = scene.recipe.seed;
    m["recipe"] = {{"min_instances", scene.recipe.min_instances},
                   {"max_instances", scene.recipe.max_instances},
                   {"seg_noise_rate", scene.recipe.seg_noise_rate},
                   {"depth_width", scene.recipe.depth_width},
                   {"depth_height", scene.recipe.depth_height},
                   {"focal", scene.recipe.focal},
                   {"pitch_deg", scene.recipe.pitch_deg},
                   {"truncation", scene.recipe.truncation}};
    m["grid"] = {{"dims", {scene.gt.spec.nx, scene.gt.spec.ny, scene.gt.spec.nz}},
                 {"voxel_size", scene.gt.spec.voxel_size},
                 {"origin", vec_json(scene.gt.spec.origin)}};
    m["num_classes"] = scene.gt.num_classes;
    m["camera"] = {{"fx", scene.cam.fx},
                   {"fy", scene.cam.fy},
                   {"cx", scene.cam.cx},
                   {"cy", scene.cam.cy},
                   {"rotation", scene.cam.rotation.m},
                   {"translation", vec_json(scene.cam.translation)}};

    nlohmann::json instances = nlohmann::json::array();
    for (const GtInstance& inst : scene.instances) {
        std::string shape_file = "shapes/inst_" + std::to_string(inst.id) + ".ply";
        write_ply_points((fs::path(dir) / shape_file).string(), inst.canonical_shape,
                         PlyFormat::BinaryLittleEndian, {uint8_t(inst.class_id)});
        instances.push_back({{"id", inst.id},
                             {"class_id", inst.class_id},
                             {"class", palette.info(inst.class_id).name},
                             {"center", vec_json(inst.box.center)},
                             {"size", vec_json(inst.box.size)},
                             {"shape", shape_file}});
    }
    m["instances"] = instances;

    nlohmann::json checksums;
    for (const char* f : {"gt_labels.sisv", "gt_vis.sisv", "tsdf.sisv", "semantics.sisv", "depth.sisv",
                          "seg2d.sisv"})
        checksums[f] = file_crc32((fs::path(dir) / f).string());
    m["checksums"] = checksums;

    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw IoError((fs::path(dir) / "manifest.json").string(), 0, "cannot open for writing");
    out << m.dump(2) << "\n";
}

SceneBundle load_bundle(const std::string& dir, const ClassPalette& palette) {
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw IoError((fs::path(dir) / "manifest.json").string(), 0, "cannot open bundle manifest");
    nlohmann::json m = nlohmann::json::parse(in);
    if (m.value("format", "") != "ssc-bundle-v1")
        throw IoError((fs::path(dir) / "manifest.json").string(), 0, "unknown bundle format");

    SceneBundle bundle;
    SyntheticScene& scene = bundle.scene;
    scene.recipe.seed = m.at("seed").get<uint64_t>();
    const auto& r = m.at("recipe");
    scene.recipe.min_instances = r.at("min_instances");
    scene.recipe.max_instances = r.at("max_instances");
    scene.recipe.seg_noise_rate = r.at("seg_noise_rate");
    scene.recipe.depth_width = r.at("depth_width");
    scene.recipe.depth_height = r.at("depth_height");
    scene.recipe.focal = r.at("focal");
    scene.recipe.pitch_deg = r.at("pitch_deg");
    scene.recipe.truncation = r.at("truncation");

    const auto& g = m.at("grid");
    scene.recipe.grid.nx = g.at("dims").at(0);
    scene.recipe.grid.ny = g.at("dims").at(1);
    scene.recipe.grid.nz = g.at("dims").at(2);
    scene.recipe.grid.voxel_size = g.at("voxel_size");
    scene.recipe.grid.origin = vec_from_json(g.at("origin"));

    const auto& c = m.at("camera");
    scene.cam.fx = c.at("fx");
    scene.cam.fy = c.at("fy");
    scene.cam.cx = c.at("cx");
    scene.cam.cy = c.at("cy");
    scene.cam.rotation.m = c.at("rotation");
    scene.cam.translation = vec_from_json(c.at("translation"));

    int num_classes = m.at("num_classes");
    scene.gt = load_labels((fs::path(dir) / "gt_labels.sisv").string(), num_classes);
    GridSpec vis_spec;
    scene.gt.vis = load_visibility((fs::path(dir) / "gt_vis.sisv").string(), &vis_spec);
    if (!(vis_spec == scene.gt.spec))
        throw IoError((fs::path(dir) / "gt_vis.sisv").string(), 0, "mask spec differs from labels");

    for (const auto& ji : m.at("instances")) {
        GtInstance inst;
        inst.id = ji.at("id");
        inst.class_id = ji.at("class_id");
        inst.box.center = vec_from_json(ji.at("center"));
        inst.box.size = vec_from_json(ji.at("size"));
        inst.canonical_shape = read_ply_points((fs::path(dir) / ji.at("shape").get<std::string>()).string()).cloud;
        scene.instances.push_back(std::move(inst));
    }

    scene.depth = load_depth((fs::path(dir) / "depth.sisv").string());
    scene.seg2d = load_seg((fs::path(dir) / "seg2d.sisv").string());

    bundle.tsdf = load_tsdf((fs::path(dir) / "tsdf.sisv").string(), scene.recipe.truncation);
    bundle.semantics = load_semantic((fs::path(dir) / "semantics.sisv").string());
    if (palette.num_classes() != num_classes)
        throw IoError(dir, 0, "bundle class count differs from the configured palette");
    return bundle;
}

}  // namespace ssc
