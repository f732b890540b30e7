#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "ssc/metrics.hpp"
#include "ssc/synth.hpp"

using namespace ssc;
namespace fs = std::filesystem;

namespace {

SyntheticScene make_scene(uint64_t seed, int min_inst = 3, int max_inst = 5) {
    SceneRecipe recipe;
    recipe.seed = seed;
    recipe.min_instances = min_inst;
    recipe.max_instances = max_inst;
    const ClassPalette& pal = ClassPalette::indoor11();
    return generate(recipe, pal, ShapeLibrary::builtin(pal));
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("generate is deterministic per seed") {
    SyntheticScene a = make_scene(42);
    SyntheticScene b = make_scene(42);
    CHECK(a.gt.labels == b.gt.labels);
    CHECK(a.depth.depth == b.depth.depth);
    CHECK(a.seg2d.conf == b.seg2d.conf);
    CHECK(a.instances.size() == b.instances.size());

    SyntheticScene c = make_scene(43);
    CHECK(a.gt.labels != c.gt.labels);
}

TEST_CASE("zero instances leaves only the shell") {
    SyntheticScene s = make_scene(7, 0, 0);
    CHECK(s.instances.empty());
    for (uint8_t l : s.gt.labels) CHECK(l <= 3);  // empty or shell classes
}

TEST_CASE("depth equals the first-hit distance of an independent ray march") {
    SyntheticScene s = make_scene(11);
    int checked = 0;
    for (int v = 5; v < s.depth.height && checked < 40; v += 7)
        for (int u = 3; u < s.depth.width && checked < 40; u += 11) {
            float oracle = ray_march_depth_oracle(s, u, v, 0.002f);
            if (!s.depth.is_valid(u, v)) continue;
            REQUIRE(oracle > 0.0f);
            // fixed-step oracle overshoots by at most one step inside the voxel
            CHECK(std::fabs(s.depth.at(u, v) - oracle) < 0.02f);
            ++checked;
        }
    CHECK(checked >= 20);
}

TEST_CASE("instances never overlap the shell or each other") {
    SyntheticScene s = make_scene(13, 5, 8);
    std::vector<int> owner(s.gt.spec.count(), -1);
    for (const GtInstance& inst : s.instances)
        for (size_t v : inst.voxels) {
            CHECK(owner[v] == -1);
            owner[v] = inst.id;
            CHECK(s.gt.labels[v] == inst.class_id);
        }
}

TEST_CASE("gt voxels of an instance carry its class") {
    SyntheticScene s = make_scene(17);
    for (const GtInstance& inst : s.instances)
        for (size_t v : inst.voxels) CHECK(int(s.gt.labels[v]) == inst.class_id);
}

TEST_CASE("oracle consistency: eval_ssc(gt, gt) is 1") {
    for (uint64_t seed : {1u, 2u, 3u}) {
        SyntheticScene s = make_scene(seed);
        CHECK(eval_ssc(s.gt, s.gt).mean_iou == 1.0);
        CHECK(eval_sc(s.gt, s.gt).iou == 1.0);
    }
}

TEST_CASE("occlude output matches the recipe grid and occludes something") {
    SyntheticScene s = make_scene(19);
    auto [tsdf, sem] = occlude(s);
    CHECK(tsdf.spec == s.recipe.grid);
    CHECK(sem.spec == s.recipe.grid);

    size_t occluded = 0;
    for (Visibility v : tsdf.vis) occluded += v == Visibility::Occluded;
    CHECK(occluded > 0);
}

TEST_CASE("visibility soundness: no visible-free voxel sits behind a surface") {
    SyntheticScene s = make_scene(23);
    auto [tsdf, sem] = occlude(s);
    const GridSpec& spec = s.recipe.grid;
    // independent check against the rendered depth map
    int checked = 0;
    for (size_t i = 0; i < spec.count(); i += 97) {
        if (tsdf.vis[i] != Visibility::VisibleFree) continue;
        Vec3f pc = s.cam.world_to_cam(spec.voxel_center(spec.unindex(i)));
        REQUIRE(pc.z > 0.0f);
        float u, v;
        s.cam.project(pc, u, v);
        int ui = int(std::lround(u)), vi = int(std::lround(v));
        REQUIRE(s.depth.in_bounds(ui, vi));
        REQUIRE(s.depth.is_valid(ui, vi));
        CHECK(pc.z <= s.depth.at(ui, vi) + 0.5f * spec.voxel_size);
        ++checked;
    }
    CHECK(checked > 50);
}

TEST_CASE("gt mask equals the pipeline's TSDF visibility") {
    SyntheticScene s = make_scene(29);
    auto [tsdf, sem] = occlude(s);
    CHECK(s.gt.vis == tsdf.vis);
}

TEST_CASE("placement error surfaces as PlacementError") {
    SceneRecipe recipe;
    recipe.seed = 5;
    recipe.min_instances = 500;  // cannot fit
    recipe.max_instances = 500;
    recipe.placement_retries = 3;
    const ClassPalette& pal = ClassPalette::indoor11();
    CHECK_THROWS_AS(generate(recipe, pal, ShapeLibrary::builtin(pal)), PlacementError);
}

TEST_CASE("seg noise confuses labels at roughly the configured rate") {
    SceneRecipe recipe;
    recipe.seed = 31;
    recipe.min_instances = 4;
    recipe.max_instances = 6;
    recipe.seg_noise_rate = 0.3f;
    const ClassPalette& pal = ClassPalette::indoor11();
    SyntheticScene noisy = generate(recipe, pal, ShapeLibrary::builtin(pal));
    recipe.seg_noise_rate = 0.0f;
    SyntheticScene clean = generate(recipe, pal, ShapeLibrary::builtin(pal));

    size_t diff = 0, valid = 0;
    for (int v = 0; v < clean.depth.height; ++v)
        for (int u = 0; u < clean.depth.width; ++u) {
            if (!clean.depth.is_valid(u, v)) continue;
            ++valid;
            for (int c = 0; c < 11; ++c)
                if (clean.seg2d.at(u, v)[c] != noisy.seg2d.at(u, v)[c]) {
                    ++diff;
                    break;
                }
        }
    double rate = double(diff) / double(valid);
    CHECK(rate > 0.2);
    CHECK(rate < 0.4);
}

TEST_CASE("bundle save/load round trip") {
    SyntheticScene s = make_scene(37);
    auto [tsdf, sem] = occlude(s);
    SceneBundle bundle{s, tsdf, sem};

    std::string dir = (fs::temp_directory_path() / "ssc_test_bundle").string();
    fs::remove_all(dir);
    const ClassPalette& pal = ClassPalette::indoor11();
    save_bundle(dir, bundle, pal);
    SceneBundle back = load_bundle(dir, pal);

    CHECK(back.scene.gt.labels == s.gt.labels);
    CHECK(back.scene.gt.vis == s.gt.vis);
    CHECK(back.tsdf.distance == tsdf.distance);
    CHECK(back.semantics.conf == sem.conf);
    CHECK(back.scene.instances.size() == s.instances.size());
    for (size_t i = 0; i < s.instances.size(); ++i) {
        CHECK(back.scene.instances[i].class_id == s.instances[i].class_id);
        CHECK(dist(back.scene.instances[i].box.center, s.instances[i].box.center) < 1e-6f);
        CHECK(back.scene.instances[i].canonical_shape.size() == s.instances[i].canonical_shape.size());
    }
    CHECK(back.scene.depth.depth == s.depth.depth);
    fs::remove_all(dir);
}

}  // TEST_SUITE
