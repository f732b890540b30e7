#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ssc/pointgrid.hpp"

using namespace ssc;

TEST_SUITE("pointgrid") {

TEST_CASE("canonicalize unit box is the identity") {
    PointCloud pts;
    pts.push_back({0.3f, -0.7f, 0.1f});
    Box3f box{{0, 0, 0}, {2, 2, 2}};
    auto res = canonicalize(pts, box);
    CHECK(res.dropped == 0);
    CHECK(res.points.points[0].x == doctest::Approx(0.3f));
    CHECK(res.points.points[0].y == doctest::Approx(-0.7f));
    CHECK(res.points.points[0].z == doctest::Approx(0.1f));
}

TEST_CASE("canonicalize maps the box center to the origin") {
    PointCloud pts;
    pts.push_back({2, 3, 4});
    Box3f box{{2, 3, 4}, {1, 1, 1}};
    auto res = canonicalize(pts, box);
    CHECK(res.points.points[0] == Vec3f{0, 0, 0});
}

TEST_CASE("canonicalize componentwise formula") {
    PointCloud pts;
    pts.push_back({3, 3, 4});
    Box3f box{{2, 3, 4}, {4, 2, 2}};  // half extents (2,1,1)
    auto res = canonicalize(pts, box);
    CHECK(res.points.points[0].x == doctest::Approx(0.5f));
    CHECK(res.points.points[0].y == doctest::Approx(0.0f));
    CHECK(res.points.points[0].z == doctest::Approx(0.0f));
}

TEST_CASE("canonicalize drops and counts out-of-box points") {
    PointCloud pts;
    pts.push_back({0, 0, 0});
    pts.push_back({5, 0, 0});
    auto res = canonicalize(pts, {{0, 0, 0}, {2, 2, 2}});
    CHECK(res.points.size() == 1);
    CHECK(res.dropped == 1);
}

TEST_CASE("canonicalize rejects degenerate boxes") {
    PointCloud pts;
    pts.push_back({0, 0, 0});
    CHECK_THROWS_AS(canonicalize(pts, {{0, 0, 0}, {1, 0, 1}}), std::invalid_argument);
}

TEST_CASE("decanonicalize inverts canonicalize on in-box points") {
    Rng rng(11);
    PointCloud pts;
    Box3f box{{1.5f, -0.3f, 2.0f}, {1.2f, 0.8f, 2.6f}};
    for (int i = 0; i < 500; ++i)
        pts.push_back(box.center + Vec3f{float(rng.uniform(-0.49, 0.49)) * box.size.x,
                                         float(rng.uniform(-0.49, 0.49)) * box.size.y,
                                         float(rng.uniform(-0.49, 0.49)) * box.size.z});
    auto res = canonicalize(pts, box);
    REQUIRE(res.dropped == 0);
    PointCloud back = decanonicalize(res.points, res.frame);
    for (size_t i = 0; i < pts.size(); ++i) CHECK(dist(back.points[i], pts.points[i]) < 1e-6f);
}

TEST_CASE("decanonicalize maps the origin to the frame center") {
    CanonicalFrame frame{{3, 3, 4}, {2, 1, 1}};
    PointCloud pts;
    pts.push_back({0, 0, 0});
    CHECK(decanonicalize(pts, frame).points[0] == Vec3f{3, 3, 4});
}

TEST_CASE("decanonicalize inverse formula") {
    CanonicalFrame frame{{2, 3, 4}, {2, 1, 1}};
    PointCloud pts;
    pts.push_back({0.5f, 0, 0});
    CHECK(decanonicalize(pts, frame).points[0] == Vec3f{3, 3, 4});
}

TEST_CASE("gridding: point on a cell center gets weight 1 there") {
    GridDims dims{4, 4, 4};
    PointCloud pts;
    Vec3f node{InstanceGrid::axis_center(1, 4), InstanceGrid::axis_center(2, 4),
               InstanceGrid::axis_center(3, 4)};
    pts.push_back(node);
    InstanceGrid grid = gridding(pts, dims);
    for (int k = 0; k < 4; ++k)
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 4; ++i) {
                float expect = (i == 1 && j == 2 && k == 3) ? 1.0f : 0.0f;
                CHECK(grid.values[dims.index(i, j, k)] == doctest::Approx(expect));
            }
}

TEST_CASE("gridding: point at a cell-block centroid splits 8 x 0.125") {
    GridDims dims{4, 4, 4};
    // centroid of the 8 nodes (1..2)^3: halfway between adjacent cell centers
    float mid01 = 0.5f * (InstanceGrid::axis_center(1, 4) + InstanceGrid::axis_center(2, 4));
    PointCloud pts;
    pts.push_back({mid01, mid01, mid01});
    InstanceGrid grid = gridding(pts, dims);
    int hit = 0;
    for (size_t c = 0; c < dims.count(); ++c) {
        if (grid.values[c] == 0.0f) continue;
        CHECK(grid.values[c] == doctest::Approx(0.125));
        ++hit;
    }
    CHECK(hit == 8);
}

TEST_CASE("gridding: empty cloud gives a zero grid") {
    InstanceGrid grid = gridding(PointCloud{}, {8, 8, 8});
    CHECK(grid.total_mass() == 0.0f);
}

TEST_CASE("gridding conserves mass for random canonical points") {
    Rng rng(5);
    PointCloud pts;
    for (int i = 0; i < 1000; ++i)
        pts.push_back({float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1))});
    InstanceGrid grid = gridding(pts, {32, 32, 32});
    CHECK(grid.total_mass() == doctest::Approx(1000.0).epsilon(1e-5));
}

TEST_CASE("trilinear weights of an interior point sum to 1") {
    // partition of unity, checked through the accumulated mass of one point
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        PointCloud pts;
        pts.push_back({float(rng.uniform(-0.9, 0.9)), float(rng.uniform(-0.9, 0.9)),
                       float(rng.uniform(-0.9, 0.9))});
        InstanceGrid grid = gridding(pts, {16, 16, 16});
        CHECK(grid.total_mass() == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("gridding is permutation invariant") {
    Rng rng(23);
    PointCloud a;
    for (int i = 0; i < 200; ++i)
        a.push_back({float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1))});
    PointCloud b = a;
    std::reverse(b.points.begin(), b.points.end());
    InstanceGrid ga = gridding(a, {8, 8, 8});
    InstanceGrid gb = gridding(b, {8, 8, 8});
    for (size_t c = 0; c < ga.dims.count(); ++c)
        CHECK(ga.values[c] == doctest::Approx(gb.values[c]).epsilon(1e-5));
}

TEST_CASE("gridding with class channels accumulates per-class mass") {
    PointCloud pts;
    pts.num_classes = 3;
    pts.push_back({0.1f, 0.2f, -0.3f});
    pts.class_conf = {0.2f, 0.5f, 0.3f};
    InstanceGrid grid = gridding(pts, {8, 8, 8}, 3);
    CHECK(grid.channels == 3);
    double per_class[3] = {0, 0, 0};
    for (size_t c = 0; c < grid.dims.count(); ++c)
        for (int ch = 0; ch < 3; ++ch) per_class[ch] += grid.values[c * 3 + ch];
    CHECK(per_class[0] == doctest::Approx(0.2));
    CHECK(per_class[1] == doctest::Approx(0.5));
    CHECK(per_class[2] == doctest::Approx(0.3));
}

TEST_CASE("regridding recovers a cell-center point exactly") {
    GridDims dims{8, 8, 8};
    PointCloud pts;
    Vec3f node{InstanceGrid::axis_center(2, 8), InstanceGrid::axis_center(5, 8),
               InstanceGrid::axis_center(1, 8)};
    pts.push_back(node);
    PointCloud back = regridding(gridding(pts, dims), 0.5f);
    REQUIRE(back.size() == 1);
    CHECK(dist(back.points[0], node) < 1e-6f);
}

TEST_CASE("regridding of an all-zero grid is empty") {
    InstanceGrid grid({8, 8, 8}, 1);
    CHECK(regridding(grid, 0.5f).empty());
}

TEST_CASE("regridding a uniform moment-free 2x2x2 grid emits the 8 cell centers") {
    InstanceGrid grid({2, 2, 2}, 1);
    std::fill(grid.values.begin(), grid.values.end(), 1.0f);
    PointCloud pts = regridding(grid, 0.5f);
    REQUIRE(pts.size() == 8);
    for (const Vec3f& p : pts.points) {
        CHECK(std::fabs(std::fabs(p.x) - 0.5f) < 1e-6f);
        CHECK(std::fabs(std::fabs(p.y) - 0.5f) < 1e-6f);
        CHECK(std::fabs(std::fabs(p.z) - 0.5f) < 1e-6f);
    }
}

TEST_CASE("voxelize_instance_to_scene maps and deduplicates") {
    GridSpec spec;
    spec.nx = spec.ny = spec.nz = 8;
    PointCloud pts;
    pts.push_back(spec.voxel_center(2, 3, 4));
    pts.push_back(spec.voxel_center(2, 3, 4) + Vec3f{0.01f, 0.0f, 0.0f});  // same voxel
    pts.push_back({-5, 0, 0});                                             // outside
    auto vox = voxelize_instance_to_scene(pts, 3, spec);
    CHECK(vox.voxels.size() == 1);
    CHECK(vox.voxels[0] == spec.index(2, 3, 4));
    CHECK(vox.dropped == 1);
    CHECK(vox.class_id == 3);
}

TEST_CASE("voxelize_instance_to_scene boundary uses the floor rule") {
    GridSpec spec;
    spec.nx = spec.ny = spec.nz = 8;
    PointCloud pts;
    pts.push_back({2 * spec.voxel_size, 0.01f, 0.01f});  // exactly on the x boundary of voxels 1|2
    auto vox = voxelize_instance_to_scene(pts, 1, spec);
    REQUIRE(vox.voxels.size() == 1);
    CHECK(spec.unindex(vox.voxels[0]).x == 2);
}

}  // TEST_SUITE
