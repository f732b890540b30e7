#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "ssc/proposals.hpp"

using namespace ssc;

namespace {

/// Scene with `centers.size()` solid boxes of one class stamped into labels
/// and one-hot semantics.
struct ToyScene {
    GridSpec spec;
    SemanticVolume sem;
    LabelVolume labels;
    std::vector<GtInstance> instances;
};

ToyScene make_toy_scene(const std::vector<Vec3f>& centers, int class_id, float box_size = 0.5f) {
    ToyScene s;
    s.spec.nx = s.spec.ny = s.spec.nz = 24;
    s.spec.voxel_size = 0.08f;
    s.sem = SemanticVolume(s.spec, 11);
    s.labels = LabelVolume(s.spec, 11);
    std::fill(s.labels.vis.begin(), s.labels.vis.end(), Visibility::Occluded);

    for (size_t n = 0; n < centers.size(); ++n) {
        GtInstance inst;
        inst.id = int(n);
        inst.class_id = class_id;
        inst.box = {centers[n], {box_size, box_size, box_size}};
        Vec3f lo = inst.box.min(), hi = inst.box.max();
        for (int z = 0; z < s.spec.nz; ++z)
            for (int y = 0; y < s.spec.ny; ++y)
                for (int x = 0; x < s.spec.nx; ++x) {
                    Vec3f c = s.spec.voxel_center(x, y, z);
                    if (c.x < lo.x || c.x > hi.x || c.y < lo.y || c.y > hi.y || c.z < lo.z || c.z > hi.z)
                        continue;
                    size_t i = s.spec.index(x, y, z);
                    s.labels.labels[i] = uint8_t(class_id);
                    s.sem.set_one_hot(i, class_id);
                    inst.voxels.push_back(i);
                }
        s.instances.push_back(std::move(inst));
    }
    return s;
}

}  // namespace

TEST_SUITE("proposals") {

TEST_CASE("sample_scene_points covers every occupied voxel when M equals the count") {
    ToyScene s = make_toy_scene({{0.96f, 0.96f, 0.96f}}, 5);
    size_t occupied = s.instances[0].voxels.size();
    Rng rng(1);
    ScenePointSample sample =
        sample_scene_points(s.sem, s.labels, ClassPalette::indoor11(), int(occupied), rng);
    std::set<size_t> seen(sample.voxel_index.begin(), sample.voxel_index.end());
    CHECK(seen.size() == occupied);
}

TEST_CASE("sample_scene_points fails on an empty scene") {
    ToyScene s = make_toy_scene({}, 5);
    Rng rng(1);
    CHECK_THROWS_AS(sample_scene_points(s.sem, s.labels, ClassPalette::indoor11(), 16, rng),
                    std::runtime_error);
}

TEST_CASE("sample_scene_points height channel is the voxel base height") {
    ToyScene s = make_toy_scene({{0.96f, 0.96f, 0.96f}}, 5);
    Rng rng(2);
    ScenePointSample sample = sample_scene_points(s.sem, s.labels, ClassPalette::indoor11(), 32, rng);
    for (size_t i = 0; i < sample.cloud.size(); ++i) {
        int j = s.spec.unindex(sample.voxel_index[i]).y;
        CHECK(sample.cloud.height[i] == doctest::Approx(j * s.spec.voxel_size));
    }
}

TEST_CASE("sample_scene_points never samples shell classes") {
    ToyScene s = make_toy_scene({{0.96f, 0.96f, 0.96f}}, 5);
    // add a wall region
    for (int y = 0; y < s.spec.ny; ++y)
        for (int x = 0; x < s.spec.nx; ++x) {
            size_t i = s.spec.index(x, y, s.spec.nz - 1);
            s.labels.labels[i] = 3;
            s.sem.set_one_hot(i, 3);
        }
    Rng rng(3);
    ScenePointSample sample = sample_scene_points(s.sem, s.labels, ClassPalette::indoor11(), 64, rng);
    for (size_t vi : sample.voxel_index) CHECK(s.labels.labels[vi] == 5);
}

TEST_CASE("compute_gt_offsets definition and background masking") {
    ToyScene s = make_toy_scene({{0.96f, 0.96f, 0.96f}}, 5);
    ScenePointSample sample;
    sample.cloud.num_classes = 11;
    sample.cloud.push_back(s.instances[0].box.center);             // at the center
    sample.cloud.push_back(s.instances[0].box.center + Vec3f{0.1f, 0, 0});
    sample.cloud.push_back({10, 10, 10});                          // background
    sample.voxel_index = {0, 0, 0};

    VoteSet votes = compute_gt_offsets(sample, s.instances);
    CHECK(votes.foreground[0] == 1);
    CHECK(votes.target[0] == Vec3f{0, 0, 0});
    CHECK(votes.target[1].x == doctest::Approx(-0.1f));
    CHECK(votes.foreground[2] == 0);
}

TEST_CASE("estimate_votes points at the component centroid") {
    ToyScene s = make_toy_scene({{0.96f, 0.96f, 0.96f}}, 5);
    Rng rng(4);
    ScenePointSample sample = sample_scene_points(s.sem, s.labels, ClassPalette::indoor11(), 64, rng);
    VoteSet votes = estimate_votes(sample, s.labels, ClassPalette::indoor11());

    // centroid oracle: mean of the instance's voxel centers
    Vec3f centroid{};
    for (size_t v : s.instances[0].voxels) centroid += s.spec.voxel_center(s.spec.unindex(v));
    centroid = centroid / float(s.instances[0].voxels.size());

    for (size_t i = 0; i < sample.cloud.size(); ++i) {
        REQUIRE(votes.foreground[i] == 1);
        Vec3f shifted = sample.cloud.points[i] + votes.predicted[i];
        CHECK(dist(shifted, centroid) < 1e-4f);
    }
}

TEST_CASE("estimate_votes masks tiny components") {
    ToyScene s = make_toy_scene({}, 5);
    // a single isolated voxel: below the min component size
    size_t lone = s.spec.index(4, 4, 4);
    s.labels.labels[lone] = 5;
    s.sem.set_one_hot(lone, 5);
    ScenePointSample sample;
    sample.cloud.num_classes = 11;
    sample.cloud.push_back(s.spec.voxel_center(4, 4, 4));
    sample.voxel_index = {lone};
    VoteSet votes = estimate_votes(sample, s.labels, ClassPalette::indoor11(), 4);
    CHECK(votes.foreground[0] == 0);
}

TEST_CASE("cluster_votes separates well-spaced instances") {
    ToyScene s = make_toy_scene({{0.6f, 0.6f, 0.6f}, {1.5f, 0.6f, 1.5f}}, 5, 0.4f);
    Rng rng(5);
    ScenePointSample sample = sample_scene_points(s.sem, s.labels, ClassPalette::indoor11(), 128, rng);
    VoteSet votes = compute_gt_offsets(sample, s.instances);
    // use gt offsets as perfect votes
    votes.predicted = votes.target;
    auto clusters = cluster_votes(sample, votes, 0.3f);
    REQUIRE(clusters.size() == 2);

    // brute-force pairwise check: instances are more than 2 radii apart
    CHECK(dist(s.instances[0].box.center, s.instances[1].box.center) > 0.6f);
}

TEST_CASE("cluster_votes single instance with perfect votes gives one cluster") {
    ToyScene s = make_toy_scene({{0.96f, 0.96f, 0.96f}}, 5);
    Rng rng(6);
    ScenePointSample sample = sample_scene_points(s.sem, s.labels, ClassPalette::indoor11(), 64, rng);
    VoteSet votes = compute_gt_offsets(sample, s.instances);
    votes.predicted = votes.target;
    auto clusters = cluster_votes(sample, votes, 0.3f);
    CHECK(clusters.size() == 1);
}

TEST_CASE("cluster_votes with no foreground gives no clusters") {
    ScenePointSample sample;
    sample.cloud.num_classes = 11;
    sample.cloud.push_back({0, 0, 0});
    sample.voxel_index = {0};
    VoteSet votes;
    votes.predicted.assign(1, {});
    votes.target.assign(1, {});
    votes.foreground.assign(1, 0);
    CHECK(cluster_votes(sample, votes, 0.3f).empty());
}

TEST_CASE("fit_proposals center is the mean of identical votes") {
    ToyScene s = make_toy_scene({{0.96f, 0.96f, 0.96f}}, 5);
    Rng rng(7);
    ScenePointSample sample = sample_scene_points(s.sem, s.labels, ClassPalette::indoor11(), 64, rng);
    VoteSet votes = compute_gt_offsets(sample, s.instances);
    votes.predicted = votes.target;  // all shifted points == gt center
    auto clusters = cluster_votes(sample, votes, 0.3f);
    auto props = fit_proposals(sample, votes, clusters, ClassPalette::indoor11(), std::nullopt);
    REQUIRE(props.size() == 1);
    CHECK(dist(props[0].center, s.instances[0].box.center) < 1e-4f);
    CHECK(props[0].argmax_class() == 5);
    CHECK(props[0].objectness == doctest::Approx(1.0f));
}

TEST_CASE("fit_proposals residual reassembles the size") {
    ToyScene s = make_toy_scene({{0.96f, 0.96f, 0.96f}}, 5);
    Rng rng(8);
    ScenePointSample sample = sample_scene_points(s.sem, s.labels, ClassPalette::indoor11(), 64, rng);
    VoteSet votes = compute_gt_offsets(sample, s.instances);
    votes.predicted = votes.target;
    auto clusters = cluster_votes(sample, votes, 0.3f);
    auto props = fit_proposals(sample, votes, clusters, ClassPalette::indoor11(), std::nullopt);
    REQUIRE(props.size() == 1);
    const Vec3f tmpl = ClassPalette::indoor11().info(props[0].size_class).template_size;
    CHECK(props[0].size.x == doctest::Approx(tmpl.x + props[0].size_residual.x));
    CHECK(props[0].size.y == doctest::Approx(tmpl.y + props[0].size_residual.y));
    CHECK(props[0].size.z == doctest::Approx(tmpl.z + props[0].size_residual.z));
}

TEST_CASE("assign_proposals distance thresholds") {
    SelectionConfig cfg;
    std::vector<Box3f> gt{{{0, 0, 0}, {1, 1, 1}}};
    auto proposal_at = [](float d) {
        Proposal p;
        p.center = {d, 0, 0};
        p.size = {1, 1, 1};
        p.class_conf.assign(11, 0.0f);
        return p;
    };
    std::vector<Proposal> props{proposal_at(0.0f), proposal_at(0.29f), proposal_at(0.31f),
                                proposal_at(0.45f), proposal_at(0.59f), proposal_at(0.61f),
                                proposal_at(1.0f)};
    auto a = assign_proposals(props, gt, cfg);
    CHECK(a[0] == Assignment::Positive);
    CHECK(a[1] == Assignment::Positive);
    CHECK(a[2] == Assignment::Ignored);
    CHECK(a[3] == Assignment::Ignored);
    CHECK(a[4] == Assignment::Ignored);
    CHECK(a[5] == Assignment::Negative);
    CHECK(a[6] == Assignment::Negative);
}

TEST_CASE("assign_proposals is translation consistent") {
    SelectionConfig cfg;
    Rng rng(9);
    std::vector<Proposal> props;
    std::vector<Box3f> gt;
    for (int i = 0; i < 20; ++i) {
        Proposal p;
        p.center = {float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2))};
        p.size = {1, 1, 1};
        props.push_back(p);
    }
    for (int i = 0; i < 5; ++i)
        gt.push_back({{float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2))},
                      {1, 1, 1}});

    auto base = assign_proposals(props, gt, cfg);
    Vec3f t{10.5f, -3.25f, 7.0f};
    for (auto& p : props) p.center += t;
    for (auto& g : gt) g.center += t;
    auto shifted = assign_proposals(props, gt, cfg);
    CHECK(base == shifted);
}

TEST_CASE("nms3d keeps a lone proposal and suppresses duplicates") {
    auto make = [](Vec3f c, float obj) {
        Proposal p;
        p.center = c;
        p.size = {1, 1, 1};
        p.objectness = obj;
        return p;
    };
    CHECK(nms3d({make({0, 0, 0}, 0.5f)}, 0.25f).size() == 1);

    auto kept = nms3d({make({0, 0, 0}, 0.9f), make({0, 0, 0}, 0.8f)}, 0.25f);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].objectness == doctest::Approx(0.9f));

    auto both = nms3d({make({0, 0, 0}, 0.9f), make({5, 0, 0}, 0.8f)}, 0.25f);
    CHECK(both.size() == 2);
}

TEST_CASE("nms3d survivors form an antichain under the IoU threshold") {
    Rng rng(10);
    std::vector<Proposal> props;
    for (int i = 0; i < 40; ++i) {
        Proposal p;
        p.center = {float(rng.uniform(0, 3)), float(rng.uniform(0, 3)), float(rng.uniform(0, 3))};
        p.size = {float(rng.uniform(0.5, 1.5)), float(rng.uniform(0.5, 1.5)), float(rng.uniform(0.5, 1.5))};
        p.objectness = float(rng.uniform(0, 1));
        props.push_back(p);
    }
    auto kept = nms3d(props, 0.25f);
    for (size_t i = 0; i < kept.size(); ++i)
        for (size_t j = i + 1; j < kept.size(); ++j)
            CHECK(box_iou(kept[i].box(), kept[j].box()) <= 0.25);
}

TEST_CASE("select_training_proposals filters and truncates") {
    SelectionConfig cfg;  // sigma 0.3, beta 0.5, K 16
    cfg.max_proposals = 2;
    std::vector<Box3f> gt{{{0, 0, 0}, {1, 1, 1}}};
    auto make = [](float d, float obj) {
        Proposal p;
        p.center = {d, 0, 0};
        p.size = {1, 1, 1};
        p.objectness = obj;
        return p;
    };
    std::vector<Proposal> props{make(0.2f, 0.9f), make(0.1f, 0.7f), make(0.25f, 0.8f),
                                make(0.2f, 0.4f),   // objectness below beta
                                make(0.5f, 0.95f)}; // distance above sigma
    auto sel = select_training_proposals(props, gt, cfg);
    REQUIRE(sel.size() == 2);  // K highest-objectness qualifying
    CHECK(sel[0].objectness == doctest::Approx(0.9f));
    CHECK(sel[1].objectness == doctest::Approx(0.8f));
}

// ---- losses ----

TEST_CASE("loss_loc_reg examples") {
    VoteSet v;
    v.predicted = {{0, 0, 0}};
    v.target = {{0, 0, 0}};
    v.foreground = {1};
    CHECK(loss_loc_reg(v) == 0.0);

    v.predicted = {{1, 0, 0}};
    CHECK(loss_loc_reg(v) == doctest::Approx(1.0));

    v.predicted = {{1, 0, 0}, {0, 3, 0}};
    v.target = {{0, 0, 0}, {0, 0, 0}};
    v.foreground = {1, 1};
    CHECK(loss_loc_reg(v) == doctest::Approx(2.0));
}

TEST_CASE("loss_loc_reg ignores background and empty foreground is zero") {
    VoteSet v;
    v.predicted = {{5, 5, 5}};
    v.target = {{0, 0, 0}};
    v.foreground = {0};
    CHECK(loss_loc_reg(v) == 0.0);
}

TEST_CASE("loss_loc_reg is nonnegative and zero only at exact votes") {
    Rng rng(12);
    VoteSet v;
    for (int i = 0; i < 30; ++i) {
        Vec3f t{float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1))};
        v.target.push_back(t);
        v.predicted.push_back(t);
        v.foreground.push_back(1);
    }
    CHECK(loss_loc_reg(v) == 0.0);
    v.predicted[7].x += 0.25f;
    CHECK(loss_loc_reg(v) > 0.0);
}

TEST_CASE("loss_box smooth-L1 example") {
    BoxPrediction p;
    p.center = {0.5f, 0.5f, 0.5f};
    p.size_class_probs = {1.0};
    p.size_residual = {0, 0, 0};
    BoxTarget t;
    t.center = {0, 0, 0};
    t.size_class = 0;
    t.size_residual = {0, 0, 0};
    // one-hot correct size class: only the center term remains
    CHECK(loss_box({&p, 1}, {&t, 1}, 0.1) == doctest::Approx(0.375));
}

TEST_CASE("loss_box exact prediction with one-hot class is zero") {
    BoxPrediction p;
    p.center = {1, 2, 3};
    p.size_class_probs = {0.0, 1.0, 0.0};
    p.size_residual = {0.1f, 0.2f, 0.3f};
    BoxTarget t;
    t.center = {1, 2, 3};
    t.size_class = 1;
    t.size_residual = {0.1f, 0.2f, 0.3f};
    CHECK(loss_box({&p, 1}, {&t, 1}, 0.1) == doctest::Approx(0.0));
}

TEST_CASE("loss_det weighted combination") {
    LossWeights w;  // 0.1, 0.5, 0.1
    CHECK(loss_det({0, 0, 0, 0}, w) == 0.0);
    CHECK(loss_det({1, 1, 1, 1}, w) == doctest::Approx(2.6));
}

TEST_CASE("ignored proposals contribute to no loss term") {
    std::vector<double> probs{0.9, 0.5, 0.2};
    std::vector<Assignment> assign{Assignment::Positive, Assignment::Ignored, Assignment::Negative};
    double with_band = loss_objectness(probs, assign);
    // changing the ignored proposal's probability must not change the loss
    std::vector<double> probs2{0.9, 0.01, 0.2};
    CHECK(loss_objectness(probs2, assign) == doctest::Approx(with_band));

    std::vector<std::vector<double>> cls{{0.8, 0.2}, {0.1, 0.9}, {0.5, 0.5}};
    std::vector<int> gt_cls{0, 1, 0};
    double sem = loss_semantic_cls(cls, gt_cls, assign);
    CHECK(sem == doctest::Approx(-std::log(0.8)));
}

TEST_CASE("loss gradients match central finite differences") {
    Rng rng(13);
    const double h = 1e-4;

    // loc-reg, away from the zero-error kink
    for (int trial = 0; trial < 20; ++trial) {
        VoteSet v;
        for (int i = 0; i < 6; ++i) {
            v.target.push_back({float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)),
                                float(rng.uniform(-1, 1))});
            Vec3f err{float(rng.uniform(0.2, 1.0)), float(rng.uniform(0.2, 1.0)),
                      float(rng.uniform(0.2, 1.0))};
            v.predicted.push_back(v.target.back() + err);
            v.foreground.push_back(i % 3 != 0);
        }
        auto grad = loss_loc_reg_grad(v);
        for (size_t i = 0; i < v.predicted.size(); ++i) {
            for (int a = 0; a < 3; ++a) {
                VoteSet vp = v, vm = v;
                vp.predicted[i][a] += float(h);
                vm.predicted[i][a] -= float(h);
                double step = double(vp.predicted[i][a]) - double(vm.predicted[i][a]);
                double fd = (loss_loc_reg(vp) - loss_loc_reg(vm)) / step;
                double an = grad[i][a];
                CHECK(std::fabs(an - fd) <= 1e-3 * std::max({std::fabs(an), std::fabs(fd), 1e-6}));
            }
        }
    }

    // box loss, away from the smooth-L1 kinks and with positive probs
    for (int trial = 0; trial < 10; ++trial) {
        BoxPrediction p;
        p.center = {float(rng.uniform(0.1, 0.8)), float(rng.uniform(0.1, 0.8)), float(rng.uniform(0.1, 0.8))};
        p.size_class_probs = {rng.uniform(0.2, 0.6), rng.uniform(0.2, 0.6)};
        p.size_residual = {float(rng.uniform(0.1, 0.8)), float(rng.uniform(0.1, 0.8)),
                           float(rng.uniform(0.1, 0.8))};
        BoxTarget t;
        t.center = {0, 0, 0};
        t.size_class = int(rng.uniform_u32(2));
        t.size_residual = {0, 0, 0};

        auto grads = loss_box_grad({&p, 1}, {&t, 1}, 0.1);
        for (int a = 0; a < 3; ++a) {
            BoxPrediction pp = p, pm = p;
            pp.center[a] += float(h);
            pm.center[a] -= float(h);
            double step = double(pp.center[a]) - double(pm.center[a]);
            double fd = (loss_box({&pp, 1}, {&t, 1}, 0.1) - loss_box({&pm, 1}, {&t, 1}, 0.1)) / step;
            CHECK(std::fabs(grads[0].d_center[a] - fd) <= 1e-3 * std::max(std::fabs(fd), 1e-6));
        }
        BoxPrediction pp = p, pm = p;
        pp.size_class_probs[size_t(t.size_class)] += h;
        pm.size_class_probs[size_t(t.size_class)] -= h;
        double fd = (loss_box({&pp, 1}, {&t, 1}, 0.1) - loss_box({&pm, 1}, {&t, 1}, 0.1)) / (2 * h);
        CHECK(std::fabs(grads[0].d_size_class_probs[size_t(t.size_class)] - fd) <=
              1e-3 * std::max(std::fabs(fd), 1e-6));
    }
}

}  // TEST_SUITE
