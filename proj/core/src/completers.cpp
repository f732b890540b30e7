#include "ssc/completers.hpp"

#include <cmath>

#include "ssc/pointgrid.hpp"

namespace ssc {

CompletedInstance OracleInstanceCompleter::complete(const PointCloud& partial,
                                                    std::span<const float> class_conf,
                                                    const CanonicalFrame& frame) const {
    if (partial.empty()) throw std::invalid_argument("oracle completer: empty partial cloud");
    if (instances_.empty()) return PassthroughInstanceCompleter().complete(partial, class_conf, frame);

    const GtInstance* best = nullptr;
    float best_d = std::numeric_limits<float>::max();
    for (const GtInstance& inst : instances_) {
        float d = dist_sq(inst.box.center, frame.center);
        if (d < best_d) {
            best_d = d;
            best = &inst;
        }
    }

    CanonicalFrame gt_frame{best->box.center, best->box.size * 0.5f};
    PointCloud world = decanonicalize(best->canonical_shape, gt_frame);

    CompletedInstance out;
    out.frame = frame;
    out.class_id = best->class_id;
    const float lim = 1.0f + 1e-6f;
    for (const Vec3f& p : world.points) {
        Vec3f q = frame.to_canonical(p);
        if (std::fabs(q.x) > lim || std::fabs(q.y) > lim || std::fabs(q.z) > lim) continue;
        out.points.push_back(q);
    }
    if (out.points.empty()) return PassthroughInstanceCompleter().complete(partial, class_conf, frame);
    return out;
}

std::shared_ptr<const InstanceCompleter> make_instance_completer(
    const std::string& name, std::shared_ptr<const ShapeLibrary> library,
    std::span<const GtInstance> gt_instances, size_t match_points, size_t output_points, uint64_t seed) {
    if (name == "passthrough") return std::make_shared<PassthroughInstanceCompleter>();
    if (name == "shape_prior") {
        if (!library) throw std::invalid_argument("shape_prior completer needs a shape library");
        return std::make_shared<ShapePriorCompleter>(std::move(library), match_points, output_points, seed);
    }
    if (name == "oracle") {
        if (gt_instances.empty())
            throw std::invalid_argument("oracle instance completer needs ground-truth instances");
        return std::make_shared<OracleInstanceCompleter>(
            std::vector<GtInstance>(gt_instances.begin(), gt_instances.end()));
    }
    throw std::invalid_argument("unknown instance completer: " + name);
}

}  // namespace ssc
