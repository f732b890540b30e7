#pragma once

#include <memory>
#include <span>

#include "ssc/instances.hpp"
#include "ssc/proposals.hpp"

namespace ssc {

/// Testing-only instance completer: returns the ground-truth shape of the
/// instance whose center is nearest to the proposal frame, re-expressed in
/// the proposal's canonical frame (so the world placement is exact even when
/// the proposal box is slightly off). Falls back to the partial points when
/// nothing of the gt shape lands inside the frame.
class OracleInstanceCompleter : public InstanceCompleter {
public:
    explicit OracleInstanceCompleter(std::vector<GtInstance> instances)
        : instances_(std::move(instances)) {}

    CompletedInstance complete(const PointCloud& partial, std::span<const float> class_conf,
                               const CanonicalFrame& frame) const override;
    std::string fingerprint() const override { return "instance=oracle"; }

private:
    std::vector<GtInstance> instances_;
};

/// Named factory: "shape_prior", "passthrough", "oracle" (requires gt).
std::shared_ptr<const InstanceCompleter> make_instance_completer(
    const std::string& name, std::shared_ptr<const ShapeLibrary> library,
    std::span<const GtInstance> gt_instances = {}, size_t match_points = 1024, size_t output_points = 0,
    uint64_t seed = 0);

}  // namespace ssc
