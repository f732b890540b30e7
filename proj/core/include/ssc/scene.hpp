#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ssc/palette.hpp"
#include "ssc/volumes.hpp"

namespace ssc {

/// Scene completion contract: (TSDF, semantic volume) -> dense semantic
/// volume where every in-frustum voxel carries a distribution over
/// {empty, classes}. Completers are stateless values; the loop reuses the
/// same instance at every iteration (weight sharing).
class SceneCompleter {
public:
    virtual ~SceneCompleter() = default;
    virtual SemanticVolume complete(const TsdfVolume& tsdf, const SemanticVolume& sem) const = 0;
    virtual std::string fingerprint() const = 0;
};

/// Deterministic stand-in for a learned scene completer:
///  - visible-free voxels become empty,
///  - voxels with class evidence keep their (normalized) distribution,
///  - structural (shell) labels extend in-plane through the occluded region
///    by multi-source BFS: floor/ceiling spread horizontally at their own
///    height, walls within the vertical planes through the source voxel,
///  - instance labels dilate one step into the adjacent occluded truncation
///    band (object volume is the instance pathway's job),
///  - everything else in-frustum is decided empty.
/// Voxels the completer has decided (including explicit empties) are final,
/// so running it on its own output changes nothing.
class HeuristicSceneCompleter : public SceneCompleter {
public:
    explicit HeuristicSceneCompleter(ClassPalette palette = ClassPalette::indoor11())
        : palette_(std::move(palette)) {}
    SemanticVolume complete(const TsdfVolume& tsdf, const SemanticVolume& sem) const override;
    std::string fingerprint() const override { return "scene=heuristic"; }

private:
    ClassPalette palette_;
};

/// Returns the ground truth as one-hot distributions; testing only.
class OracleSceneCompleter : public SceneCompleter {
public:
    explicit OracleSceneCompleter(LabelVolume gt) : gt_(std::move(gt)) {}
    SemanticVolume complete(const TsdfVolume& tsdf, const SemanticVolume& sem) const override;
    std::string fingerprint() const override { return "scene=oracle"; }

private:
    LabelVolume gt_;
};

/// Identity up to densification: evidence voxels keep their distribution,
/// in-frustum voxels without evidence become empty.
class PassthroughSceneCompleter : public SceneCompleter {
public:
    SemanticVolume complete(const TsdfVolume& tsdf, const SemanticVolume& sem) const override;
    std::string fingerprint() const override { return "scene=passthrough"; }
};

/// Free-function form of the heuristic completer (spec mismatch throws).
SemanticVolume complete_scene_heuristic(const TsdfVolume& tsdf, const SemanticVolume& sem,
                                        const ClassPalette& palette = ClassPalette::indoor11());

/// Named completer factory: "heuristic", "oracle" (requires gt), "passthrough".
std::shared_ptr<const SceneCompleter> make_scene_completer(
    const std::string& name, const LabelVolume* gt = nullptr,
    const ClassPalette& palette = ClassPalette::indoor11());

/// Voxel rewrites from completed instances. Conflicting claims on a voxel
/// resolve toward the higher objectness (ties toward the lower instance id).
struct MergePatch {
    struct Entry {
        size_t voxel = 0;
        int class_id = 0;
        int instance_id = -1;
        float objectness = 0.0f;
    };
    std::vector<Entry> entries;
};

/// Writes one-hot instance labels into a copy of the volume; all other
/// voxels are untouched (bitwise).
SemanticVolume merge_instances(const SemanticVolume& sem, const MergePatch& patch);

/// Voxel-wise cross entropy over {empty, classes}, averaged over in-frustum
/// voxels of the ground-truth mask; 0 when everything is masked out.
double loss_scene(const SemanticVolume& pred, const LabelVolume& gt);

/// d loss / d pred.conf, same layout as pred.conf.
std::vector<double> loss_scene_grad(const SemanticVolume& pred, const LabelVolume& gt);

}  // namespace ssc
