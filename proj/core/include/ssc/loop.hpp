#pragma once

#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ssc/instances.hpp"
#include "ssc/proposals.hpp"
#include "ssc/scene.hpp"

namespace ssc {

struct LoopConfig {
    int iterations = 2;               // N
    std::string scene_completer = "heuristic";
    std::string instance_completer = "shape_prior";
    SelectionConfig selection;
    GridDims instance_grid_dims;      // 32^3
    int sample_points = 1024;         // M
    int pool_points = 1024;           // N_P per proposal
    float cluster_radius = 0.3f;
    int min_component = 4;
    float min_objectness = 0.25f;     // inference-time proposal floor
    bool refine_placement = true;     // register completed shapes to the observed partial
    bool low_memory = false;          // retain only the last stage's volumes
    float early_stop_fraction = 0.001f;  // label-diff fraction; 0 disables
    float occ_threshold = 0.0f;       // argmax demotion threshold
    uint64_t seed = 0;

    void validate() const {
        if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
        selection.validate();
    }
};

/// Completer values shared across all iterations of a trace (weight sharing).
struct LoopDependencies {
    std::shared_ptr<const SceneCompleter> scene;
    std::shared_ptr<const InstanceCompleter> instance;
    const ClassPalette* palette = nullptr;
    std::optional<Vec3f> camera_origin;  // enables the front-face center refinement
};

/// One stage of the trace. Stage 0 holds only the initial completion; stages
/// i >= 1 add the proposals, completed instances, and merged input that
/// produced them.
struct LoopStage {
    int iteration = 0;
    SemanticVolume merged_input;            // V_S input at this stage
    SemanticVolume completed;               // completer output
    std::vector<Proposal> proposals;        // post-NMS proposals that fed this stage
    std::vector<CompletedInstance> instances;
    MergePatch patch;
    std::string completer_fingerprint;
};

struct LoopTrace {
    std::shared_ptr<const TsdfVolume> tsdf;  // fixed across the whole trace
    std::vector<LoopStage> stages;           // stages[0] = S0, stages[i] = S_i
    bool early_stopped = false;
    int requested_iterations = 0;
    std::string config_fingerprint;
};

/// True when the stage still holds its volumes (low-memory traces release
/// all but the last stage's).
inline bool stage_has_volumes(const LoopStage& stage) { return !stage.completed.conf.empty(); }

/// Aborted loop carrying whatever stages completed.
struct LoopError : std::runtime_error {
    LoopError(std::string what, LoopTrace partial_)
        : std::runtime_error(std::move(what)), partial(std::move(partial_)) {}
    LoopTrace partial;
};

std::string loop_fingerprint(const LoopConfig& cfg, const LoopDependencies& deps);

/// Runs S0 then `iterations` rounds of proposals -> instance completion ->
/// merge -> scene completion, reusing the same completer values each round.
LoopTrace run_loop(std::shared_ptr<const TsdfVolume> tsdf, const SemanticVolume& sem_input,
                   const LoopConfig& cfg, const LoopDependencies& deps);

/// Proposal generation as used inside the loop, exposed so detection can be
/// evaluated against any semantic volume (e.g. raw input vs completed).
/// `vote_anchors` (voxel -> instance center) lets a later iteration vote
/// toward the previous iteration's instances, keeping adjacent objects
/// separate after their completed shapes have been merged into the scene.
std::vector<Proposal> generate_proposals(
    const SemanticVolume& sem, const TsdfVolume& tsdf, const LoopConfig& cfg,
    const ClassPalette& palette, const std::optional<Vec3f>& camera_origin, uint64_t seed_tag,
    const std::unordered_map<size_t, Vec3f>* vote_anchors = nullptr);

/// Multi-stage training data: scene-stage samples are the merged (enhanced)
/// volumes; instance-stage samples are the completed volumes that fed (or
/// would feed) a proposal stage.
struct StageSample {
    int trace_index = 0;
    int iteration = 0;
    std::shared_ptr<const SemanticVolume> volume;
};
struct StageDataset {
    std::vector<StageSample> scene_stage;
    std::vector<StageSample> instance_stage;
};
StageDataset collect_stage_data(std::span<const LoopTrace> traces);

}  // namespace ssc
