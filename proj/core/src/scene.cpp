#include "ssc/scene.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>

namespace ssc {

SemanticVolume complete_scene_heuristic(const TsdfVolume& tsdf, const SemanticVolume& sem,
                                        const ClassPalette& palette) {
    if (!(tsdf.spec == sem.spec)) throw std::invalid_argument("complete_scene_heuristic: spec mismatch");

    const GridSpec& spec = sem.spec;
    const int c_classes = sem.num_classes;
    SemanticVolume out(spec, c_classes);

    // Fill domain: undecided in-frustum voxels without class evidence that
    // are occluded or on an evidence-less surface. A voxel whose empty
    // channel already carries mass was decided by an earlier pass and is
    // final (this is what makes the completer idempotent).
    std::vector<uint8_t> fillable(spec.count(), 0);
    std::vector<int16_t> label(spec.count(), -1);

    struct Front {
        size_t voxel;
        size_t origin;  // source voxel whose plane constrains shell spreading
        int16_t cls;
        uint16_t hop;
    };
    std::deque<Front> queue;

    for (size_t i = 0; i < spec.count(); ++i) {
        Visibility v = tsdf.vis[i];
        if (v == Visibility::OutsideFrustum) continue;

        if (sem.has_class_evidence(i)) {
            // keep the evidence distribution (renormalized over all channels)
            const float* src = sem.at(i);
            float* dst = out.at(i);
            float total = 0.0f;
            for (int c = 0; c <= c_classes; ++c) total += src[c];
            for (int c = 0; c <= c_classes; ++c) dst[c] = src[c] / total;
            int best = 1;
            for (int c = 2; c <= c_classes; ++c)
                if (src[c] > src[best]) best = c;
            label[i] = int16_t(best);
            queue.push_back({i, i, int16_t(best), 0});
            continue;
        }
        if (sem.at(i)[0] > 0.0f) {  // decided empty earlier
            out.set_one_hot(i, 0);
            continue;
        }
        if (v == Visibility::VisibleFree) {
            out.set_one_hot(i, 0);
            continue;
        }
        fillable[i] = 1;  // occluded or evidence-less surface voxel
    }

    // Multi-source BFS; first arrival wins, queue order makes it
    // deterministic. Shell labels spread within the structural plane of
    // their source; instance labels dilate one step inside the truncation
    // band.
    const int dirs[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    const int floor_id = palette.id_of("floor"), ceil_id = palette.id_of("ceil.");
    const int wall_id = palette.id_of("wall");

    while (!queue.empty()) {
        Front cur = queue.front();
        queue.pop_front();
        VoxelIndex v = spec.unindex(cur.voxel);
        VoxelIndex o = spec.unindex(cur.origin);
        const bool shell = !palette.is_instance_class(cur.cls);

        for (const auto& d : dirs) {
            VoxelIndex nb{v.x + d[0], v.y + d[1], v.z + d[2]};
            if (!spec.in_bounds(nb)) continue;
            size_t ni = spec.index(nb);
            if (!fillable[ni] || label[ni] != -1) continue;

            if (shell) {
                if (cur.cls == floor_id || cur.cls == ceil_id) {
                    if (nb.y != o.y) continue;  // horizontal spread only
                } else if (cur.cls == wall_id) {
                    if (nb.x != o.x && nb.z != o.z) continue;  // stay in a vertical plane
                }
            } else {
                if (cur.hop >= 1) continue;  // instances dilate one step
                if (tsdf.vis[ni] == Visibility::Occluded && tsdf.distance[ni] <= -tsdf.truncation)
                    continue;
            }

            label[ni] = cur.cls;
            out.set_one_hot(ni, cur.cls);
            queue.push_back({ni, cur.origin, cur.cls, uint16_t(cur.hop + 1)});
        }
    }

    // Unreached in-frustum voxels are decided empty.
    for (size_t i = 0; i < spec.count(); ++i) {
        if (tsdf.vis[i] == Visibility::OutsideFrustum) continue;
        bool assigned = false;
        const float* p = out.at(i);
        for (int c = 0; c <= c_classes && !assigned; ++c) assigned = p[c] > 0.0f;
        if (!assigned) out.set_one_hot(i, 0);
    }
    return out;
}

SemanticVolume HeuristicSceneCompleter::complete(const TsdfVolume& tsdf, const SemanticVolume& sem) const {
    return complete_scene_heuristic(tsdf, sem, palette_);
}

SemanticVolume OracleSceneCompleter::complete(const TsdfVolume& tsdf, const SemanticVolume& sem) const {
    if (!(gt_.spec == sem.spec)) throw std::invalid_argument("oracle completer: spec mismatch");
    SemanticVolume out(sem.spec, sem.num_classes);
    for (size_t i = 0; i < sem.spec.count(); ++i) {
        if (tsdf.vis[i] == Visibility::OutsideFrustum) continue;
        out.set_one_hot(i, gt_.labels[i]);
    }
    return out;
}

SemanticVolume PassthroughSceneCompleter::complete(const TsdfVolume& tsdf, const SemanticVolume& sem) const {
    if (!(tsdf.spec == sem.spec)) throw std::invalid_argument("passthrough completer: spec mismatch");
    SemanticVolume out = sem;
    for (size_t i = 0; i < sem.spec.count(); ++i) {
        if (tsdf.vis[i] == Visibility::OutsideFrustum) continue;
        if (!sem.has_class_evidence(i)) out.set_one_hot(i, 0);
    }
    return out;
}

std::shared_ptr<const SceneCompleter> make_scene_completer(const std::string& name, const LabelVolume* gt,
                                                           const ClassPalette& palette) {
    if (name == "heuristic") return std::make_shared<HeuristicSceneCompleter>(palette);
    if (name == "passthrough") return std::make_shared<PassthroughSceneCompleter>();
    if (name == "oracle") {
        if (!gt) throw std::invalid_argument("oracle scene completer needs ground truth");
        return std::make_shared<OracleSceneCompleter>(*gt);
    }
    throw std::invalid_argument("unknown scene completer: " + name);
}

SemanticVolume merge_instances(const SemanticVolume& sem, const MergePatch& patch) {
    SemanticVolume out = sem;

    // Resolve conflicting claims per voxel first.
    std::map<size_t, const MergePatch::Entry*> winner;
    for (const auto& e : patch.entries) {
        if (e.voxel >= sem.spec.count()) throw std::invalid_argument("merge_instances: voxel out of range");
        if (e.class_id < 1 || e.class_id > sem.num_classes)
            throw std::invalid_argument("merge_instances: class id out of range");
        auto [it, inserted] = winner.try_emplace(e.voxel, &e);
        if (!inserted) {
            const MergePatch::Entry* cur = it->second;
            if (e.objectness > cur->objectness ||
                (e.objectness == cur->objectness && e.instance_id < cur->instance_id))
                it->second = &e;
        }
    }
    for (const auto& [voxel, entry] : winner) out.set_one_hot(voxel, entry->class_id);
    return out;
}

double loss_scene(const SemanticVolume& pred, const LabelVolume& gt) {
    if (!(pred.spec == gt.spec)) throw std::invalid_argument("loss_scene: spec mismatch");
    if (pred.num_classes != gt.num_classes) throw std::invalid_argument("loss_scene: class count mismatch");

    double sum = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < pred.spec.count(); ++i) {
        if (!in_frustum(gt.vis[i])) continue;
        double p = std::max(double(pred.at(i)[gt.labels[i]]), 1e-12);
        sum += -std::log(p);
        ++n;
    }
    return n > 0 ? sum / double(n) : 0.0;
}

std::vector<double> loss_scene_grad(const SemanticVolume& pred, const LabelVolume& gt) {
    if (!(pred.spec == gt.spec)) throw std::invalid_argument("loss_scene_grad: spec mismatch");

    std::vector<double> grad(pred.conf.size(), 0.0);
    size_t n = 0;
    for (size_t i = 0; i < pred.spec.count(); ++i)
        if (in_frustum(gt.vis[i])) ++n;
    if (n == 0) return grad;

    for (size_t i = 0; i < pred.spec.count(); ++i) {
        if (!in_frustum(gt.vis[i])) continue;
        double p = std::max(double(pred.at(i)[gt.labels[i]]), 1e-12);
        grad[i * pred.channels() + gt.labels[i]] = -1.0 / (p * double(n));
    }
    return grad;
}

}  // namespace ssc
