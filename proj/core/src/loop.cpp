#include "ssc/loop.hpp"

#include <algorithm>
#include <cmath>

namespace ssc {

std::string loop_fingerprint(const LoopConfig& cfg, const LoopDependencies& deps) {
    std::string fp = deps.scene->fingerprint() + ";" + deps.instance->fingerprint();
    fp += ";N=" + std::to_string(cfg.iterations);
    fp += ";M=" + std::to_string(cfg.sample_points);
    fp += ";Np=" + std::to_string(cfg.pool_points);
    fp += ";r=" + std::to_string(cfg.cluster_radius);
    fp += ";mincomp=" + std::to_string(cfg.min_component);
    fp += ";minobj=" + std::to_string(cfg.min_objectness);
    fp += ";nms=" + std::to_string(cfg.selection.nms_iou);
    fp += ";seed=" + std::to_string(cfg.seed);
    return fp;
}

std::vector<Proposal> generate_proposals(
    const SemanticVolume& sem, const TsdfVolume& tsdf, const LoopConfig& cfg,
    const ClassPalette& palette, const std::optional<Vec3f>& camera_origin, uint64_t seed_tag,
    const std::unordered_map<size_t, Vec3f>* vote_anchors) {
    LabelVolume labels = argmax_labels(sem, cfg.occ_threshold, tsdf.vis);

    bool any_instance = false;
    for (uint8_t l : labels.labels)
        if (palette.is_instance_class(l)) {
            any_instance = true;
            break;
        }
    if (!any_instance) return {};

    Rng rng = Rng(cfg.seed).fork(seed_tag);
    ScenePointSample sample = sample_scene_points(sem, labels, palette, cfg.sample_points, rng);
    VoteSet votes = estimate_votes(sample, labels, palette, cfg.min_component);
    if (vote_anchors) {
        for (size_t i = 0; i < sample.cloud.size(); ++i) {
            auto it = vote_anchors->find(sample.voxel_index[i]);
            if (it == vote_anchors->end()) continue;
            votes.predicted[i] = it->second - sample.cloud.points[i];
            votes.foreground[i] = 1;
        }
    }
    auto clusters = cluster_votes(sample, votes, cfg.cluster_radius);
    std::optional<float> ground_y = tsdf.spec.origin.y + tsdf.spec.voxel_size;
    // The front-face alignment corrects the front bias of surface-derived
    // votes; anchored votes are already centered, so it would only displace
    // them.
    auto proposals = fit_proposals(sample, votes, clusters, palette,
                                   vote_anchors ? std::nullopt : camera_origin, ground_y);
    proposals = nms3d(std::move(proposals), cfg.selection.nms_iou);

    std::erase_if(proposals, [&](const Proposal& p) { return p.objectness < cfg.min_objectness; });
    return proposals;
}

namespace {

/// Pools up to N_P instance-class voxel centers inside the proposal box.
PointCloud pool_box_points(const SemanticVolume& sem, const LabelVolume& labels,
                           const ClassPalette& palette, const Box3f& box, int max_points, Rng& rng) {
    const GridSpec& spec = labels.spec;
    VoxelIndex lo = spec.world_to_voxel(box.min());
    VoxelIndex hi = spec.world_to_voxel(box.max());

    PointCloud pool;
    pool.num_classes = sem.num_classes;
    for (int z = std::max(lo.z, 0); z <= std::min(hi.z, spec.nz - 1); ++z)
        for (int y = std::max(lo.y, 0); y <= std::min(hi.y, spec.ny - 1); ++y)
            for (int x = std::max(lo.x, 0); x <= std::min(hi.x, spec.nx - 1); ++x) {
                size_t i = spec.index(x, y, z);
                if (!palette.is_instance_class(labels.labels[i])) continue;
                Vec3f c = spec.voxel_center(x, y, z);
                if (!box.contains(c)) continue;
                pool.push_back(c);
                const float* p = sem.at(i);
                float total = 0.0f;
                for (int cc = 1; cc <= sem.num_classes; ++cc) total += p[cc];
                for (int cc = 1; cc <= sem.num_classes; ++cc)
                    pool.class_conf.push_back(total > 0.0f ? p[cc] / total
                                                           : (labels.labels[i] == cc ? 1.0f : 0.0f));
            }

    if (pool.size() <= size_t(max_points)) return pool;
    // seeded subsample without replacement
    std::vector<uint32_t> idx(pool.size());
    for (uint32_t i = 0; i < idx.size(); ++i) idx[i] = i;
    PointCloud out;
    out.num_classes = pool.num_classes;
    for (int k = 0; k < max_points; ++k) {
        uint32_t j = uint32_t(k) + rng.uniform_u32(uint32_t(idx.size() - size_t(k)));
        std::swap(idx[size_t(k)], idx[j]);
        out.append_from(pool, idx[size_t(k)]);
    }
    return out;
}

/// Fraction of voxels whose argmax label differs between two volumes.
double label_diff_fraction(const SemanticVolume& a, const SemanticVolume& b, float occ_threshold) {
    LabelVolume la = argmax_labels(a, occ_threshold);
    LabelVolume lb = argmax_labels(b, occ_threshold);
    size_t diff = 0;
    for (size_t i = 0; i < la.labels.size(); ++i) diff += la.labels[i] != lb.labels[i];
    return double(diff) / double(la.labels.size());
}

}  // namespace

LoopTrace run_loop(std::shared_ptr<const TsdfVolume> tsdf, const SemanticVolume& sem_input,
                   const LoopConfig& cfg, const LoopDependencies& deps) {
    cfg.validate();
    if (!tsdf || !deps.scene || !deps.instance || !deps.palette)
        throw std::invalid_argument("run_loop: missing dependencies");
    if (!(tsdf->spec == sem_input.spec)) throw std::invalid_argument("run_loop: volume specs differ");

    LoopTrace trace;
    trace.tsdf = tsdf;
    trace.requested_iterations = cfg.iterations;
    trace.config_fingerprint = loop_fingerprint(cfg, deps);

    try {
        // The projected input is both the evidence source and the merge base
        // at every iteration; a loop-local copy keeps it available when
        // low-memory mode releases stage volumes.
        const SemanticVolume base_input = sem_input;

        LoopStage s0;
        s0.iteration = 0;
        s0.merged_input = sem_input;
        s0.completed = deps.scene->complete(*tsdf, sem_input);
        s0.completer_fingerprint = deps.scene->fingerprint() + ";" + deps.instance->fingerprint();
        trace.stages.push_back(std::move(s0));

        const float vs = tsdf->spec.voxel_size;
        for (int iter = 1; iter <= cfg.iterations; ++iter) {
            const LoopStage& prev = trace.stages.back();

            LoopStage stage;
            stage.iteration = iter;
            stage.completer_fingerprint = deps.scene->fingerprint() + ";" + deps.instance->fingerprint();
            std::unordered_map<size_t, Vec3f> anchors;
            for (const auto& e : prev.patch.entries)
                if (e.instance_id >= 0 && e.instance_id < int(prev.instances.size()))
                    anchors[e.voxel] = prev.instances[size_t(e.instance_id)].frame.center;
            stage.proposals =
                generate_proposals(prev.completed, *tsdf, cfg, *deps.palette, deps.camera_origin,
                                   uint64_t(iter), anchors.empty() ? nullptr : &anchors);

            // Partial points for completion come from the original projected
            // evidence, never from diffused or previously merged volumes:
            // iteration refines the boxes, the observation stays fixed, and
            // registration must not anchor on the loop's own output.
            const SemanticVolume& evidence = base_input;
            LabelVolume evidence_labels = argmax_labels(evidence, cfg.occ_threshold, tsdf->vis);
            Rng pool_rng = Rng(cfg.seed).fork(0x9000 + uint64_t(iter));

            for (size_t pi = 0; pi < stage.proposals.size(); ++pi) {
                const Proposal& prop = stage.proposals[pi];
                Box3f pool_box{prop.center, prop.size * 1.05f + Vec3f{2 * vs, 2 * vs, 2 * vs}};
                PointCloud pooled = pool_box_points(evidence, evidence_labels, *deps.palette, pool_box,
                                                    cfg.pool_points, pool_rng);
                if (pooled.empty()) continue;

                // canonical frame anchored on the proposal box; margin points
                // are kept so registration can see evidence the box missed
                CanonicalizeResult canon = canonicalize(pooled, prop.box(), 1.5f);
                if (canon.points.empty()) continue;

                CompletedInstance inst;
                try {
                    inst = deps.instance->complete(canon.points, prop.class_conf, canon.frame);
                } catch (const NoPriorError&) {
                    inst = PassthroughInstanceCompleter().complete(canon.points, prop.class_conf,
                                                                   canon.frame);
                }
                inst.source_proposal = int(pi);
                const bool grounded = !deps.palette->info(inst.class_id).wall_mounted;
                if (cfg.refine_placement) {
                    FrameFit fit = refine_frame(canon.points, inst.points, inst.frame, 0.16f, 0.04f,
                                                grounded, vs);
                    inst.frame.center += fit.offset;
                    inst.frame.half_extents = inst.frame.half_extents * fit.scale;
                }
                if (grounded)
                    inst.frame.center.y =
                        tsdf->spec.origin.y + tsdf->spec.voxel_size + inst.frame.half_extents.y;

                // Damping: a re-detection of an instance the previous
                // iteration already placed keeps that placement, so repeated
                // registration does not random-walk thin or small shapes.
                for (const CompletedInstance& prev_inst : prev.instances) {
                    if (prev_inst.class_id != inst.class_id) continue;
                    if (dist(prev_inst.frame.center, inst.frame.center) <= 3.0f * vs) {
                        inst.frame = prev_inst.frame;
                        break;
                    }
                }

                PointCloud world = decanonicalize(inst.points, inst.frame);
                SceneVoxelization vox = voxelize_instance_to_scene(world, inst.class_id, tsdf->spec);
                const int inst_index = int(stage.instances.size());
                for (size_t v : vox.voxels)
                    stage.patch.entries.push_back({v, inst.class_id, inst_index, prop.objectness});

                stage.instances.push_back(std::move(inst));
            }

            // Detections are not guaranteed to recur once their object has
            // been merged; previous instances that no new detection
            // supersedes are carried forward so completed objects persist
            // across iterations.
            for (const CompletedInstance& prev_inst : prev.instances) {
                bool superseded = false;
                for (const CompletedInstance& cur : stage.instances)
                    if (cur.class_id == prev_inst.class_id &&
                        dist(cur.frame.center, prev_inst.frame.center) <= 3.0f * vs) {
                        superseded = true;
                        break;
                    }
                if (superseded) continue;
                CompletedInstance kept = prev_inst;
                PointCloud world = decanonicalize(kept.points, kept.frame);
                SceneVoxelization vox = voxelize_instance_to_scene(world, kept.class_id, tsdf->spec);
                const int inst_index = int(stage.instances.size());
                for (size_t v : vox.voxels)
                    stage.patch.entries.push_back({v, kept.class_id, inst_index, 0.0f});
                stage.instances.push_back(std::move(kept));
            }

            // Re-derive the enhanced input from the original projected volume:
            // instances are re-detected every iteration, so stale voxels from
            // the previous patch must not accumulate.
            stage.merged_input = merge_instances(base_input, stage.patch);
            stage.completed = deps.scene->complete(*tsdf, stage.merged_input);

            bool stop = cfg.early_stop_fraction > 0.0f &&
                        label_diff_fraction(stage.completed, prev.completed, cfg.occ_threshold) <
                            double(cfg.early_stop_fraction);
            trace.stages.push_back(std::move(stage));
            if (cfg.low_memory) {
                LoopStage& old = trace.stages[trace.stages.size() - 2];
                old.completed.conf.clear();
                old.completed.conf.shrink_to_fit();
                old.merged_input.conf.clear();
                old.merged_input.conf.shrink_to_fit();
            }
            if (stop && iter < cfg.iterations) {
                trace.early_stopped = true;
                break;
            }
        }
    } catch (const LoopError&) {
        throw;
    } catch (const std::exception& e) {
        throw LoopError(std::string("loop aborted: ") + e.what(), std::move(trace));
    }
    return trace;
}

StageDataset collect_stage_data(std::span<const LoopTrace> traces) {
    StageDataset out;
    for (size_t t = 0; t < traces.size(); ++t) {
        const LoopTrace& trace = traces[t];
        const int n_done = int(trace.stages.size()) - 1;

        // Scene stage trains on every enhanced (merged) volume from I_1..I_N.
        for (int i = 1; i <= n_done; ++i) {
            if (trace.stages[size_t(i)].merged_input.conf.empty()) continue;  // low-memory trace
            out.scene_stage.push_back(
                {int(t), i, std::make_shared<SemanticVolume>(trace.stages[size_t(i)].merged_input)});
        }

        // Instance stage trains on every completed volume that feeds a
        // proposal pass; S0 is always included (it is the entry point even
        // for a zero-iteration trace).
        const int last = std::max(n_done - 1, 0);
        for (int i = 0; i <= last && i < int(trace.stages.size()); ++i) {
            if (!stage_has_volumes(trace.stages[size_t(i)])) continue;  // low-memory trace
            out.instance_stage.push_back(
                {int(t), i, std::make_shared<SemanticVolume>(trace.stages[size_t(i)].completed)});
        }
    }
    return out;
}

}  // namespace ssc
