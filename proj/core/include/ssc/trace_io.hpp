#pragma once

#include <optional>
#include <string>

#include "ssc/loop.hpp"
#include "ssc/metrics.hpp"

namespace ssc {

/// Per-stage metrics against ground truth, used both by trace.json and the
/// CLI summary lines.
struct StageMetrics {
    int iteration = 0;
    SCReport sc;
    SSCReport ssc;
};
std::vector<StageMetrics> evaluate_trace(const LoopTrace& trace, const LabelVolume& gt,
                                         float occ_threshold);

/// Writes the trace directory: s0.sisv, i1/ (proposals.txt + instance PLYs),
/// s1.sisv, ... plus a trace.json manifest with the config fingerprint,
/// per-stage metrics (when gt is given), and file checksums.
void write_trace(const std::string& dir, const LoopTrace& trace, const ClassPalette& palette,
                 float occ_threshold, const LabelVolume* gt);

/// Reads the final stage's label volume (or a specific stage when >= 0).
LabelVolume read_trace_labels(const std::string& dir, int num_classes, int stage = -1);

/// Proposals text format: `class cx cy cz sx sy sz objectness`, 6 decimals.
void write_proposals_txt(const std::string& path, std::span<const Proposal> proposals);
std::vector<DetectionBox> read_proposals_txt(const std::string& path);

}  // namespace ssc
