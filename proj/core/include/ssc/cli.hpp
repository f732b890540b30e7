#pragma once

#include <string>
#include <vector>

#include "ssc/loop.hpp"
#include "ssc/synth.hpp"

namespace ssc {

// Stable exit-code contract: 0 success, 1 usage error, 2 data error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

struct GenerateOptions {
    std::string out_dir;
    int count = 1;
    uint64_t seed = 0;
    SceneRecipe recipe;      // per-scene seed is derived from seed + index
    int jobs = 1;
    bool force = false;
    bool quiet = false;
};

struct CompleteOptions {
    std::string bundle_dir;  // single bundle or dataset directory
    std::string out_dir;
    LoopConfig loop;
    std::string shape_library_dir;  // empty = builtin
    int jobs = 1;
    bool force = false;
    bool quiet = false;
};

struct EvaluateOptions {
    std::string trace_dir;    // one of trace_dir / volume_path
    std::string volume_path;
    std::string gt_bundle;
    std::string report = "table";  // "table" | "json"
    double det_iou = 0.25;
    float occ_threshold = 0.0f;
    bool fixed_class_list = false;  // mean over all classes, absents count as 0
};

struct ExportMeshOptions {
    std::string volume_path;
    std::string out_path;
    std::string format = "binary";  // "ascii" | "binary"
    float occ_threshold = 0.0f;
};

int cmd_generate(const GenerateOptions& opt);
int cmd_complete(const CompleteOptions& opt);
int cmd_evaluate(const EvaluateOptions& opt);
int cmd_export_mesh(const ExportMeshOptions& opt);

/// Full argv entry point (subcommand dispatch, flag parsing, config file,
/// exception-to-exit-code mapping).
int run_cli(int argc, const char* const* argv);

}  // namespace ssc
