#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ssc/palette.hpp"
#include "ssc/point_cloud.hpp"
#include "ssc/pointgrid.hpp"

namespace ssc {

/// Chamfer distance (squared L2, both directions, each direction averaged by
/// its own set size). Not symmetric in normalization when the sets differ in
/// size. Throws on an empty set.
double chamfer(const PointCloud& a, const PointCloud& b);

/// One-directional term: mean over `from` of the squared distance to the
/// nearest point of `to`. Used as the retrieval cost (a partial scan should
/// not be penalized for the template's unobserved half).
double chamfer_one_directional(const PointCloud& from, const PointCloud& to);

/// Raised when a class has no shape template to retrieve from; callers fall
/// back to passing the partial points through.
struct NoPriorError : std::runtime_error {
    explicit NoPriorError(int class_id)
        : std::runtime_error("no shape template for class " + std::to_string(class_id)) {}
};

/// Canonical shape templates per class. Templates are solid occupancy point
/// sets quantized to instance-grid cell centers, spanning [-1,1]^3.
class ShapeLibrary {
public:
    struct Entry {
        int class_id = 0;
        std::string name;
        PointCloud points;
    };

    ShapeLibrary() = default;
    explicit ShapeLibrary(std::vector<Entry> entries);

    /// Parametric built-in templates for every instance class of the palette,
    /// quantized to `resolution`^3 cells.
    static ShapeLibrary builtin(const ClassPalette& palette, int resolution = 32);

    /// Directory layout: one `<class_id>_<name>.ply` per template plus a
    /// `library.json` manifest listing entries and CRC32 checksums.
    void save(const std::string& dir) const;
    static ShapeLibrary load(const std::string& dir);

    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<const Entry*> templates_for(int class_id) const;
    bool has_class(int class_id) const;

    /// Checks every instance class of the palette has at least one template
    /// inside [-1,1]^3; throws otherwise.
    void validate(const ClassPalette& palette) const;

    /// Stable fingerprint over entry names and point data.
    uint32_t checksum() const;

private:
    std::vector<Entry> entries_;
};

/// Deterministic farthest-point subsample of `cloud` down to `target`
/// points (seed picks the start); returns the cloud unchanged when it
/// already has <= target points.
PointCloud resample_farthest(const PointCloud& cloud, size_t target, uint64_t seed);

/// O(n) deterministic stride subsample (seed picks the phase). Used for the
/// retrieval match sets where farthest-point would dominate startup cost.
PointCloud resample_stride(const PointCloud& cloud, size_t target, uint64_t seed);

struct CompletedInstance {
    PointCloud points;      // canonical coordinates
    CanonicalFrame frame;
    int class_id = 0;
    int source_proposal = -1;
};

/// Instance completion contract: canonical partial points + class
/// confidences -> completed canonical points. Implementations are stateless
/// and deterministic for fixed configuration; the frame is provided for
/// completers that need world context (the ground-truth oracle).
class InstanceCompleter {
public:
    virtual ~InstanceCompleter() = default;
    virtual CompletedInstance complete(const PointCloud& partial, std::span<const float> class_conf,
                                       const CanonicalFrame& frame) const = 0;
    virtual std::string fingerprint() const = 0;
};

/// Returns the partial points unchanged (the no-instance-completion ablation).
class PassthroughInstanceCompleter : public InstanceCompleter {
public:
    CompletedInstance complete(const PointCloud& partial, std::span<const float> class_conf,
                               const CanonicalFrame& frame) const override;
    std::string fingerprint() const override { return "instance=passthrough"; }
};

/// Class-conditioned retrieval: restricts the library to the argmax class and
/// returns the template with the smallest one-directional Chamfer cost from
/// the partial points. Matching runs against a seeded farthest-point subset
/// of each template; the output is the full template (or a resample of
/// `output_points` when configured > 0).
class ShapePriorCompleter : public InstanceCompleter {
public:
    ShapePriorCompleter(std::shared_ptr<const ShapeLibrary> library, size_t match_points = 1024,
                        size_t output_points = 0, uint64_t seed = 0);

    CompletedInstance complete(const PointCloud& partial, std::span<const float> class_conf,
                               const CanonicalFrame& frame) const override;
    std::string fingerprint() const override;

    /// Index of the retrieved template within the library; exposed for tests.
    size_t retrieve_index(const PointCloud& partial, int class_id) const;

private:
    std::shared_ptr<const ShapeLibrary> library_;
    size_t match_points_;
    size_t output_points_;
    uint64_t seed_;
    std::vector<PointCloud> match_sets_;   // per entry
    std::vector<PointCloud> output_sets_;  // per entry
};

/// Registers a completed shape to the observed partial points: searches a
/// small world-space translation grid and a uniform scale ladder for the
/// candidate that lands the most partial points inside cells occupied by the
/// completed shape. Ties prefer the smaller scale (tightest box), then the
/// smaller offset, so solid shapes shrink onto the observed front rather
/// than saturating. Returns the frame-center correction and scale factor.
struct FrameFit {
    Vec3f offset;
    float scale = 1.0f;
};
FrameFit refine_frame(const PointCloud& partial_canonical, const PointCloud& completed_canonical,
                      const CanonicalFrame& frame, float search_radius = 0.16f, float step = 0.04f,
                      bool lock_y = false, float evidence_voxel = 0.08f, GridDims dims = {});

/// Instance stage wrapper: grids the partial points (diagnostics), runs the
/// completer, and verifies the completed points survive a gridding/regridding
/// round trip within one cell.
struct InstanceCompletionResult {
    CompletedInstance instance;
    InstanceGrid partial_grid;
    InstanceGrid completed_grid;
};
InstanceCompletionResult complete_instance_grid(const PointCloud& partial,
                                                std::span<const float> class_conf,
                                                const CanonicalFrame& frame,
                                                const InstanceCompleter& completer, GridDims dims);

/// Instance loss: detection loss plus Chamfer loss, unweighted sum.
double loss_instance(double det_loss, double cd_loss);

}  // namespace ssc
