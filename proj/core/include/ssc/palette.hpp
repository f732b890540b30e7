#pragma once

#include <array>
#include <string>
#include <vector>

#include "ssc/geometry.hpp"

namespace ssc {

/// One semantic class. Ids are 1-based; id 0 is always "empty" and is not a
/// palette entry. Shell classes (ceiling/floor/wall) are scene structure and
/// never become instance proposals.
struct ClassInfo {
    int id = 0;
    std::string name;
    bool is_instance = false;
    bool wall_mounted = false;    // hangs on a wall instead of resting on the floor
    Vec3f template_size;          // mean world box size (meters); zero for shell classes
    std::array<uint8_t, 3> color{128, 128, 128};
};

class ClassPalette {
public:
    ClassPalette() = default;
    explicit ClassPalette(std::vector<ClassInfo> classes);

    /// The 11-class indoor palette used throughout: ceil., floor, wall, win.,
    /// chair, bed, sofa, table, tvs, furn., objs.
    static const ClassPalette& indoor11();

    int num_classes() const { return int(classes_.size()); }
    const ClassInfo& info(int class_id) const;
    const std::vector<ClassInfo>& classes() const { return classes_; }

    bool is_instance_class(int class_id) const { return class_id >= 1 && info(class_id).is_instance; }
    std::vector<int> instance_class_ids() const;

    /// Name lookup; returns 0 when unknown.
    int id_of(const std::string& name) const;

private:
    std::vector<ClassInfo> classes_;
};

}  // namespace ssc
