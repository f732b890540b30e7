#include "ssc/palette.hpp"

#include <stdexcept>

namespace ssc {

ClassPalette::ClassPalette(std::vector<ClassInfo> classes) : classes_(std::move(classes)) {
    for (size_t i = 0; i < classes_.size(); ++i) {
        if (classes_[i].id != int(i) + 1)
            throw std::invalid_argument("palette class ids must be contiguous starting at 1");
    }
}

const ClassInfo& ClassPalette::info(int class_id) const {
    if (class_id < 1 || class_id > num_classes()) throw std::out_of_range("class id out of range");
    return classes_[size_t(class_id) - 1];
}

std::vector<int> ClassPalette::instance_class_ids() const {
    std::vector<int> ids;
    for (const auto& c : classes_)
        if (c.is_instance) ids.push_back(c.id);
    return ids;
}

int ClassPalette::id_of(const std::string& name) const {
    for (const auto& c : classes_)
        if (c.name == name) return c.id;
    return 0;
}

const ClassPalette& ClassPalette::indoor11() {
    static const ClassPalette palette({
        {1, "ceil.", false, false, {0, 0, 0}, {214, 199, 137}},
        {2, "floor", false, false, {0, 0, 0}, {205, 92, 92}},
        {3, "wall", false, false, {0, 0, 0}, {170, 206, 228}},
        {4, "win.", true, true, {1.50f, 1.10f, 0.12f}, {84, 153, 199}},
        {5, "chair", true, false, {0.55f, 0.95f, 0.55f}, {241, 196, 15}},
        {6, "bed", true, false, {1.60f, 0.65f, 2.05f}, {231, 76, 60}},
        {7, "sofa", true, false, {1.90f, 0.85f, 0.95f}, {155, 89, 182}},
        {8, "table", true, false, {1.30f, 0.75f, 0.80f}, {26, 188, 156}},
        {9, "tvs", true, true, {1.00f, 0.60f, 0.12f}, {44, 62, 80}},
        {10, "furn.", true, false, {1.00f, 1.30f, 0.55f}, {230, 126, 34}},
        {11, "objs.", true, false, {0.45f, 0.45f, 0.45f}, {127, 140, 141}},
    });
    return palette;
}

}  // namespace ssc
