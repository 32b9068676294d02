#include "tasckit/ontology.hpp"

#include <algorithm>
#include <limits>

namespace tasckit {

Ontology::Ontology(std::vector<Category> categories) : categories_(std::move(categories)) {
    index_.reserve(categories_.size());
    for (std::size_t i = 0; i < categories_.size(); ++i) {
        const Category& c = categories_[i];
        if (c.id == kVoidId) {
            throw InvariantError("Ontology: id 0 is reserved for void");
        }
        if (!index_.emplace(c.id, i).second) {
            throw InvariantError("Ontology: duplicate category id " + std::to_string(c.id));
        }
    }
}

const Category& Ontology::category(std::uint32_t id) const {
    return categories_[index_of(id)];
}

std::size_t Ontology::index_of(std::uint32_t id) const {
    auto it = index_.find(id);
    if (it == index_.end()) {
        throw InvariantError("Ontology: unknown category id " + std::to_string(id));
    }
    return it->second;
}

Ontology::Counts Ontology::counts() const {
    Counts c;
    for (const Category& cat : categories_) {
        if (cat.is_thing) {
            ++c.things;
        } else {
            ++c.stuff;
        }
    }
    return c;
}

CollapseResult collapse_things(const Ontology& o) {
    std::uint32_t thing_id = std::numeric_limits<std::uint32_t>::max();
    for (const Category& c : o.categories()) {
        if (c.is_thing) thing_id = std::min(thing_id, c.id);
    }
    if (thing_id == std::numeric_limits<std::uint32_t>::max()) {
        throw InvariantError("collapse_things: ontology has no thing categories");
    }

    CollapseResult result;
    std::vector<Category> merged;
    for (const Category& c : o.categories()) {
        if (c.is_thing) {
            result.mapping[c.id] = thing_id;
        } else {
            result.mapping[c.id] = c.id;
            merged.push_back(c);
        }
    }
    merged.push_back(Category{thing_id, "thing", true});
    result.ontology = Ontology(std::move(merged));
    return result;
}

}  // namespace tasckit
