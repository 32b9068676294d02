#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "tasckit/error.hpp"

namespace tasckit {

struct Category {
    std::uint32_t id = 0;
    std::string name;
    bool is_thing = false;
};

// Catalog of categories split into things (countable, per-instance) and
// stuff (amorphous, per-class). Id 0 is reserved for void/unlabeled and
// never appears in the catalog. Ids are externally supplied and kept as-is;
// catalog order defines the plane order of ScoreVolume inputs.
class Ontology {
public:
    static constexpr std::uint32_t kVoidId = 0;

    Ontology() = default;
    explicit Ontology(std::vector<Category> categories);

    const std::vector<Category>& categories() const { return categories_; }
    std::size_t size() const { return categories_.size(); }

    bool contains(std::uint32_t id) const { return index_.count(id) != 0; }
    const Category& category(std::uint32_t id) const;
    // Position of a category in the catalog (= its score plane).
    std::size_t index_of(std::uint32_t id) const;
    bool is_thing(std::uint32_t id) const { return category(id).is_thing; }
    bool is_stuff(std::uint32_t id) const { return !category(id).is_thing; }

    struct Counts {
        int stuff = 0;   // N
        int things = 0;  // M
    };
    Counts counts() const;

private:
    std::vector<Category> categories_;
    std::unordered_map<std::uint32_t, std::size_t> index_;
};

struct CollapseResult {
    Ontology ontology;
    // Total over the original ids; stuff ids map to themselves.
    std::map<std::uint32_t, std::uint32_t> mapping;
};

// Merge all thing categories into a single synthetic "thing" category,
// keeping stuff untouched (the N+M -> N+1 reduction). The synthetic
// category reuses the smallest original thing id, so collapsing an
// already-collapsed catalog is the identity. Stuff categories keep their
// catalog order; the thing category is placed last.
CollapseResult collapse_things(const Ontology& o);

}  // namespace tasckit
