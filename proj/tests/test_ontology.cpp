#include <doctest.h>

#include "tasckit/ontology.hpp"
#include "util.hpp"

using namespace tasckit;

namespace {

Ontology shaped(int n_stuff, int n_things) {
    std::vector<Category> cats;
    std::uint32_t id = 1;
    for (int i = 0; i < n_stuff; ++i) cats.push_back({id++, "stuff_" + std::to_string(i), false});
    for (int i = 0; i < n_things; ++i) cats.push_back({id++, "thing_" + std::to_string(i), true});
    return Ontology(std::move(cats));
}

}  // namespace

TEST_CASE("counts per catalog shape") {
    const auto cityscapes = shaped(11, 8).counts();
    CHECK(cityscapes.stuff == 11);
    CHECK(cityscapes.things == 8);

    const auto vistas = shaped(28, 37).counts();
    CHECK(vistas.stuff == 28);
    CHECK(vistas.things == 37);

    const auto minimal = shaped(1, 1).counts();
    CHECK(minimal.stuff == 1);
    CHECK(minimal.things == 1);
}

TEST_CASE("collapse_things merges to N+1") {
    const Ontology o = shaped(11, 8);
    const CollapseResult r = collapse_things(o);
    CHECK(r.ontology.size() == 12);
    CHECK(r.ontology.counts().stuff == 11);
    CHECK(r.ontology.counts().things == 1);

    // mapping is total; stuff ids are fixed points
    for (const Category& c : o.categories()) {
        REQUIRE(r.mapping.count(c.id) == 1);
        if (!c.is_thing) CHECK(r.mapping.at(c.id) == c.id);
    }
    // all things map to the single synthetic id
    const std::uint32_t thing_id = r.ontology.categories().back().id;
    CHECK(r.ontology.categories().back().is_thing);
    for (const Category& c : o.categories()) {
        if (c.is_thing) CHECK(r.mapping.at(c.id) == thing_id);
    }
}

TEST_CASE("collapse_things minimal catalog") {
    const Ontology o(std::vector<Category>{{7, "road", false}, {9, "car", true}});
    const CollapseResult r = collapse_things(o);
    CHECK(r.ontology.size() == 2);
    CHECK(r.mapping.at(7) == 7);
    CHECK(r.mapping.at(9) == 9);  // smallest (only) thing id is reused
}

TEST_CASE("collapse_things is idempotent on a collapsed catalog") {
    SplitMix64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Category> cats;
        std::uint32_t id = 1;
        const int n_stuff = rng.uniform_int(1, 5);
        const int n_things = rng.uniform_int(1, 5);
        for (int i = 0; i < n_stuff; ++i) {
            cats.push_back({id, "s" + std::to_string(id), false});
            id += static_cast<std::uint32_t>(rng.uniform_int(1, 3));
        }
        for (int i = 0; i < n_things; ++i) {
            cats.push_back({id, "t" + std::to_string(id), true});
            id += static_cast<std::uint32_t>(rng.uniform_int(1, 3));
        }
        const CollapseResult once = collapse_things(Ontology(cats));
        const CollapseResult twice = collapse_things(once.ontology);
        REQUIRE(once.ontology.size() == twice.ontology.size());
        for (std::size_t i = 0; i < once.ontology.size(); ++i) {
            CHECK(once.ontology.categories()[i].id == twice.ontology.categories()[i].id);
            CHECK(once.ontology.categories()[i].is_thing ==
                  twice.ontology.categories()[i].is_thing);
        }
        for (const auto& [from, to] : twice.mapping) CHECK(from == to);
    }
}

TEST_CASE("ontology validation") {
    CHECK_THROWS_AS(collapse_things(shaped(3, 0)), InvariantError);
    CHECK_THROWS_AS(Ontology(std::vector<Category>{{1, "a", false}, {1, "b", true}}),
                    InvariantError);
    CHECK_THROWS_AS(Ontology(std::vector<Category>{{0, "void", false}}), InvariantError);
    CHECK_THROWS_AS(shaped(1, 1).category(42), InvariantError);
}
