#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "omqa/rewrite.hpp"

using namespace omqa;
using omqa::testing::cq;
using omqa::testing::fig1;
using omqa::testing::names;

namespace {

bool has(const std::vector<RewriteResult>& rs, const ConjunctiveQuery& q) {
    const auto k = canonical_form(q);
    for (const auto& r : rs) {
        if (canonical_form(r.query) == k) return true;
    }
    return false;
}

bool subset(const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace

TEST(GenStep, SuperConcept) {
    auto w = fig1();
    auto q = cq(*w.st, "X", {{"X", "type", "AProfessor"}, {"X", "worksFor", "Y"}});
    auto rs = generalize_step(q, w.o);
    EXPECT_TRUE(has(rs, cq(*w.st, "X", {{"X", "type", "Professor"}, {"X", "worksFor", "Y"}})));
    // Y is unshared, so the domain axiom may drop it
    EXPECT_TRUE(has(rs, cq(*w.st, "X", {{"X", "type", "AProfessor"}, {"X", "type", "Person"}})));
}

TEST(GenStep, SuperRole) {
    auto w = fig1();
    auto q = cq(*w.st, "Y", {{"mat", "teachesAt", "Y"}});
    auto rs = generalize_step(q, w.o);
    EXPECT_TRUE(has(rs, cq(*w.st, "Y", {{"mat", "worksFor", "Y"}})));
    for (const auto& r : rs) {
        EXPECT_EQ(r.step.dir, Direction::Gen);
    }
}

TEST(GenStep, DomainGuardKeepsSharedVariables) {
    auto w = fig1();
    // Y is the answer: worksFor(X,Y) must not collapse into type(X,Person)
    auto q = cq(*w.st, "Y", {{"bob", "worksFor", "Y"}});
    for (const auto& r : generalize_step(q, w.o)) EXPECT_NE(r.step.rule, Rule::R2);
}

TEST(GenStep, AnchorAbstraction) {
    auto w = fig1();
    Ontology empty(w.st);
    auto q = cq(*w.st, "X", {{"bob", "worksFor", "X"}, {"mat", "teachesAt", "X"}});
    auto rs = generalize_step(q, empty);
    EXPECT_EQ(rs.size(), 2u);
    EXPECT_TRUE(has(rs, cq(*w.st, "X", {{"Z", "worksFor", "X"}, {"mat", "teachesAt", "X"}})));
    RewriteOptions no_r8;
    no_r8.r8 = false;
    EXPECT_TRUE(generalize_step(q, empty, no_r8).empty());
    // a single anchor cannot be abstracted away
    EXPECT_TRUE(generalize_step(cq(*w.st, "X", {{"bob", "worksFor", "X"}}), empty).empty());
}

TEST(SpecStep, RangeThenInverse) {
    auto w = fig1();
    auto q = cq(*w.st, "X", {{"X", "type", "University"}, {"X", "hasAlumnus", "Y"}});
    auto rs = specialize_step(q, w.o);
    auto q1 = cq(*w.st, "X", {{"Z", "teachesAt", "X"}, {"X", "hasAlumnus", "Y"}});
    ASSERT_TRUE(has(rs, q1));
    auto rs2 = specialize_step(q1, w.o);
    EXPECT_TRUE(has(rs2, cq(*w.st, "X", {{"Z", "teachesAt", "X"}, {"Y", "degreeFrom", "X"}})));
}

TEST(SpecStep, SubConcept) {
    auto w = fig1();
    auto q = cq(*w.st, "X", {{"X", "type", "Professor"}, {"X", "degreeFrom", "mit"}});
    EXPECT_TRUE(has(specialize_step(q, w.o), cq(*w.st, "X", {{"X", "type", "AProfessor"}, {"X", "degreeFrom", "mit"}})));
    auto sc = spec_closure(q, w.o, 2);
    EXPECT_TRUE(sc.contains(q));
    EXPECT_TRUE(sc.contains(cq(*w.st, "X", {{"X", "type", "AProfessor"}, {"X", "degreeFrom", "mit"}})));
}

TEST(Closure, DepthZeroIsOrigin) {
    auto w = fig1();
    auto q = cq(*w.st, "X", {{"X", "type", "Professor"}, {"X", "degreeFrom", "mit"}});
    EXPECT_EQ(gen_closure(q, w.o, 0).members.size(), 1u);
    EXPECT_EQ(spec_closure(q, w.o, 0).members.size(), 1u);
}

TEST(Closure, TraceReplaysToMember) {
    auto w = fig1();
    auto q = cq(*w.st, "Y", {{"mit", "hasAlumnus", "X"}, {"X", "type", "AProfessor"}, {"X", "teachesAt", "Y"}});
    auto gc = gen_closure(q, w.o, 2);
    for (const auto& m : gc.members) {
        EXPECT_EQ(m.key, canonical_form(m.query));
        EXPECT_LE(m.trace.size(), 2u);
    }
    std::set<std::string> keys;
    for (const auto& m : gc.members) EXPECT_TRUE(keys.insert(m.key).second);
}

TEST(Rew, KeepsShapeCompliantSpecializations) {
    auto w = fig1();
    auto q = cq(*w.st, "X", {{"X", "type", "Professor"}, {"X", "degreeFrom", "mit"}});
    auto r = rew(q, w.o, {kAllShapes.begin(), kAllShapes.end()});
    // degreeFrom(X,mit) leaves the answer as a source, so q itself is not
    // embeddable; its inverse form is, and so is the AProfessor specialization
    EXPECT_TRUE(r.contains(q));
    EXPECT_FALSE(try_shape_of(q).has_value());
    EXPECT_TRUE(r.contains(cq(*w.st, "X", {{"X", "type", "AProfessor"}, {"mit", "hasAlumnus", "X"}})));
    EXPECT_FALSE(r.contains(cq(*w.st, "X", {{"X", "type", "AProfessor"}, {"X", "degreeFrom", "mit"}})));
    for (std::size_t i = 1; i < r.members.size(); ++i) EXPECT_TRUE(try_shape_of(r.members[i].query).has_value());
}

TEST(Rew, OnlyOriginWhenEverySpecializationChangesShape) {
    auto st = std::make_shared<SymbolTable>();
    auto p = st->intern_relation("p"), s = st->intern_relation("s");
    auto a = st->intern_entity("a");
    auto c = st->intern_concept("C");
    // ∃s⁻ ⊑ C turns type(X,C) into s(Z,X): Z is a source without an anchor
    Ontology o(st, {Axiom::range(s, c)});
    ConjunctiveQuery q;
    q.answer_var = q.add_var("X");
    q.atoms = {{p, Term::constant(a), Term::var(0)}, {kTypeRel, Term::var(0), Term::constant(c)}};
    auto r = rew(q, o, {Shape::I2});
    ASSERT_EQ(r.members.size(), 1u);
    EXPECT_EQ(r.members[0].key, canonical_form(q));
}

TEST(Soundness, RandomInstancesAgainstChase) {
    Rng rng(21);
    std::size_t checked = 0;
    for (int inst = 0; inst < 60; ++inst) {
        oracle::InstanceSpec spec;
        // few symbols, many axioms: rewriting has something to do
        spec.entities = 10;
        spec.concepts = 3;
        spec.relations = 3;
        spec.triples = 20;
        spec.type_triples = 8;
        spec.axioms = 4 + rng.index(7);
        auto in = oracle::random_instance(spec, rng);
        auto q = oracle::random_query(in, kTrainShapes[rng.index(kTrainShapes.size())], rng);
        auto base = oracle::brute_certain(q, in.g, in.o);
        for (const auto& m : spec_closure(q, in.o).members) {
            ASSERT_TRUE(subset(oracle::brute_certain(m.query, in.g, in.o), base))
                << to_string(q, *in.st) << " -> " << to_string(m.query, *in.st);
            ++checked;
        }
        for (const auto& m : gen_closure(q, in.o).members) {
            ASSERT_TRUE(subset(base, oracle::brute_certain(m.query, in.g, in.o)))
                << to_string(q, *in.st) << " -> " << to_string(m.query, *in.st);
            ++checked;
        }
    }
    EXPECT_GT(checked, 200u);
}

TEST(Completeness, HierarchyOnlyOntologies) {
    Rng rng(22);
    std::size_t nonempty = 0;
    for (int inst = 0; inst < 40; ++inst) {
        oracle::InstanceSpec spec;
        spec.exists_sub = spec.sub_exists = spec.sub_exists_typed = false;
        spec.axioms = 2 + rng.index(7);
        auto in = oracle::random_instance(spec, rng);
        auto q = oracle::random_query(in, kTrainShapes[rng.index(kTrainShapes.size())], rng);
        std::set<NodeId> u;
        for (const auto& m : spec_closure(q, in.o, std::nullopt).members) {
            for (auto a : answers(m.query, in.g)) u.insert(a);
        }
        auto want = oracle::brute_answers(q, oracle::naive_saturate(oracle::facts_of(in.g), in.o.axioms()));
        ASSERT_EQ(std::vector<NodeId>(u.begin(), u.end()), want) << to_string(q, *in.st);
        nonempty += !want.empty();
    }
    EXPECT_GT(nonempty, 20u);
}

TEST(Termination, FixpointOnRandomPairs) {
    Rng rng(23);
    for (int inst = 0; inst < 100; ++inst) {
        oracle::InstanceSpec spec;
        spec.axioms = 1 + rng.index(10);
        auto in = oracle::random_instance(spec, rng);
        auto q = oracle::random_query(in, kTrainShapes[rng.index(kTrainShapes.size())], rng);
        const double env = std::pow(static_cast<double>(in.o.axioms().size() + q.atoms.size()),
                                    static_cast<double>(q.atoms.size()));
        auto g = gen_closure(q, in.o, std::nullopt);
        auto s = spec_closure(q, in.o, std::nullopt);
        EXPECT_LE(static_cast<double>(s.members.size()), env) << to_string(q, *in.st);
        EXPECT_FALSE(g.members.empty());
    }
}
