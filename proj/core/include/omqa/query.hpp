#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "omqa/kg.hpp"
#include "omqa/symbols.hpp"

namespace omqa {

class Ontology;

struct Term {
    enum class Kind : std::uint8_t { Var, Const };
    Kind kind = Kind::Var;
    std::uint32_t id = 0;  // variable index, or NodeId for constants

    static Term var(std::uint32_t v) { return {Kind::Var, v}; }
    static Term constant(NodeId c) { return {Kind::Const, c}; }
    bool is_var() const { return kind == Kind::Var; }
    bool is_const() const { return kind == Kind::Const; }
    auto operator<=>(const Term&) const = default;
};

struct Atom {
    RelId rel = 0;
    Term head;
    Term tail;
    auto operator<=>(const Atom&) const = default;
};

enum class Shape : std::uint8_t { P1, P2, P3, I2, I3, IP, PI, U2, UP };

inline constexpr std::array<Shape, 5> kTrainShapes{Shape::P1, Shape::P2, Shape::P3, Shape::I2, Shape::I3};
inline constexpr std::array<Shape, 9> kAllShapes{Shape::P1, Shape::P2, Shape::P3, Shape::I2, Shape::I3,
                                                 Shape::IP, Shape::PI, Shape::U2, Shape::UP};

std::string_view shape_name(Shape s);
Shape parse_shape(std::string_view name);  // ConfigError on unknown tag
std::vector<Shape> parse_shape_list(std::string_view csv);

// Monadic CQ. A union query lists its branches as atom-index sets; branches may
// share atoms (the projection after the union in `up`). No branches = one
// conjunctive branch over all atoms.
struct ConjunctiveQuery {
    std::vector<Atom> atoms;
    std::uint32_t answer_var = 0;
    std::vector<std::string> var_names;
    std::vector<std::vector<std::uint32_t>> branches;

    std::uint32_t add_var(std::string name);
    std::uint32_t fresh_var();
    std::size_t var_count() const { return var_names.size(); }
    bool is_union() const { return branches.size() > 1; }
    std::size_t branch_count() const { return branches.empty() ? 1 : branches.size(); }
    ConjunctiveQuery branch(std::size_t i) const;
    // Number of atoms mentioning variable v.
    std::size_t occurrences(std::uint32_t v) const;
    // Drops unused variables and renumbers the rest (answer variable kept).
    void compact();
};

// Answer variable occurs; kinds of constants agree with positions; type atoms
// have a concept constant tail.
void validate(const ConjunctiveQuery& q, const SymbolTable& st);
// Weaker form used for rewriting results: valid and connected through
// variables. Constant-free results are allowed (spec steps can drop a concept).
bool is_well_formed(const ConjunctiveQuery& q, const SymbolTable& st);

std::vector<NodeId> answers(const ConjunctiveQuery& q, const KnowledgeGraph& g);
std::vector<NodeId> certain_answers(const ConjunctiveQuery& q, const KnowledgeGraph& g, const Ontology& o);

std::string canonical_form(const ConjunctiveQuery& q);
std::string to_string(const ConjunctiveQuery& q, const SymbolTable& st);

// Computation plan. Non-type atoms r(T1,T2) are edges T1→T2; a type atom
// type(T,A) is the edge A→T, so concepts act as anchors projected by the
// learned `type` relation.
struct PlanNode {
    enum class Kind : std::uint8_t { Anchor, Project, Intersect };
    Kind kind = Kind::Anchor;
    NodeId anchor = 0;
    RelId rel = 0;
    std::vector<std::uint32_t> inputs;
};

struct QueryPlan {
    Shape shape = Shape::P1;
    std::vector<PlanNode> nodes;         // topological order
    std::vector<std::uint32_t> outputs;  // one per branch
};

QueryPlan plan_query(const ConjunctiveQuery& q);  // UnsupportedShape
Shape shape_of(const ConjunctiveQuery& q);         // UnsupportedShape
std::optional<Shape> try_shape_of(const ConjunctiveQuery& q);

// (N, E, n) with edges in atom orientation; see instantiate().
struct QueryShape {
    std::uint32_t node_count = 0;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    std::uint32_t distinguished = 0;
};

struct ShapeTemplate {
    Shape tag = Shape::P1;
    QueryShape graph;  // anchors → answer orientation
    std::vector<std::vector<std::uint32_t>> branches;  // edge sets, unions only
};

const ShapeTemplate& shape_template(Shape s);

struct Labeling {
    std::vector<std::optional<NodeId>> node_constants;  // unset = variable
    std::vector<RelId> edge_labels;
};

// Atom per edge f(e)(f(n), f(n')). A `type` edge puts its concept end in the
// tail position whichever way the edge points.
ConjunctiveQuery instantiate(const QueryShape& shape, const Labeling& f, const SymbolTable& st,
                             const std::vector<std::vector<std::uint32_t>>& branches = {});
ConjunctiveQuery instantiate(const ShapeTemplate& t, const Labeling& f, const SymbolTable& st);

}  // namespace omqa
