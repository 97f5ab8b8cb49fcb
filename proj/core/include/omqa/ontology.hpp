#pragma once

#include <compare>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "omqa/kg.hpp"
#include "omqa/symbols.hpp"

namespace omqa {

// A role name or its inverse p⁻.
struct Role {
    RelId rel = 0;
    bool inverse = false;
    Role inv() const { return {rel, !inverse}; }
    std::size_t index() const { return 2 * static_cast<std::size_t>(rel) + (inverse ? 1 : 0); }
    auto operator<=>(const Role&) const = default;
};

enum class AxiomKind : std::uint8_t {
    SubConcept,      // A ⊑ B
    ExistsSub,       // ∃R ⊑ A, R = p (domain) or p⁻ (range)
    SubExists,       // A ⊑ ∃p
    SubExistsTyped,  // A ⊑ ∃p.B
    SubRole,         // p ⊑ s
    InvSubRole,      // p⁻ ⊑ s
};

struct Axiom {
    AxiomKind kind = AxiomKind::SubConcept;
    NodeId a = 0;  // SubConcept lhs; ExistsSub rhs; SubExists* lhs
    NodeId b = 0;  // SubConcept rhs; SubExistsTyped filler
    Role role;     // ExistsSub / SubExists* role; lhs role of SubRole / InvSubRole
    RelId s = 0;   // rhs role name of SubRole / InvSubRole

    static Axiom sub_concept(NodeId a, NodeId b) { return {AxiomKind::SubConcept, a, b, {}, 0}; }
    static Axiom domain(RelId p, NodeId a) { return {AxiomKind::ExistsSub, a, 0, {p, false}, 0}; }
    static Axiom range(RelId p, NodeId a) { return {AxiomKind::ExistsSub, a, 0, {p, true}, 0}; }
    static Axiom sub_exists(NodeId a, RelId p) { return {AxiomKind::SubExists, a, 0, {p, false}, 0}; }
    static Axiom sub_exists_typed(NodeId a, RelId p, NodeId b) {
        return {AxiomKind::SubExistsTyped, a, b, {p, false}, 0};
    }
    static Axiom sub_role(RelId p, RelId s) { return {AxiomKind::SubRole, 0, 0, {p, false}, s}; }
    static Axiom inv_sub_role(RelId p, RelId s) { return {AxiomKind::InvSubRole, 0, 0, {p, false}, s}; }

    bool is_role_axiom() const { return kind == AxiomKind::SubRole || kind == AxiomKind::InvSubRole; }
    auto operator<=>(const Axiom&) const = default;
};

// ⊑* over concepts and over signed roles. Both are reflexive on every symbol,
// including ones created after construction.
class HierarchyClosure {
public:
    HierarchyClosure() = default;
    HierarchyClosure(const std::vector<Axiom>& axioms, std::size_t node_count, std::size_t relation_count);

    bool concept_leq(NodeId a, NodeId b) const;
    bool role_leq(Role p, Role s) const;
    // Sorted, reflexive.
    std::vector<NodeId> concept_supers(NodeId a) const;
    std::vector<NodeId> concept_subs(NodeId a) const;
    std::vector<Role> role_supers(Role r) const;
    std::vector<Role> role_subs(Role r) const;

private:
    std::vector<std::vector<NodeId>> csup_, csub_;
    std::vector<std::vector<Role>> rsup_, rsub_;
};

// Per-relation sets used by the labeling validity predicate.
struct RelationSets {
    std::vector<RelId> inv, follows, inter_r, inter_d;
    std::vector<NodeId> dom, range;
};

class Ontology {
public:
    explicit Ontology(std::shared_ptr<SymbolTable> symbols = std::make_shared<SymbolTable>(),
                      std::vector<Axiom> axioms = {});

    const std::vector<Axiom>& axioms() const { return axioms_; }
    bool empty() const { return axioms_.empty(); }
    const SymbolTable& symbols() const { return *symbols_; }
    const std::shared_ptr<SymbolTable>& symbols_ptr() const { return symbols_; }

    const HierarchyClosure& closure() const { return closure_; }
    // Sets for relation p; empty for relations unknown at construction time.
    const RelationSets& derived(RelId p) const;

    // Sorted signed-role sets backing dom/range: {A | ∃R′⊑A′ ∈ O, R ⊑* R′, A ⊑* A′ or A′ ⊑* A}.
    std::vector<NodeId> exists_concepts(Role r) const;

private:
    void compute_derived();

    std::shared_ptr<SymbolTable> symbols_;
    std::vector<Axiom> axioms_;
    HierarchyClosure closure_;
    std::vector<RelationSets> derived_;
    RelationSets empty_sets_;
};

Ontology load_ontology(std::istream& in, std::shared_ptr<SymbolTable> symbols);
Ontology load_ontology_file(const std::string& path, std::shared_ptr<SymbolTable> symbols);
void write_ontology(const Ontology& o, std::ostream& out);
std::string axiom_to_string(const Axiom& ax, const SymbolTable& st);

// O∞(G): least fixpoint of the fact rules over named individuals.
KnowledgeGraph saturate(const KnowledgeGraph& g, const Ontology& o);

}  // namespace omqa
