#pragma once

#include <optional>
#include <string>
#include <vector>

#include "omqa/ontology.hpp"
#include "omqa/query.hpp"

namespace omqa {

enum class Rule : std::uint8_t { R1 = 1, R2, R3, R4, R5, R6, R7, R8 };
enum class Direction : std::uint8_t { Gen, Spec };

struct RewriteStep {
    Rule rule = Rule::R1;
    Direction dir = Direction::Gen;
    std::optional<Axiom> axiom;                           // R1..R7
    std::vector<std::pair<std::uint32_t, Term>> theta;   // R8-spec, in the input's variable numbering
};

struct RewriteOptions {
    bool r8 = true;                // anchor abstraction (gen) / atom unification (spec)
    bool preserve_shared = false;  // no variable occurring in more than one atom may disappear
    // Generalizations may grow through A ⊑ ∃p.B; results above this many atoms
    // are dropped. 0 means twice the origin's atom count.
    std::size_t max_atoms = 0;
};

struct RewriteResult {
    ConjunctiveQuery query;
    RewriteStep step;
};

// One rule application; results are compacted and well formed.
std::vector<RewriteResult> generalize_step(const ConjunctiveQuery& q, const Ontology& o, const RewriteOptions& opt = {});
std::vector<RewriteResult> specialize_step(const ConjunctiveQuery& q, const Ontology& o, const RewriteOptions& opt = {});

struct RewriteMember {
    ConjunctiveQuery query;
    std::string key;                 // canonical form
    std::vector<RewriteStep> trace;  // rule path from the origin
};

struct RewriteSet {
    ConjunctiveQuery origin;
    std::vector<RewriteMember> members;  // members[0] is the origin
    std::optional<std::size_t> depth;    // nullopt = fixpoint
    bool contains(const ConjunctiveQuery& q) const;
};

inline constexpr std::size_t kDefaultRewriteDepth = 2;

// BFS closure; depth nullopt iterates to the fixpoint. Conjunctive queries only.
RewriteSet gen_closure(const ConjunctiveQuery& q, const Ontology& o, std::optional<std::size_t> depth = kDefaultRewriteDepth,
                       const RewriteOptions& opt = {});
RewriteSet spec_closure(const ConjunctiveQuery& q, const Ontology& o,
                        std::optional<std::size_t> depth = kDefaultRewriteDepth, const RewriteOptions& opt = {});

// Fixpoint specialization with variable preservation, filtered to `shapes`.
// Union queries are rewritten branch by branch.
RewriteSet rew(const ConjunctiveQuery& q, const Ontology& o, const std::vector<Shape>& shapes);

std::string step_to_string(const RewriteStep& s, const SymbolTable& st);

}  // namespace omqa
