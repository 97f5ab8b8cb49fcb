#pragma once
// Small helpers shared by the test binaries.

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "omqa/kg.hpp"
#include "omqa/ontology.hpp"
#include "omqa/query.hpp"

#ifndef OMQA_FIXTURE_DIR
#error "OMQA_FIXTURE_DIR must be defined"
#endif

namespace omqa::testing {

inline std::string fixture(const std::string& name) { return std::string(OMQA_FIXTURE_DIR) + "/" + name; }

struct World {
    std::shared_ptr<SymbolTable> st;
    KnowledgeGraph g;
    Ontology o;
};

inline World fig1() {
    auto st = std::make_shared<SymbolTable>();
    auto g = load_triples_file(fixture("fig1.tsv"), st);
    auto o = load_ontology_file(fixture("fig1.onto"), st);
    return {st, std::move(g), std::move(o)};
}

// cq(st, "X", {{"X","type","Professor"}, {"X","degreeFrom","mit"}}). Names of
// one or two characters starting upper-case (X, Y, Z1) are variables.
using AtomText = std::array<std::string, 3>;

inline bool looks_like_var(const std::string& s) { return !s.empty() && std::isupper(static_cast<unsigned char>(s[0])) && s.size() <= 2; }

inline ConjunctiveQuery cq(const SymbolTable& st, const std::string& answer, const std::vector<AtomText>& atoms) {
    ConjunctiveQuery q;
    std::map<std::string, std::uint32_t> vars;
    q.answer_var = vars[answer] = q.add_var(answer);
    auto term = [&](const std::string& s) {
        if (!looks_like_var(s)) return Term::constant(st.node(s));
        auto it = vars.find(s);
        if (it == vars.end()) it = vars.emplace(s, q.add_var(s)).first;
        return Term::var(it->second);
    };
    for (const auto& a : atoms) q.atoms.push_back({st.relation(a[1]), term(a[0]), term(a[2])});
    return q;
}

inline std::set<std::string> names(const SymbolTable& st, const std::vector<NodeId>& ids) {
    std::set<std::string> out;
    for (auto id : ids) out.insert(st.node_name(id));
    return out;
}

}  // namespace omqa::testing
