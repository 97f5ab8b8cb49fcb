#include "omqa/ontology.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "omqa/error.hpp"
#include "omqa/rng.hpp"

namespace omqa {

namespace {

template <class T>
std::vector<std::vector<T>> bfs_closure(const std::vector<std::vector<std::size_t>>& adj,
                                        const std::vector<T>& labels) {
    std::vector<std::vector<T>> out(adj.size());
    std::vector<std::size_t> seen(adj.size(), SIZE_MAX);
    for (std::size_t s = 0; s < adj.size(); ++s) {
        std::vector<std::size_t> stack{s};
        seen[s] = s;
        while (!stack.empty()) {
            std::size_t u = stack.back();
            stack.pop_back();
            out[s].push_back(labels[u]);
            for (std::size_t v : adj[u]) {
                if (seen[v] != s) {
                    seen[v] = s;
                    stack.push_back(v);
                }
            }
        }
        std::sort(out[s].begin(), out[s].end());
    }
    return out;
}

bool intersects(const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i == *j) return true;
        if (*i < *j) ++i; else ++j;
    }
    return false;
}

}  // namespace

HierarchyClosure::HierarchyClosure(const std::vector<Axiom>& axioms, std::size_t node_count,
                                   std::size_t relation_count) {
    std::vector<std::vector<std::size_t>> cup(node_count), cdown(node_count);
    std::vector<std::vector<std::size_t>> rup(2 * relation_count), rdown(2 * relation_count);
    auto role_edge = [&](Role p, Role s) {
        rup[p.index()].push_back(s.index());
        rdown[s.index()].push_back(p.index());
    };
    for (const auto& ax : axioms) {
        switch (ax.kind) {
            case AxiomKind::SubConcept:
                cup[ax.a].push_back(ax.b);
                cdown[ax.b].push_back(ax.a);
                break;
            case AxiomKind::SubRole:
                role_edge({ax.role.rel, false}, {ax.s, false});
                role_edge({ax.role.rel, true}, {ax.s, true});
                break;
            case AxiomKind::InvSubRole:
                role_edge({ax.role.rel, true}, {ax.s, false});
                role_edge({ax.role.rel, false}, {ax.s, true});
                break;
            default:
                break;
        }
    }
    std::vector<NodeId> nodes(node_count);
    for (std::size_t i = 0; i < node_count; ++i) nodes[i] = static_cast<NodeId>(i);
    std::vector<Role> roles(2 * relation_count);
    for (std::size_t i = 0; i < roles.size(); ++i) roles[i] = Role{static_cast<RelId>(i / 2), (i % 2) == 1};
    csup_ = bfs_closure(cup, nodes);
    csub_ = bfs_closure(cdown, nodes);
    rsup_ = bfs_closure(rup, roles);
    rsub_ = bfs_closure(rdown, roles);
}

bool HierarchyClosure::concept_leq(NodeId a, NodeId b) const {
    if (a == b) return true;
    if (a >= csup_.size()) return false;
    return std::binary_search(csup_[a].begin(), csup_[a].end(), b);
}

bool HierarchyClosure::role_leq(Role p, Role s) const {
    if (p == s) return true;
    if (p.index() >= rsup_.size()) return false;
    return std::binary_search(rsup_[p.index()].begin(), rsup_[p.index()].end(), s);
}

std::vector<NodeId> HierarchyClosure::concept_supers(NodeId a) const {
    return a < csup_.size() ? csup_[a] : std::vector<NodeId>{a};
}
std::vector<NodeId> HierarchyClosure::concept_subs(NodeId a) const {
    return a < csub_.size() ? csub_[a] : std::vector<NodeId>{a};
}
std::vector<Role> HierarchyClosure::role_supers(Role r) const {
    return r.index() < rsup_.size() ? rsup_[r.index()] : std::vector<Role>{r};
}
std::vector<Role> HierarchyClosure::role_subs(Role r) const {
    return r.index() < rsub_.size() ? rsub_[r.index()] : std::vector<Role>{r};
}

// ---------------------------------------------------------------------------

Ontology::Ontology(std::shared_ptr<SymbolTable> symbols, std::vector<Axiom> axioms) : symbols_(std::move(symbols)) {
    if (!symbols_) symbols_ = std::make_shared<SymbolTable>();
    const auto& st = *symbols_;
    std::set<Axiom> seen;
    for (const auto& ax : axioms) {
        auto concept_ok = [&](NodeId c) {
            if (!st.is_concept(c)) throw SchemaError("axiom refers to a non-concept node");
        };
        auto role_ok = [&](RelId r) {
            if (r >= st.relation_count()) throw SchemaError("axiom refers to an unknown relation");
            if (r == kTypeRel) throw SchemaError("axioms may not mention the reserved relation 'type'");
        };
        switch (ax.kind) {
            case AxiomKind::SubConcept: concept_ok(ax.a); concept_ok(ax.b); break;
            case AxiomKind::ExistsSub: concept_ok(ax.a); role_ok(ax.role.rel); break;
            case AxiomKind::SubExists: concept_ok(ax.a); role_ok(ax.role.rel); break;
            case AxiomKind::SubExistsTyped: concept_ok(ax.a); concept_ok(ax.b); role_ok(ax.role.rel); break;
            case AxiomKind::SubRole:
            case AxiomKind::InvSubRole: role_ok(ax.role.rel); role_ok(ax.s); break;
        }
        if (seen.insert(ax).second) axioms_.push_back(ax);
    }
    closure_ = HierarchyClosure(axioms_, st.node_count(), st.relation_count());
    compute_derived();
}

std::vector<NodeId> Ontology::exists_concepts(Role r) const {
    std::vector<NodeId> out;
    for (const auto& ax : axioms_) {
        if (ax.kind != AxiomKind::ExistsSub || !closure_.role_leq(r, ax.role)) continue;
        auto sup = closure_.concept_supers(ax.a);
        auto sub = closure_.concept_subs(ax.a);
        out.insert(out.end(), sup.begin(), sup.end());
        out.insert(out.end(), sub.begin(), sub.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void Ontology::compute_derived() {
    const std::size_t nr = symbols_->relation_count();
    derived_.assign(nr, {});
    for (RelId p = 1; p < nr; ++p) {
        auto& d = derived_[p];
        for (const auto& ax : axioms_) {
            if (ax.kind == AxiomKind::InvSubRole && ax.role.rel == p) d.inv.push_back(ax.s);
        }
        std::sort(d.inv.begin(), d.inv.end());
        d.inv.erase(std::unique(d.inv.begin(), d.inv.end()), d.inv.end());
        d.dom = exists_concepts({p, false});
        d.range = exists_concepts({p, true});
    }
    auto inv_clause = [&](RelId p, RelId q, bool use_dom) {
        for (RelId p1 : derived_[p].inv) {
            for (RelId p2 : derived_[q].inv) {
                const auto& a = use_dom ? derived_[p1].dom : derived_[p1].range;
                const auto& b = use_dom ? derived_[p2].dom : derived_[p2].range;
                if (intersects(a, b)) return true;
            }
        }
        return false;
    };
    for (RelId p = 1; p < nr; ++p) {
        auto& d = derived_[p];
        for (RelId q = 1; q < nr; ++q) {
            if (intersects(d.range, derived_[q].dom)) d.follows.push_back(q);
            if (intersects(d.range, derived_[q].range) || inv_clause(p, q, true)) d.inter_r.push_back(q);
            if (intersects(d.dom, derived_[q].dom) || inv_clause(p, q, false)) d.inter_d.push_back(q);
        }
    }
}

const RelationSets& Ontology::derived(RelId p) const {
    if (p >= derived_.size()) return empty_sets_;
    return derived_[p];
}

// ---------------------------------------------------------------------------

Ontology load_ontology(std::istream& in, std::shared_ptr<SymbolTable> symbols) {
    if (!symbols) symbols = std::make_shared<SymbolTable>();
    auto& st = *symbols;
    std::vector<Axiom> axioms;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;) tok.push_back(t);
        if (tok.empty()) continue;
        const std::string& kw = tok[0];
        auto need = [&](std::size_t n) {
            if (tok.size() != n + 1) {
                throw ParseError(lineno, "'" + kw + "' expects " + std::to_string(n) + " arguments, got " +
                                             std::to_string(tok.size() - 1));
            }
        };
        auto rel = [&](const std::string& name) {
            if (name == kTypeName) throw ParseError(lineno, "axioms may not mention 'type'");
            return st.intern_relation(name);
        };
        try {
            if (kw == "sub_concept") {
                need(2);
                axioms.push_back(Axiom::sub_concept(st.intern_concept(tok[1]), st.intern_concept(tok[2])));
            } else if (kw == "sub_role") {
                need(2);
                axioms.push_back(Axiom::sub_role(rel(tok[1]), rel(tok[2])));
            } else if (kw == "inv_sub_role") {
                need(2);
                axioms.push_back(Axiom::inv_sub_role(rel(tok[1]), rel(tok[2])));
            } else if (kw == "domain") {
                need(2);
                axioms.push_back(Axiom::domain(rel(tok[1]), st.intern_concept(tok[2])));
            } else if (kw == "range") {
                need(2);
                axioms.push_back(Axiom::range(rel(tok[1]), st.intern_concept(tok[2])));
            } else if (kw == "exists") {
                need(2);
                axioms.push_back(Axiom::sub_exists(st.intern_concept(tok[1]), rel(tok[2])));
            } else if (kw == "exists_typed") {
                need(3);
                axioms.push_back(
                    Axiom::sub_exists_typed(st.intern_concept(tok[1]), rel(tok[2]), st.intern_concept(tok[3])));
            } else {
                throw ParseError(lineno, "unknown keyword '" + kw + "'");
            }
        } catch (const SchemaError& e) {
            throw SchemaError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return Ontology(std::move(symbols), std::move(axioms));
}

Ontology load_ontology_file(const std::string& path, std::shared_ptr<SymbolTable> symbols) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open ontology file '" + path + "'");
    return load_ontology(in, std::move(symbols));
}

std::string axiom_to_string(const Axiom& ax, const SymbolTable& st) {
    const auto& c = [&](NodeId id) -> const std::string& { return st.node_name(id); };
    const auto& r = [&](RelId id) -> const std::string& { return st.relation_name(id); };
    switch (ax.kind) {
        case AxiomKind::SubConcept: return "sub_concept " + c(ax.a) + " " + c(ax.b);
        case AxiomKind::ExistsSub:
            return std::string(ax.role.inverse ? "range " : "domain ") + r(ax.role.rel) + " " + c(ax.a);
        case AxiomKind::SubExists: return "exists " + c(ax.a) + " " + r(ax.role.rel);
        case AxiomKind::SubExistsTyped: return "exists_typed " + c(ax.a) + " " + r(ax.role.rel) + " " + c(ax.b);
        case AxiomKind::SubRole: return "sub_role " + r(ax.role.rel) + " " + r(ax.s);
        case AxiomKind::InvSubRole: return "inv_sub_role " + r(ax.role.rel) + " " + r(ax.s);
    }
    return {};
}

void write_ontology(const Ontology& o, std::ostream& out) {
    for (const auto& ax : o.axioms()) out << axiom_to_string(ax, o.symbols()) << '\n';
}

// ---------------------------------------------------------------------------

namespace {

struct TripleHash {
    std::size_t operator()(const Triple& t) const {
        std::uint64_t x = (static_cast<std::uint64_t>(t.head) << 32) ^ t.tail;
        return static_cast<std::size_t>(splitmix64(x ^ (static_cast<std::uint64_t>(t.rel) * 0x9e3779b97f4a7c15ULL)));
    }
};

}  // namespace

KnowledgeGraph saturate(const KnowledgeGraph& g, const Ontology& o) {
    const std::size_t nr = g.symbols().relation_count();
    const std::size_t nn = g.symbols().node_count();
    // one-premise rules indexed by the premise symbol
    std::vector<std::vector<std::pair<RelId, bool>>> role_rules(nr);   // p -> (s, swap)
    std::vector<std::vector<std::pair<NodeId, bool>>> type_rules(nr);  // p -> (A, on tail)
    std::vector<std::vector<NodeId>> concept_rules(nn);                // A -> B
    for (const auto& ax : o.axioms()) {
        switch (ax.kind) {
            case AxiomKind::SubConcept:
                if (ax.a < nn) concept_rules[ax.a].push_back(ax.b);
                break;
            case AxiomKind::ExistsSub:
                if (ax.role.rel < nr) type_rules[ax.role.rel].push_back({ax.a, ax.role.inverse});
                break;
            case AxiomKind::SubRole:
                if (ax.role.rel < nr) role_rules[ax.role.rel].push_back({ax.s, false});
                break;
            case AxiomKind::InvSubRole:
                if (ax.role.rel < nr) role_rules[ax.role.rel].push_back({ax.s, true});
                break;
            default:
                break;  // existentials on the right introduce no named facts
        }
    }

    std::unordered_set<Triple, TripleHash> facts(g.triples().begin(), g.triples().end());
    std::vector<Triple> delta(g.triples().begin(), g.triples().end());
    std::vector<Triple> all = delta;
    auto add = [&](Triple t) {
        if (facts.insert(t).second) {
            delta.push_back(t);
            all.push_back(t);
        }
    };
    while (!delta.empty()) {
        Triple f = delta.back();
        delta.pop_back();
        if (f.rel == kTypeRel) {
            if (f.tail < nn) {
                for (NodeId b : concept_rules[f.tail]) add({f.head, kTypeRel, b});
            }
            continue;
        }
        if (f.rel >= nr) continue;
        for (auto [s, swap] : role_rules[f.rel]) add(swap ? Triple{f.tail, s, f.head} : Triple{f.head, s, f.tail});
        for (auto [a, on_tail] : type_rules[f.rel]) add({on_tail ? f.tail : f.head, kTypeRel, a});
    }
    return KnowledgeGraph(g.symbols_ptr(), std::move(all));
}

}  // namespace omqa
