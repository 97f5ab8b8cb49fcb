#include "omqa/query.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <set>

#include "omqa/error.hpp"
#include "omqa/ontology.hpp"
#include "omqa/rng.hpp"

namespace omqa {

namespace {

constexpr std::array<std::string_view, 9> kShapeNames{"1p", "2p", "3p", "2i", "3i", "ip", "pi", "2u", "up"};

}  // namespace

std::string_view shape_name(Shape s) { return kShapeNames[static_cast<std::size_t>(s)]; }

Shape parse_shape(std::string_view name) {
    for (std::size_t i = 0; i < kShapeNames.size(); ++i) {
        if (kShapeNames[i] == name) return static_cast<Shape>(i);
    }
    throw ConfigError("unknown query shape '" + std::string(name) + "'");
}

std::vector<Shape> parse_shape_list(std::string_view csv) {
    std::vector<Shape> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        auto pos = csv.find(',', start);
        auto tok = csv.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        if (!tok.empty()) out.push_back(parse_shape(tok));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    if (out.empty()) throw ConfigError("empty shape list");
    return out;
}

// ---------------------------------------------------------------------------

std::uint32_t ConjunctiveQuery::add_var(std::string name) {
    for (std::uint32_t i = 0; i < var_names.size(); ++i) {
        if (var_names[i] == name) return i;
    }
    var_names.push_back(std::move(name));
    return static_cast<std::uint32_t>(var_names.size() - 1);
}

std::uint32_t ConjunctiveQuery::fresh_var() {
    for (std::size_t k = var_names.size();; ++k) {
        std::string name = "z" + std::to_string(k);
        if (std::find(var_names.begin(), var_names.end(), name) == var_names.end()) {
            var_names.push_back(name);
            return static_cast<std::uint32_t>(var_names.size() - 1);
        }
    }
}

ConjunctiveQuery ConjunctiveQuery::branch(std::size_t i) const {
    ConjunctiveQuery b;
    b.answer_var = answer_var;
    b.var_names = var_names;
    if (branches.empty()) {
        b.atoms = atoms;
    } else {
        for (auto a : branches.at(i)) b.atoms.push_back(atoms.at(a));
    }
    return b;
}

std::size_t ConjunctiveQuery::occurrences(std::uint32_t v) const {
    std::size_t n = 0;
    for (const auto& a : atoms) {
        if ((a.head.is_var() && a.head.id == v) || (a.tail.is_var() && a.tail.id == v)) ++n;
    }
    return n;
}

void ConjunctiveQuery::compact() {
    if (branches.empty()) {
        std::vector<Atom> uniq;
        for (const auto& a : atoms) {
            if (std::find(uniq.begin(), uniq.end(), a) == uniq.end()) uniq.push_back(a);
        }
        atoms = std::move(uniq);
    }
    std::vector<std::int64_t> remap(var_names.size(), -1);
    std::vector<std::string> names;
    auto touch = [&](std::uint32_t v) {
        if (remap[v] < 0) {
            remap[v] = static_cast<std::int64_t>(names.size());
            names.push_back(var_names[v]);
        }
    };
    touch(answer_var);
    for (const auto& a : atoms) {
        if (a.head.is_var()) touch(a.head.id);
        if (a.tail.is_var()) touch(a.tail.id);
    }
    for (auto& a : atoms) {
        if (a.head.is_var()) a.head.id = static_cast<std::uint32_t>(remap[a.head.id]);
        if (a.tail.is_var()) a.tail.id = static_cast<std::uint32_t>(remap[a.tail.id]);
    }
    answer_var = static_cast<std::uint32_t>(remap[answer_var]);
    var_names = std::move(names);
}

void validate(const ConjunctiveQuery& q, const SymbolTable& st) {
    if (q.answer_var >= q.var_count()) throw ContractError("answer variable out of range");
    if (q.atoms.empty()) throw ContractError("query has no atoms");
    bool seen_answer = false;
    for (const auto& a : q.atoms) {
        if (a.rel >= st.relation_count()) throw LookupError("unknown relation id " + std::to_string(a.rel));
        for (const Term* t : {&a.head, &a.tail}) {
            if (t->is_var()) {
                if (t->id >= q.var_count()) throw ContractError("variable index out of range");
                if (t->id == q.answer_var) seen_answer = true;
            } else if (t->id >= st.node_count()) {
                throw LookupError("unknown constant id " + std::to_string(t->id));
            }
        }
        if (a.head.is_const() && !st.is_entity(a.head.id)) {
            throw ContractError("concept '" + st.node_name(a.head.id) + "' in head position");
        }
        if (a.rel == kTypeRel) {
            if (!a.tail.is_const() || !st.is_concept(a.tail.id)) {
                throw ContractError("type atom needs a concept constant in second position");
            }
        } else if (a.tail.is_const() && !st.is_entity(a.tail.id)) {
            throw ContractError("concept '" + st.node_name(a.tail.id) + "' used with relation " +
                                st.relation_name(a.rel));
        }
    }
    if (!seen_answer) throw ContractError("answer variable does not occur in any atom");
    for (const auto& b : q.branches) {
        if (b.empty()) throw ContractError("empty union branch");
        for (auto i : b) {
            if (i >= q.atoms.size()) throw ContractError("branch refers to a missing atom");
        }
    }
}

bool is_well_formed(const ConjunctiveQuery& q, const SymbolTable& st) {
    try {
        validate(q, st);
    } catch (const Error&) {
        return false;
    }
    for (std::size_t b = 0; b < q.branch_count(); ++b) {
        auto qb = q.branch(b);
        std::vector<std::uint32_t> parent(q.var_count());
        std::iota(parent.begin(), parent.end(), 0u);
        std::function<std::uint32_t(std::uint32_t)> find = [&](std::uint32_t x) {
            return parent[x] == x ? x : parent[x] = find(parent[x]);
        };
        std::vector<char> used(q.var_count(), 0);
        for (const auto& a : qb.atoms) {
            if (a.head.is_var()) used[a.head.id] = 1;
            if (a.tail.is_var()) used[a.tail.id] = 1;
            if (a.head.is_var() && a.tail.is_var()) parent[find(a.head.id)] = find(a.tail.id);
        }
        if (!used[q.answer_var]) return false;
        for (std::uint32_t v = 0; v < q.var_count(); ++v) {
            if (used[v] && find(v) != find(q.answer_var)) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

using Set = std::vector<NodeId>;

struct Cand {
    bool all = false;  // unconstrained
    Set s;
};

Set sorted_unique(Set v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

Cand intersect(const Cand& a, const Cand& b) {
    if (a.all) return b;
    if (b.all) return a;
    Cand out;
    std::set_intersection(a.s.begin(), a.s.end(), b.s.begin(), b.s.end(), std::back_inserter(out.s));
    return out;
}

// Conjunctive evaluation of one branch.
class BranchEval {
public:
    BranchEval(const ConjunctiveQuery& q, const KnowledgeGraph& g) : q_(q), g_(g), var_atoms_(q.var_count()) {
        for (std::uint32_t i = 0; i < q.atoms.size(); ++i) {
            const auto& a = q.atoms[i];
            if (a.head.is_var()) var_atoms_[a.head.id].push_back(i);
            if (a.tail.is_var() && !(a.head.is_var() && a.head.id == a.tail.id)) var_atoms_[a.tail.id].push_back(i);
        }
    }

    Set run() {
        // ground atoms are plain filters
        for (const auto& a : q_.atoms) {
            if (a.head.is_const() && a.tail.is_const() && !g_.contains({a.head.id, a.rel, a.tail.id})) return {};
        }
        if (!is_forest()) return backtrack_all();
        std::vector<char> done(q_.var_count(), 0);
        mark(q_.answer_var, done);
        for (std::uint32_t v = 0; v < q_.var_count(); ++v) {
            if (!done[v] && !var_atoms_[v].empty()) {
                mark(v, done);
                Cand c = eval_var(v, -1);
                if (!c.all && c.s.empty()) return {};
            }
        }
        Cand root = eval_var(q_.answer_var, -1);
        Set out;
        const auto& st = g_.symbols();
        if (root.all) {
            for (NodeId e : st.entities()) out.push_back(e);
        } else {
            for (NodeId e : root.s) {
                if (st.is_entity(e)) out.push_back(e);
            }
        }
        return out;
    }

private:
    bool is_forest() const {
        std::vector<std::uint32_t> parent(q_.var_count());
        std::iota(parent.begin(), parent.end(), 0u);
        std::function<std::uint32_t(std::uint32_t)> find = [&](std::uint32_t x) {
            return parent[x] == x ? x : parent[x] = find(parent[x]);
        };
        for (const auto& a : q_.atoms) {
            if (!(a.head.is_var() && a.tail.is_var())) continue;
            auto x = find(a.head.id), y = find(a.tail.id);
            if (x == y) return false;
            parent[x] = y;
        }
        return true;
    }

    void mark(std::uint32_t v, std::vector<char>& done) const {
        std::vector<std::uint32_t> stack{v};
        done[v] = 1;
        while (!stack.empty()) {
            auto u = stack.back();
            stack.pop_back();
            for (auto i : var_atoms_[u]) {
                const auto& a = q_.atoms[i];
                for (const Term* t : {&a.head, &a.tail}) {
                    if (t->is_var() && !done[t->id]) {
                        done[t->id] = 1;
                        stack.push_back(t->id);
                    }
                }
            }
        }
    }

    Cand step(RelId rel, const Cand& child, bool want_heads) const {
        Cand out;
        if (child.all) {
            for (auto [h, t] : g_.pairs(rel)) out.s.push_back(want_heads ? h : t);
        } else {
            for (NodeId y : child.s) {
                auto r = want_heads ? g_.predecessors(y, rel) : g_.successors(y, rel);
                out.s.insert(out.s.end(), r.begin(), r.end());
            }
        }
        out.s = sorted_unique(std::move(out.s));
        return out;
    }

    Cand eval_var(std::uint32_t v, std::int64_t parent_atom) const {
        Cand res;
        res.all = true;
        for (auto i : var_atoms_[v]) {
            if (static_cast<std::int64_t>(i) == parent_atom) continue;
            const auto& a = q_.atoms[i];
            bool v_is_head = a.head.is_var() && a.head.id == v;
            const Term& other = v_is_head ? a.tail : a.head;
            Cand child;
            if (other.is_const()) {
                child.s = {other.id};
            } else {
                child = eval_var(other.id, i);
            }
            res = intersect(res, step(a.rel, child, v_is_head));
            if (!res.all && res.s.empty()) return res;
        }
        return res;
    }

    // General fallback for cyclic bodies.
    Set backtrack_all() const {
        const auto& st = g_.symbols();
        Set out;
        std::vector<std::optional<NodeId>> asg(q_.var_count());
        for (NodeId e : st.entities()) {
            asg.assign(q_.var_count(), std::nullopt);
            asg[q_.answer_var] = e;
            std::vector<char> used(q_.atoms.size(), 0);
            if (search(asg, used)) out.push_back(e);
        }
        return out;
    }

    static std::optional<NodeId> value(const Term& t, const std::vector<std::optional<NodeId>>& asg) {
        if (t.is_const()) return t.id;
        return asg[t.id];
    }

    bool search(std::vector<std::optional<NodeId>>& asg, std::vector<char>& used) const {
        int best = -1, best_bound = -1;
        for (std::size_t i = 0; i < q_.atoms.size(); ++i) {
            if (used[i]) continue;
            int b = (value(q_.atoms[i].head, asg) ? 1 : 0) + (value(q_.atoms[i].tail, asg) ? 1 : 0);
            if (b > best_bound) {
                best_bound = b;
                best = static_cast<int>(i);
            }
        }
        if (best < 0) return true;
        const auto& a = q_.atoms[best];
        used[best] = 1;
        auto h = value(a.head, asg), t = value(a.tail, asg);
        bool ok = false;
        auto try_bind = [&](NodeId hv, NodeId tv) {
            auto saved = asg;
            if (a.head.is_var()) {
                if (asg[a.head.id] && *asg[a.head.id] != hv) return false;
                asg[a.head.id] = hv;
            }
            if (a.tail.is_var()) {
                if (asg[a.tail.id] && *asg[a.tail.id] != tv) {
                    asg = saved;
                    return false;
                }
                asg[a.tail.id] = tv;
            }
            bool r = search(asg, used);
            asg = saved;
            return r;
        };
        if (h && t) {
            ok = g_.contains({*h, a.rel, *t}) && search(asg, used);
        } else if (h) {
            for (NodeId y : g_.successors(*h, a.rel)) {
                if ((ok = try_bind(*h, y))) break;
            }
        } else if (t) {
            for (NodeId x : g_.predecessors(*t, a.rel)) {
                if ((ok = try_bind(x, *t))) break;
            }
        } else {
            for (auto [x, y] : g_.pairs(a.rel)) {
                if ((ok = try_bind(x, y))) break;
            }
        }
        used[best] = 0;
        return ok;
    }

    const ConjunctiveQuery& q_;
    const KnowledgeGraph& g_;
    std::vector<std::vector<std::uint32_t>> var_atoms_;
};

}  // namespace

std::vector<NodeId> answers(const ConjunctiveQuery& q, const KnowledgeGraph& g) {
    validate(q, g.symbols());
    Set out;
    for (std::size_t b = 0; b < q.branch_count(); ++b) {
        auto qb = q.branch(b);
        auto r = BranchEval(qb, g).run();
        out.insert(out.end(), r.begin(), r.end());
    }
    return sorted_unique(std::move(out));
}

std::vector<NodeId> certain_answers(const ConjunctiveQuery& q, const KnowledgeGraph& g, const Ontology& o) {
    return answers(q, saturate(g, o));
}

// ---------------------------------------------------------------------------
// Canonical form

namespace {

std::string term_key(const Term& t, const std::vector<std::uint32_t>& order) {
    if (t.is_const()) return "#" + std::to_string(t.id);
    return "?" + std::to_string(order[t.id]);
}

std::string render(const ConjunctiveQuery& q, const std::vector<std::vector<std::uint32_t>>& branches,
                   const std::vector<std::uint32_t>& order) {
    std::vector<std::string> parts;
    for (const auto& b : branches) {
        std::set<std::string> atoms;
        for (auto i : b) {
            const auto& a = q.atoms[i];
            atoms.insert(std::to_string(a.rel) + "(" + term_key(a.head, order) + "," + term_key(a.tail, order) + ")");
        }
        std::string s;
        for (const auto& a : atoms) {
            if (!s.empty()) s += "&";
            s += a;
        }
        parts.push_back(s);
    }
    std::sort(parts.begin(), parts.end());
    parts.erase(std::unique(parts.begin(), parts.end()), parts.end());
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += "|";
        out += p;
    }
    return out;
}

}  // namespace

std::string canonical_form(const ConjunctiveQuery& q) {
    const std::size_t nv = q.var_count();
    std::vector<std::vector<std::uint32_t>> branches = q.branches;
    if (branches.empty()) {
        branches.emplace_back(q.atoms.size());
        std::iota(branches[0].begin(), branches[0].end(), 0u);
    }
    // colour refinement over variables; colours depend only on structure
    std::vector<std::uint64_t> color(nv, 0);
    if (nv) color[q.answer_var] = 1;
    for (std::size_t round = 0; round <= nv; ++round) {
        std::vector<std::vector<std::uint64_t>> sig(nv);
        for (const auto& a : q.atoms) {
            auto tkey = [&](const Term& t) {
                return t.is_const() ? splitmix64(0xc0ffee ^ t.id) : splitmix64(color[t.id] + 17);
            };
            std::uint64_t base = splitmix64(a.rel + 1);
            if (a.head.is_var()) sig[a.head.id].push_back(splitmix64(base ^ 0x1111 ^ tkey(a.tail)));
            if (a.tail.is_var()) sig[a.tail.id].push_back(splitmix64(base ^ 0x2222 ^ tkey(a.head)));
        }
        std::vector<std::uint64_t> next(nv);
        for (std::size_t v = 0; v < nv; ++v) {
            std::sort(sig[v].begin(), sig[v].end());
            std::uint64_t h = splitmix64(color[v]);
            for (auto s : sig[v]) h = splitmix64(h ^ s);
            next[v] = h;
        }
        std::set<std::uint64_t> before(color.begin(), color.end()), after(next.begin(), next.end());
        color = std::move(next);
        if (after.size() == before.size() && round > 0) break;
    }
    // order: answer variable first, then by colour; permute within ties
    std::vector<std::uint32_t> vars(nv);
    std::iota(vars.begin(), vars.end(), 0u);
    std::sort(vars.begin(), vars.end(), [&](std::uint32_t a, std::uint32_t b) {
        bool aa = a == q.answer_var, bb = b == q.answer_var;
        if (aa != bb) return aa;
        if (color[a] != color[b]) return color[a] < color[b];
        return a < b;
    });
    std::vector<std::pair<std::size_t, std::size_t>> groups;
    for (std::size_t i = 0; i < nv;) {
        std::size_t j = i + 1;
        while (j < nv && color[vars[j]] == color[vars[i]] && vars[i] != q.answer_var) ++j;
        groups.push_back({i, j});
        i = j;
    }
    std::string best;
    bool have = false;
    std::size_t budget = 40320;
    std::function<void(std::size_t)> rec = [&](std::size_t gi) {
        if (budget == 0) return;
        if (gi == groups.size()) {
            --budget;
            std::vector<std::uint32_t> order(nv);
            for (std::size_t pos = 0; pos < nv; ++pos) order[vars[pos]] = static_cast<std::uint32_t>(pos);
            auto s = render(q, branches, order);
            if (!have || s < best) {
                best = std::move(s);
                have = true;
            }
            return;
        }
        auto [lo, hi] = groups[gi];
        std::sort(vars.begin() + lo, vars.begin() + hi);
        do {
            rec(gi + 1);
        } while (std::next_permutation(vars.begin() + lo, vars.begin() + hi));
    };
    rec(0);
    return best;
}

std::string to_string(const ConjunctiveQuery& q, const SymbolTable& st) {
    auto term = [&](const Term& t) {
        return t.is_var() ? "?" + q.var_names.at(t.id) : st.node_name(t.id);
    };
    std::string out = "q(?" + q.var_names.at(q.answer_var) + ") <- ";
    for (std::size_t b = 0; b < q.branch_count(); ++b) {
        if (b) out += " | ";
        auto qb = q.branch(b);
        for (std::size_t i = 0; i < qb.atoms.size(); ++i) {
            const auto& a = qb.atoms[i];
            if (i) out += ", ";
            out += st.relation_name(a.rel) + "(" + term(a.head) + "," + term(a.tail) + ")";
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shapes and plans

namespace {

struct BranchGraph {
    // in-edges per variable: (atom index, source term)
    std::vector<std::vector<std::pair<std::uint32_t, Term>>> in;
    std::vector<int> out_deg;
};

BranchGraph branch_graph(const ConjunctiveQuery& q, const std::vector<std::uint32_t>& atom_ids) {
    BranchGraph bg;
    bg.in.resize(q.var_count());
    bg.out_deg.assign(q.var_count(), 0);
    for (auto i : atom_ids) {
        const auto& a = q.atoms[i];
        Term src, dst;
        if (a.rel == kTypeRel) {
            src = a.tail;
            dst = a.head;
        } else {
            src = a.head;
            dst = a.tail;
        }
        if (!dst.is_var()) throw UnsupportedShape("constant at a sink of the computation graph");
        if (src.is_var()) {
            if (src.id == dst.id) throw UnsupportedShape("self loop");
            ++bg.out_deg[src.id];
        }
        bg.in[dst.id].push_back({i, src});
    }
    return bg;
}

std::string signature(const BranchGraph& bg, std::uint32_t v, std::size_t depth) {
    if (depth > bg.in.size()) throw UnsupportedShape("cyclic computation graph");
    std::vector<std::string> kids;
    for (const auto& [atom, src] : bg.in[v]) kids.push_back(src.is_var() ? signature(bg, src.id, depth + 1) : "a");
    std::sort(kids.begin(), kids.end());
    std::string s = "(";
    for (const auto& k : kids) s += k;
    return s + ")";
}

Shape conj_shape(const ConjunctiveQuery& q, const std::vector<std::uint32_t>& atom_ids, BranchGraph& bg) {
    bg = branch_graph(q, atom_ids);
    std::vector<char> used(q.var_count(), 0);
    for (auto i : atom_ids) {
        const auto& a = q.atoms[i];
        if (a.head.is_var()) used[a.head.id] = 1;
        if (a.tail.is_var()) used[a.tail.id] = 1;
    }
    if (!used[q.answer_var]) throw UnsupportedShape("answer variable missing from a branch");
    for (std::uint32_t v = 0; v < q.var_count(); ++v) {
        if (!used[v]) continue;
        if (bg.in[v].empty()) throw UnsupportedShape("variable source in computation graph");
        int want = (v == q.answer_var) ? 0 : 1;
        if (bg.out_deg[v] != want) throw UnsupportedShape("computation graph is not an in-tree to the answer");
    }
    auto sig = signature(bg, q.answer_var, 0);
    // every used variable must be reached from the answer
    std::size_t reached = 0;
    std::function<void(std::uint32_t)> walk = [&](std::uint32_t v) {
        ++reached;
        for (const auto& [atom, src] : bg.in[v]) {
            if (src.is_var()) walk(src.id);
        }
    };
    walk(q.answer_var);
    if (reached != static_cast<std::size_t>(std::count(used.begin(), used.end(), 1))) {
        throw UnsupportedShape("disconnected computation graph");
    }
    static const std::map<std::string, Shape> table{
        {"(a)", Shape::P1},  {"((a))", Shape::P2}, {"(((a)))", Shape::P3}, {"(aa)", Shape::I2},
        {"(aaa)", Shape::I3}, {"((aa))", Shape::IP}, {"((a)a)", Shape::PI},
    };
    auto it = table.find(sig);
    if (it == table.end()) throw UnsupportedShape("computation graph " + sig + " matches no supported shape");
    return it->second;
}

std::uint32_t build_plan(const ConjunctiveQuery& q, const BranchGraph& bg, std::uint32_t v, QueryPlan& plan) {
    std::vector<std::uint32_t> projs;
    for (const auto& [atom, src] : bg.in[v]) {
        std::uint32_t input;
        if (src.is_var()) {
            input = build_plan(q, bg, src.id, plan);
        } else {
            PlanNode n;
            n.kind = PlanNode::Kind::Anchor;
            n.anchor = src.id;
            plan.nodes.push_back(n);
            input = static_cast<std::uint32_t>(plan.nodes.size() - 1);
        }
        PlanNode p;
        p.kind = PlanNode::Kind::Project;
        p.rel = q.atoms[atom].rel;
        p.inputs = {input};
        plan.nodes.push_back(p);
        projs.push_back(static_cast<std::uint32_t>(plan.nodes.size() - 1));
    }
    if (projs.size() == 1) return projs[0];
    PlanNode n;
    n.kind = PlanNode::Kind::Intersect;
    n.inputs = projs;
    plan.nodes.push_back(n);
    return static_cast<std::uint32_t>(plan.nodes.size() - 1);
}

}  // namespace

QueryPlan plan_query(const ConjunctiveQuery& q) {
    if (q.atoms.empty() || q.answer_var >= q.var_count()) throw UnsupportedShape("empty query");
    for (const auto& a : q.atoms) {
        if (a.rel == kTypeRel && !a.tail.is_const()) throw UnsupportedShape("type atom without concept");
    }
    QueryPlan plan;
    std::vector<std::vector<std::uint32_t>> branches = q.branches;
    if (branches.empty()) {
        branches.emplace_back(q.atoms.size());
        std::iota(branches[0].begin(), branches[0].end(), 0u);
    }
    if (branches.size() > 2) throw UnsupportedShape("more than two union branches");
    std::vector<char> covered(q.atoms.size(), 0);
    std::vector<Shape> shapes;
    std::vector<BranchGraph> graphs(branches.size());
    for (std::size_t b = 0; b < branches.size(); ++b) {
        for (auto i : branches[b]) covered[i] = 1;
        shapes.push_back(conj_shape(q, branches[b], graphs[b]));
    }
    if (std::find(covered.begin(), covered.end(), 0) != covered.end()) {
        throw UnsupportedShape("atom outside every union branch");
    }
    if (branches.size() == 1) {
        plan.shape = shapes[0];
    } else if (shapes[0] == Shape::P1 && shapes[1] == Shape::P1) {
        plan.shape = Shape::U2;
    } else if (shapes[0] == Shape::P2 && shapes[1] == Shape::P2) {
        // the projection after the union is shared, the first hops differ
        auto last = [&](std::size_t b) { return graphs[b].in[q.answer_var].at(0).first; };
        if (last(0) != last(1)) throw UnsupportedShape("up branches must share the final projection");
        plan.shape = Shape::UP;
    } else {
        throw UnsupportedShape("unsupported union structure");
    }
    for (std::size_t b = 0; b < branches.size(); ++b) {
        plan.outputs.push_back(build_plan(q, graphs[b], q.answer_var, plan));
    }
    return plan;
}

Shape shape_of(const ConjunctiveQuery& q) { return plan_query(q).shape; }

std::optional<Shape> try_shape_of(const ConjunctiveQuery& q) {
    try {
        return shape_of(q);
    } catch (const UnsupportedShape&) {
        return std::nullopt;
    }
}

const ShapeTemplate& shape_template(Shape s) {
    static const std::array<ShapeTemplate, 9> templates = [] {
        std::array<ShapeTemplate, 9> t;
        auto mk = [](Shape tag, std::uint32_t n, std::vector<std::pair<std::uint32_t, std::uint32_t>> e,
                     std::uint32_t dist, std::vector<std::vector<std::uint32_t>> br = {}) {
            return ShapeTemplate{tag, QueryShape{n, std::move(e), dist}, std::move(br)};
        };
        t[0] = mk(Shape::P1, 2, {{0, 1}}, 1);
        t[1] = mk(Shape::P2, 3, {{0, 1}, {1, 2}}, 2);
        t[2] = mk(Shape::P3, 4, {{0, 1}, {1, 2}, {2, 3}}, 3);
        t[3] = mk(Shape::I2, 3, {{0, 2}, {1, 2}}, 2);
        t[4] = mk(Shape::I3, 4, {{0, 3}, {1, 3}, {2, 3}}, 3);
        t[5] = mk(Shape::IP, 4, {{0, 2}, {1, 2}, {2, 3}}, 3);
        t[6] = mk(Shape::PI, 4, {{0, 1}, {1, 3}, {2, 3}}, 3);
        t[7] = mk(Shape::U2, 3, {{0, 2}, {1, 2}}, 2, {{0}, {1}});
        t[8] = mk(Shape::UP, 4, {{0, 2}, {1, 2}, {2, 3}}, 3, {{0, 2}, {1, 2}});
        return t;
    }();
    return templates[static_cast<std::size_t>(s)];
}

ConjunctiveQuery instantiate(const QueryShape& shape, const Labeling& f, const SymbolTable& st,
                             const std::vector<std::vector<std::uint32_t>>& branches) {
    if (f.node_constants.size() != shape.node_count) throw InstantiationError("labeling does not cover every node");
    if (f.edge_labels.size() != shape.edges.size()) throw InstantiationError("labeling does not cover every edge");
    if (shape.distinguished >= shape.node_count) throw InstantiationError("distinguished node out of range");
    if (f.node_constants[shape.distinguished]) {
        throw InstantiationError("distinguished node must be labeled with the answer variable");
    }
    ConjunctiveQuery q;
    std::vector<std::uint32_t> var_of(shape.node_count, 0);
    q.answer_var = q.add_var("x");
    var_of[shape.distinguished] = q.answer_var;
    for (std::uint32_t n = 0; n < shape.node_count; ++n) {
        if (n != shape.distinguished && !f.node_constants[n]) var_of[n] = q.add_var("v" + std::to_string(n));
    }
    auto term = [&](std::uint32_t n) {
        return f.node_constants[n] ? Term::constant(*f.node_constants[n]) : Term::var(var_of[n]);
    };
    for (std::size_t i = 0; i < shape.edges.size(); ++i) {
        auto [u, v] = shape.edges[i];
        if (u >= shape.node_count || v >= shape.node_count) throw InstantiationError("edge endpoint out of range");
        RelId r = f.edge_labels[i];
        if (r >= st.relation_count()) throw InstantiationError("unknown relation id in labeling");
        auto is_concept = [&](std::uint32_t n) { return f.node_constants[n] && st.is_concept(*f.node_constants[n]); };
        Atom a;
        a.rel = r;
        if (r == kTypeRel) {
            if (is_concept(v) && !is_concept(u)) {
                a.head = term(u);
                a.tail = term(v);
            } else if (is_concept(u) && !is_concept(v)) {
                a.head = term(v);
                a.tail = term(u);
            } else {
                throw InstantiationError("type edge needs exactly one concept end");
            }
        } else {
            if (is_concept(u) || is_concept(v)) throw InstantiationError("concept on a non-type edge");
            a.head = term(u);
            a.tail = term(v);
        }
        q.atoms.push_back(a);
    }
    q.branches = branches;
    for (auto n : f.node_constants) {
        if (n && *n >= st.node_count()) throw InstantiationError("unknown constant in labeling");
    }
    validate(q, st);
    shape_of(q);
    return q;
}

ConjunctiveQuery instantiate(const ShapeTemplate& t, const Labeling& f, const SymbolTable& st) {
    return instantiate(t.graph, f, st, t.branches);
}

}  // namespace omqa
