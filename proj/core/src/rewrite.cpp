#include "omqa/rewrite.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <unordered_map>

#include "omqa/error.hpp"

namespace omqa {

namespace {

bool droppable(const ConjunctiveQuery& q, const Term& t) {
    return t.is_var() && t.id != q.answer_var && q.occurrences(t.id) == 1;
}

// T is a non-answer variable whose only other occurrence is as the object of
// one role atom: the shape R5-gen itself produces. Expanding it again would
// grow queries without bound.
bool leaf_existential(const ConjunctiveQuery& q, const Term& t, std::size_t type_atom) {
    if (!t.is_var() || t.id == q.answer_var || q.occurrences(t.id) != 2) return false;
    for (std::size_t i = 0; i < q.atoms.size(); ++i) {
        if (i == type_atom) continue;
        const auto& a = q.atoms[i];
        if (a.rel != kTypeRel && a.tail == t && !(a.head == t)) return true;
    }
    return false;
}

struct Emitter {
    const ConjunctiveQuery& q;
    const SymbolTable& st;
    std::size_t max_atoms;
    std::vector<RewriteResult>& out;

    void emit(ConjunctiveQuery r, RewriteStep step) {
        r.compact();
        if (r.atoms.size() > max_atoms) return;
        if (!is_well_formed(r, st)) return;
        out.push_back({std::move(r), std::move(step)});
    }

    // q with atom i replaced by `repl` (in place, extras appended)
    ConjunctiveQuery replaced(const ConjunctiveQuery& base, std::size_t i, std::vector<Atom> repl) const {
        ConjunctiveQuery r = base;
        r.atoms.erase(r.atoms.begin() + static_cast<std::ptrdiff_t>(i));
        r.atoms.insert(r.atoms.begin() + static_cast<std::ptrdiff_t>(i), repl.begin(), repl.end());
        return r;
    }
};

RewriteStep mk(Rule r, Direction d, const Axiom& ax) { return RewriteStep{r, d, ax, {}}; }

std::size_t budget(const ConjunctiveQuery& q, const RewriteOptions& opt) {
    return opt.max_atoms ? opt.max_atoms : 2 * q.atoms.size();
}

}  // namespace

std::vector<RewriteResult> generalize_step(const ConjunctiveQuery& q, const Ontology& o, const RewriteOptions& opt) {
    if (q.is_union()) throw ContractError("rewriting applies to conjunctive queries");
    std::vector<RewriteResult> out;
    Emitter em{q, o.symbols(), budget(q, opt), out};
    const auto D = Direction::Gen;
    for (std::size_t i = 0; i < q.atoms.size(); ++i) {
        const Atom a = q.atoms[i];
        if (a.rel == kTypeRel) {
            for (const auto& ax : o.axioms()) {
                if (ax.a != a.tail.id) continue;
                if (ax.kind == AxiomKind::SubConcept) {
                    em.emit(em.replaced(q, i, {{kTypeRel, a.head, Term::constant(ax.b)}}), mk(Rule::R1, D, ax));
                } else if (ax.kind == AxiomKind::SubExists) {
                    ConjunctiveQuery r = q;
                    Term z = Term::var(r.fresh_var());
                    em.emit(em.replaced(r, i, {{ax.role.rel, a.head, z}}), mk(Rule::R3, D, ax));
                } else if (ax.kind == AxiomKind::SubExistsTyped && !leaf_existential(q, a.head, i)) {
                    ConjunctiveQuery r = q;
                    Term z = Term::var(r.fresh_var());
                    em.emit(em.replaced(r, i, {{ax.role.rel, a.head, z}, {kTypeRel, z, Term::constant(ax.b)}}),
                            mk(Rule::R5, D, ax));
                }
            }
        } else {
            for (const auto& ax : o.axioms()) {
                if (ax.kind == AxiomKind::ExistsSub && ax.role.rel == a.rel) {
                    if (!ax.role.inverse && droppable(q, a.tail)) {
                        em.emit(em.replaced(q, i, {{kTypeRel, a.head, Term::constant(ax.a)}}), mk(Rule::R2, D, ax));
                    } else if (ax.role.inverse && droppable(q, a.head)) {
                        em.emit(em.replaced(q, i, {{kTypeRel, a.tail, Term::constant(ax.a)}}), mk(Rule::R4, D, ax));
                    }
                } else if (ax.kind == AxiomKind::SubRole && ax.role.rel == a.rel) {
                    em.emit(em.replaced(q, i, {{ax.s, a.head, a.tail}}), mk(Rule::R6, D, ax));
                } else if (ax.kind == AxiomKind::InvSubRole && ax.role.rel == a.rel) {
                    em.emit(em.replaced(q, i, {{ax.s, a.tail, a.head}}), mk(Rule::R7, D, ax));
                }
            }
        }
        if (opt.r8) {
            const auto& st = o.symbols();
            for (int pos = 0; pos < 2; ++pos) {
                const Term& t = pos == 0 ? a.head : a.tail;
                if (!t.is_const() || !st.is_entity(t.id)) continue;
                ConjunctiveQuery r = q;
                Term z = Term::var(r.fresh_var());
                (pos == 0 ? r.atoms[i].head : r.atoms[i].tail) = z;
                // abstracting the last anchor leaves nothing to embed from
                const bool anchored = std::any_of(r.atoms.begin(), r.atoms.end(), [](const Atom& x) {
                    return x.head.is_const() || x.tail.is_const();
                });
                if (!anchored) continue;
                em.emit(std::move(r), RewriteStep{Rule::R8, D, std::nullopt, {}});
            }
        }
    }
    return out;
}

namespace {

struct TermKey {
    bool is_const;
    std::uint32_t id;
    auto operator<=>(const TermKey&) const = default;
};

// Most general unifier of atoms i and j; nullopt when constants clash or the
// answer variable would be bound to a constant.
std::optional<std::vector<std::pair<std::uint32_t, Term>>> unify(const ConjunctiveQuery& q, std::size_t i,
                                                                 std::size_t j) {
    std::map<TermKey, TermKey> parent;
    std::function<TermKey(TermKey)> find = [&](TermKey k) {
        auto it = parent.find(k);
        if (it == parent.end() || it->second == k) return k;
        return it->second = find(it->second);
    };
    auto key = [](const Term& t) { return TermKey{t.is_const(), t.id}; };
    auto join = [&](const Term& x, const Term& y) {
        TermKey a = find(key(x)), b = find(key(y));
        if (a == b) return true;
        if (a.is_const && b.is_const) return false;
        // representative preference: constant, then answer variable, then lower index
        auto rank = [&](TermKey k) {
            if (k.is_const) return 0;
            if (k.id == q.answer_var) return 1;
            return 2;
        };
        if (rank(b) < rank(a) || (rank(b) == rank(a) && b < a)) std::swap(a, b);
        parent[b] = a;
        parent.emplace(a, a);
        return true;
    };
    const auto& x = q.atoms[i];
    const auto& y = q.atoms[j];
    if (!join(x.head, y.head) || !join(x.tail, y.tail)) return std::nullopt;
    std::vector<std::pair<std::uint32_t, Term>> theta;
    for (std::uint32_t v = 0; v < q.var_count(); ++v) {
        TermKey r = find({false, v});
        if (r == TermKey{false, v}) continue;
        if (v == q.answer_var && r.is_const) return std::nullopt;
        theta.push_back({v, r.is_const ? Term::constant(r.id) : Term::var(r.id)});
    }
    if (theta.empty()) return std::nullopt;
    return theta;
}

}  // namespace

std::vector<RewriteResult> specialize_step(const ConjunctiveQuery& q, const Ontology& o, const RewriteOptions& opt) {
    if (q.is_union()) throw ContractError("rewriting applies to conjunctive queries");
    std::vector<RewriteResult> out;
    Emitter em{q, o.symbols(), budget(q, opt), out};
    const auto D = Direction::Spec;
    for (std::size_t i = 0; i < q.atoms.size(); ++i) {
        const Atom a = q.atoms[i];
        if (a.rel == kTypeRel) {
            for (const auto& ax : o.axioms()) {
                if (ax.kind == AxiomKind::SubConcept && ax.b == a.tail.id) {
                    em.emit(em.replaced(q, i, {{kTypeRel, a.head, Term::constant(ax.a)}}), mk(Rule::R1, D, ax));
                } else if (ax.kind == AxiomKind::ExistsSub && ax.a == a.tail.id) {
                    ConjunctiveQuery r = q;
                    Term z = Term::var(r.fresh_var());
                    if (!ax.role.inverse) {
                        em.emit(em.replaced(r, i, {{ax.role.rel, a.head, z}}), mk(Rule::R2, D, ax));
                    } else {
                        em.emit(em.replaced(r, i, {{ax.role.rel, z, a.head}}), mk(Rule::R4, D, ax));
                    }
                }
            }
            continue;
        }
        for (const auto& ax : o.axioms()) {
            if (ax.kind == AxiomKind::SubExists && ax.role.rel == a.rel && droppable(q, a.tail)) {
                em.emit(em.replaced(q, i, {{kTypeRel, a.head, Term::constant(ax.a)}}), mk(Rule::R3, D, ax));
            } else if (ax.kind == AxiomKind::SubExistsTyped && ax.role.rel == a.rel && !opt.preserve_shared) {
                const Term& t2 = a.tail;
                if (!t2.is_var() || t2.id == q.answer_var || q.occurrences(t2.id) != 2) continue;
                Atom typed{kTypeRel, t2, Term::constant(ax.b)};
                auto it = std::find(q.atoms.begin(), q.atoms.end(), typed);
                if (it == q.atoms.end()) continue;
                ConjunctiveQuery r = q;
                r.atoms[i] = {kTypeRel, a.head, Term::constant(ax.a)};
                r.atoms.erase(r.atoms.begin() + (it - q.atoms.begin()));
                em.emit(std::move(r), mk(Rule::R5, D, ax));
            } else if (ax.kind == AxiomKind::SubRole && ax.s == a.rel) {
                em.emit(em.replaced(q, i, {{ax.role.rel, a.head, a.tail}}), mk(Rule::R6, D, ax));
            } else if (ax.kind == AxiomKind::InvSubRole && ax.s == a.rel) {
                em.emit(em.replaced(q, i, {{ax.role.rel, a.tail, a.head}}), mk(Rule::R7, D, ax));
            }
        }
    }
    if (opt.r8) {
        for (std::size_t i = 0; i < q.atoms.size(); ++i) {
            for (std::size_t j = i + 1; j < q.atoms.size(); ++j) {
                if (q.atoms[i].rel != q.atoms[j].rel) continue;
                auto theta = unify(q, i, j);
                if (!theta) continue;
                if (opt.preserve_shared) {
                    bool ok = true;
                    for (const auto& [v, t] : *theta) {
                        if (q.occurrences(v) > 1) ok = false;
                    }
                    if (!ok) continue;
                }
                ConjunctiveQuery r = q;
                auto apply = [&](Term& t) {
                    if (!t.is_var()) return;
                    for (const auto& [v, img] : *theta) {
                        if (v == t.id) {
                            t = img;
                            return;
                        }
                    }
                };
                for (auto& at : r.atoms) {
                    apply(at.head);
                    apply(at.tail);
                }
                em.emit(std::move(r), RewriteStep{Rule::R8, D, std::nullopt, *theta});
            }
        }
    }
    return out;
}

bool RewriteSet::contains(const ConjunctiveQuery& q) const {
    auto key = canonical_form(q);
    return std::any_of(members.begin(), members.end(), [&](const RewriteMember& m) { return m.key == key; });
}

namespace {

constexpr std::size_t kClosureLimit = 200000;

template <class StepFn>
RewriteSet closure(const ConjunctiveQuery& q, const Ontology& o, std::optional<std::size_t> depth,
                   RewriteOptions opt, StepFn step) {
    if (q.is_union()) throw ContractError("rewriting applies to conjunctive queries");
    if (!opt.max_atoms) opt.max_atoms = 2 * q.atoms.size();
    RewriteSet set;
    set.origin = q;
    set.depth = depth;
    ConjunctiveQuery start = q;
    start.compact();
    std::unordered_map<std::string, std::size_t> index;
    set.members.push_back({start, canonical_form(start), {}});
    index.emplace(set.members[0].key, 0);
    std::vector<std::size_t> frontier{0};
    for (std::size_t level = 0; !frontier.empty() && (!depth || level < *depth); ++level) {
        std::vector<std::size_t> next;
        for (std::size_t m : frontier) {
            auto results = step(set.members[m].query, o, opt);
            for (auto& r : results) {
                auto key = canonical_form(r.query);
                if (index.count(key)) continue;
                auto trace = set.members[m].trace;
                trace.push_back(r.step);
                index.emplace(key, set.members.size());
                next.push_back(set.members.size());
                set.members.push_back({std::move(r.query), std::move(key), std::move(trace)});
                if (set.members.size() > kClosureLimit) throw ContractError("rewrite closure exceeded its size limit");
            }
        }
        frontier = std::move(next);
    }
    return set;
}

}  // namespace

RewriteSet gen_closure(const ConjunctiveQuery& q, const Ontology& o, std::optional<std::size_t> depth,
                       const RewriteOptions& opt) {
    return closure(q, o, depth, opt, [](const ConjunctiveQuery& x, const Ontology& ont, const RewriteOptions& op) {
        return generalize_step(x, ont, op);
    });
}

RewriteSet spec_closure(const ConjunctiveQuery& q, const Ontology& o, std::optional<std::size_t> depth,
                        const RewriteOptions& opt) {
    return closure(q, o, depth, opt, [](const ConjunctiveQuery& x, const Ontology& ont, const RewriteOptions& op) {
        return specialize_step(x, ont, op);
    });
}

RewriteSet rew(const ConjunctiveQuery& q, const Ontology& o, const std::vector<Shape>& shapes) {
    RewriteOptions opt;
    opt.preserve_shared = true;
    auto allowed = [&](const ConjunctiveQuery& x) {
        auto s = try_shape_of(x);
        return s && std::find(shapes.begin(), shapes.end(), *s) != shapes.end();
    };
    RewriteSet out;
    out.origin = q;
    out.depth = std::nullopt;
    out.members.push_back({q, canonical_form(q), {}});
    std::unordered_map<std::string, bool> seen{{out.members[0].key, true}};
    for (std::size_t b = 0; b < q.branch_count(); ++b) {
        auto branch = q.branch(b);
        branch.compact();
        auto spec = spec_closure(branch, o, std::nullopt, opt);
        for (auto& m : spec.members) {
            if (q.is_union() && m.trace.empty()) continue;  // the branch itself is covered by q
            if (!allowed(m.query) || seen.count(m.key)) continue;
            seen.emplace(m.key, true);
            out.members.push_back(std::move(m));
        }
    }
    return out;
}

std::string step_to_string(const RewriteStep& s, const SymbolTable& st) {
    std::string out = "R" + std::to_string(static_cast<int>(s.rule)) + (s.dir == Direction::Gen ? "-gen" : "-spec");
    if (s.axiom) out += " [" + axiom_to_string(*s.axiom, st) + "]";
    if (s.rule == Rule::R8 && s.dir == Direction::Spec) out += " [unify]";
    if (s.rule == Rule::R8 && s.dir == Direction::Gen) out += " [abstract anchor]";
    return out;
}

}  // namespace omqa
