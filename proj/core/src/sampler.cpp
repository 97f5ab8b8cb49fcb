#include "omqa/sampler.hpp"

#include <algorithm>
#include <iterator>
#include <cmath>
#include <map>
#include <unordered_set>

#include "omqa/error.hpp"
#include "omqa/parallel.hpp"
#include "omqa/rewrite.hpp"

namespace omqa {

std::string_view strategy_name(Strategy s) {
    switch (s) {
        case Strategy::Plain: return "plain";
        case Strategy::Gen: return "gen";
        case Strategy::Spec: return "spec";
        case Strategy::Onto: return "onto";
    }
    return "?";
}

Strategy parse_strategy(std::string_view s) {
    if (s == "plain") return Strategy::Plain;
    if (s == "gen") return Strategy::Gen;
    if (s == "spec") return Strategy::Spec;
    if (s == "onto") return Strategy::Onto;
    throw ConfigError("unknown strategy '" + std::string(s) + "' (expected plain|gen|spec|onto)");
}

std::string_view case_name(EvalCase c) {
    switch (c) {
        case EvalCase::A: return "A";
        case EvalCase::B: return "B";
        case EvalCase::C: return "C";
    }
    return "?";
}

EvalCase parse_case(std::string_view s) {
    if (s == "A" || s == "a") return EvalCase::A;
    if (s == "B" || s == "b") return EvalCase::B;
    if (s == "C" || s == "c") return EvalCase::C;
    throw ConfigError("unknown evaluation case '" + std::string(s) + "' (expected A|B|C)");
}

namespace {

std::vector<NodeId> set_minus(const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
    std::vector<NodeId> out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

bool has_duplicate_atoms(const ConjunctiveQuery& q) {
    for (std::size_t i = 0; i < q.atoms.size(); ++i) {
        for (std::size_t j = i + 1; j < q.atoms.size(); ++j) {
            if (q.atoms[i] == q.atoms[j]) return true;
        }
    }
    return false;
}

void check_train_shapes(const std::vector<Shape>& shapes) {
    for (Shape s : shapes) {
        if (std::find(kTrainShapes.begin(), kTrainShapes.end(), s) == kTrainShapes.end()) {
            throw ConfigError("shape " + std::string(shape_name(s)) + " is not a training shape");
        }
    }
}

bool is_train_shape(const ConjunctiveQuery& q) {
    auto s = try_shape_of(q);
    return s && std::find(kTrainShapes.begin(), kTrainShapes.end(), *s) != kTrainShapes.end();
}

std::vector<char> source_nodes(const QueryShape& s) {
    std::vector<char> src(s.node_count, 1);
    for (auto [u, v] : s.edges) src[v] = 0;
    return src;
}

// Answer-first backward walk over a template (edges point toward the answer).
class Walker {
public:
    Walker(const KnowledgeGraph& g, const ShapeTemplate& t) : g_(g), t_(t), src_(source_nodes(t.graph)) {
        into_.resize(t.graph.node_count);
        for (std::uint32_t e = 0; e < t.graph.edges.size(); ++e) into_[t.graph.edges[e].second].push_back(e);
        const auto& st = g.symbols();
        for (NodeId e : st.entities()) {
            if (!g.in_edges(e).empty() || !g.successors(e, kTypeRel).empty()) pool_.push_back(e);
        }
    }

    bool empty() const { return pool_.empty(); }

    std::optional<ConjunctiveQuery> draw(Rng& rng) const {
        if (pool_.empty()) return std::nullopt;
        const auto& shape = t_.graph;
        std::vector<NodeId> ent(shape.node_count, 0);
        Labeling f;
        f.node_constants.assign(shape.node_count, std::nullopt);
        f.edge_labels.assign(shape.edges.size(), 0);
        ent[shape.distinguished] = pool_[rng.index(pool_.size())];
        std::vector<std::uint32_t> stack{shape.distinguished};
        while (!stack.empty()) {
            std::uint32_t w = stack.back();
            stack.pop_back();
            NodeId x = ent[w];
            auto in = g_.in_edges(x);
            for (std::uint32_t e : into_[w]) {
                std::uint32_t u = shape.edges[e].first;
                auto types = src_[u] ? g_.successors(x, kTypeRel) : std::span<const NodeId>{};
                std::size_t total = in.size() + types.size();
                if (total == 0) return std::nullopt;
                std::size_t k = rng.index(total);
                if (k < in.size()) {
                    f.edge_labels[e] = in[k].rel;
                    if (src_[u]) {
                        f.node_constants[u] = in[k].head;
                    } else {
                        ent[u] = in[k].head;
                        stack.push_back(u);
                    }
                } else {
                    f.edge_labels[e] = kTypeRel;
                    f.node_constants[u] = types[k - in.size()];
                }
            }
        }
        auto q = instantiate(t_, f, g_.symbols());
        if (has_duplicate_atoms(q)) return std::nullopt;
        return q;
    }

private:
    const KnowledgeGraph& g_;
    const ShapeTemplate& t_;
    std::vector<char> src_;
    std::vector<std::vector<std::uint32_t>> into_;
    std::vector<NodeId> pool_;
};

struct ShapeBatch {
    std::vector<TrainSample> samples;
    SampleReport::Line line;
    std::vector<std::string> warnings;
};

// Draws up to n distinct queries of one shape; positives via `answer_graph`.
ShapeBatch draw_shape(const KnowledgeGraph& walk_graph, const KnowledgeGraph& answer_graph, Shape shape,
                      std::size_t n, Rng rng, Strategy strategy) {
    ShapeBatch b;
    b.line.shape = shape;
    b.line.requested = n;
    if (n == 0) return b;
    Walker w(walk_graph, shape_template(shape));
    std::unordered_set<std::string> seen;
    const std::size_t budget = 50 * n + 100;
    while (b.samples.size() < n && b.line.attempts < budget && !w.empty()) {
        ++b.line.attempts;
        auto q = w.draw(rng);
        if (!q) continue;
        if (!seen.insert(canonical_form(*q)).second) continue;
        TrainSample s;
        s.positives = answers(*q, answer_graph);
        s.query = std::move(*q);
        s.strategy = strategy;
        b.samples.push_back(std::move(s));
    }
    b.line.produced = b.samples.size();
    if (b.line.produced < n) {
        b.warnings.push_back("shape " + std::string(shape_name(shape)) + ": " + std::to_string(b.line.produced) +
                             " of " + std::to_string(n) + " queries after " + std::to_string(b.line.attempts) +
                             " attempts");
    }
    return b;
}

void merge_report(SampleReport* report, std::vector<ShapeBatch>& batches) {
    if (!report) return;
    for (auto& b : batches) {
        report->lines.push_back(b.line);
        for (auto& w : b.warnings) report->warnings.push_back(std::move(w));
    }
}

}  // namespace

std::vector<TrainSample> sample_plain(const KnowledgeGraph& g, const std::vector<Shape>& shapes, std::size_t n,
                                      std::uint64_t seed, SampleReport* report) {
    check_train_shapes(shapes);
    std::vector<ShapeBatch> batches(shapes.size());
    parallel_for(shapes.size(), [&](std::size_t i) {
        auto rng = Rng::stream(seed, "plain/" + std::string(shape_name(shapes[i])));
        batches[i] = draw_shape(g, g, shapes[i], n, rng, Strategy::Plain);
    });
    merge_report(report, batches);
    std::vector<TrainSample> out;
    for (auto& b : batches) std::move(b.samples.begin(), b.samples.end(), std::back_inserter(out));
    return out;
}

std::vector<TrainSample> sample_certain(const KnowledgeGraph& g, const Ontology& o, const std::vector<Shape>& shapes,
                                        std::size_t n, std::uint64_t seed, const CertainOptions& opt,
                                        SampleReport* report) {
    check_train_shapes(shapes);
    const KnowledgeGraph sat = saturate(g, o);
    const Strategy tag = opt.mode == CertainMode::Gen ? Strategy::Gen : Strategy::Spec;
    std::vector<ShapeBatch> batches(shapes.size());
    std::vector<std::vector<TrainSample>> extras(shapes.size());
    parallel_for(shapes.size(), [&](std::size_t i) {
        auto rng = Rng::stream(seed, "certain/" + std::string(shape_name(shapes[i])));
        batches[i] = draw_shape(g, sat, shapes[i], n, rng, tag);
        for (auto& s : batches[i].samples) {
            if (opt.mode == CertainMode::Gen) {
                auto cl = gen_closure(s.query, o, opt.depth);
                for (std::size_t m = 1; m < cl.members.size(); ++m) {
                    auto& q = cl.members[m].query;
                    if (!is_train_shape(q)) continue;
                    s.gens.push_back(q);
                    extras[i].push_back({q, answers(q, sat), {}, tag});
                }
            } else {
                auto cl = spec_closure(s.query, o, opt.depth);
                for (std::size_t m = 1; m < cl.members.size(); ++m) {
                    auto& q = cl.members[m].query;
                    if (!is_train_shape(q)) continue;
                    auto pos = answers(q, sat);
                    if (pos.empty()) continue;
                    extras[i].push_back({q, std::move(pos), {}, tag});
                }
            }
        }
    });
    merge_report(report, batches);
    std::vector<TrainSample> out;
    std::unordered_set<std::string> seen;
    auto add = [&](TrainSample&& s) {
        if (seen.insert(canonical_form(s.query)).second) out.push_back(std::move(s));
    };
    for (auto& b : batches) {
        for (auto& s : b.samples) add(std::move(s));
    }
    for (auto& e : extras) {
        for (auto& s : e) add(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// labelings

namespace {

struct AtomEdge {
    std::uint32_t h, t;  // shape nodes in atom orientation
    RelId rel;
};

std::vector<AtomEdge> atom_edges(const QueryShape& shape, const Labeling& f, const SymbolTable& st) {
    auto is_concept = [&](std::uint32_t n) { return f.node_constants[n] && st.is_concept(*f.node_constants[n]); };
    std::vector<AtomEdge> out;
    for (std::size_t i = 0; i < shape.edges.size(); ++i) {
        auto [u, v] = shape.edges[i];
        RelId r = f.edge_labels[i];
        if (r == kTypeRel && is_concept(u) && !is_concept(v)) {
            out.push_back({v, u, r});
        } else {
            out.push_back({u, v, r});
        }
    }
    return out;
}

bool contains(const std::vector<NodeId>& v, NodeId x) { return std::binary_search(v.begin(), v.end(), x); }

// A ∈ range(p) or ∃q ∈ inv(p): A ∈ dom(q)
bool fits_range(const Ontology& o, RelId p, NodeId a) {
    if (contains(o.derived(p).range, a)) return true;
    for (RelId q : o.derived(p).inv) {
        if (contains(o.derived(q).dom, a)) return true;
    }
    return false;
}

// A ∈ dom(p) or ∃q ∈ inv(p): A ∈ range(q)
bool fits_domain(const Ontology& o, RelId p, NodeId a) {
    if (contains(o.derived(p).dom, a)) return true;
    for (RelId q : o.derived(p).inv) {
        if (contains(o.derived(q).range, a)) return true;
    }
    return false;
}

bool common_super(const Ontology& o, NodeId a, NodeId b) {
    auto sa = o.closure().concept_supers(a);
    auto sb = o.closure().concept_supers(b);
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    std::vector<NodeId> both;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(both));
    return !both.empty();
}

bool rel_in(const std::vector<RelId>& v, RelId r) { return std::binary_search(v.begin(), v.end(), r); }

}  // namespace

bool is_valid_labeling(const QueryShape& shape, const Labeling& f, const Ontology& o) {
    if (f.node_constants.size() != shape.node_count || f.edge_labels.size() != shape.edges.size()) {
        throw InstantiationError("labeling does not match the shape");
    }
    const auto& st = o.symbols();
    auto edges = atom_edges(shape, f, st);
    auto concept_of = [&](std::uint32_t n) { return *f.node_constants[n]; };
    for (std::size_t i = 0; i < edges.size(); ++i) {
        for (std::size_t j = 0; j < edges.size(); ++j) {
            if (i == j) continue;
            const auto& e = edges[i];
            const auto& e2 = edges[j];
            // sequential e = (n1,n2), e2 = (n2,n3)
            if (e.t == e2.h) {
                bool ok = false;
                if (e2.rel == kTypeRel) {
                    ok = e.rel != kTypeRel && fits_range(o, e.rel, concept_of(e2.t));
                } else if (e.rel != kTypeRel) {
                    ok = rel_in(o.derived(e.rel).follows, e2.rel);
                }
                if (!ok) return false;
            }
            if (i > j) continue;  // the symmetric cases below need each pair once
            // converging e = (n1,n2), e2 = (n3,n2)
            if (e.t == e2.t) {
                if (e.rel == kTypeRel || e2.rel == kTypeRel) return false;  // concept nodes have one edge
                if (!rel_in(o.derived(e.rel).inter_r, e2.rel)) return false;
            }
            // diverging e = (n1,n2), e2 = (n1,n3)
            if (e.h == e2.h) {
                bool ok;
                if (e.rel == kTypeRel && e2.rel == kTypeRel) {
                    ok = common_super(o, concept_of(e.t), concept_of(e2.t));
                } else if (e.rel == kTypeRel) {
                    ok = fits_domain(o, e2.rel, concept_of(e.t));
                } else if (e2.rel == kTypeRel) {
                    ok = fits_domain(o, e.rel, concept_of(e2.t));
                } else {
                    ok = rel_in(o.derived(e.rel).inter_d, e2.rel);
                }
                if (!ok) return false;
            }
        }
    }
    return true;
}

std::vector<Labeling> candidate_labelings(const QueryShape& shape, const SymbolTable& st) {
    std::vector<std::uint32_t> degree(shape.node_count, 0);
    for (auto [u, v] : shape.edges) {
        ++degree[u];
        ++degree[v];
    }
    auto can_hold_concept = [&](std::uint32_t n) { return n != shape.distinguished && degree[n] == 1; };
    struct Option {
        RelId rel;
        std::optional<std::uint32_t> node;
        NodeId concept_id = 0;
    };
    std::vector<std::vector<Option>> options(shape.edges.size());
    for (std::size_t i = 0; i < shape.edges.size(); ++i) {
        for (RelId r = 1; r < st.relation_count(); ++r) options[i].push_back({r, std::nullopt, 0});
        for (std::uint32_t end : {shape.edges[i].first, shape.edges[i].second}) {
            if (!can_hold_concept(end)) continue;
            for (NodeId c : st.concepts()) options[i].push_back({kTypeRel, end, c});
        }
    }
    std::vector<Labeling> out;
    Labeling cur;
    cur.node_constants.assign(shape.node_count, std::nullopt);
    cur.edge_labels.assign(shape.edges.size(), 0);
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (i == shape.edges.size()) {
            out.push_back(cur);
            return;
        }
        for (const auto& opt : options[i]) {
            cur.edge_labels[i] = opt.rel;
            if (opt.node) cur.node_constants[*opt.node] = opt.concept_id;
            rec(i + 1);
            if (opt.node) cur.node_constants[*opt.node] = std::nullopt;
        }
    };
    rec(0);
    return out;
}

std::vector<Labeling> valid_labelings(const QueryShape& shape, const Ontology& o) {
    auto all = candidate_labelings(shape, o.symbols());
    std::vector<Labeling> out;
    for (auto& f : all) {
        if (is_valid_labeling(shape, f, o)) out.push_back(std::move(f));
    }
    return out;
}

// ---------------------------------------------------------------------------
// strategic sampling

namespace {

// Query with the unlabeled sources as variables; `anchor_vars` receives them
// in node order.
ConjunctiveQuery pattern_query(const ShapeTemplate& t, const Labeling& f, const SymbolTable& st,
                               std::vector<std::uint32_t>* anchor_vars, std::vector<std::uint32_t>* anchor_nodes) {
    const auto& shape = t.graph;
    auto src = source_nodes(shape);
    ConjunctiveQuery q;
    std::vector<std::uint32_t> var_of(shape.node_count, 0);
    q.answer_var = q.add_var("x");
    var_of[shape.distinguished] = q.answer_var;
    for (std::uint32_t n = 0; n < shape.node_count; ++n) {
        if (n == shape.distinguished || f.node_constants[n]) continue;
        var_of[n] = q.add_var("v" + std::to_string(n));
        if (src[n]) {
            if (anchor_vars) anchor_vars->push_back(var_of[n]);
            if (anchor_nodes) anchor_nodes->push_back(n);
        }
    }
    auto term = [&](std::uint32_t n) {
        return f.node_constants[n] ? Term::constant(*f.node_constants[n]) : Term::var(var_of[n]);
    };
    for (const auto& e : atom_edges(shape, f, st)) q.atoms.push_back({e.rel, term(e.h), term(e.t)});
    q.branches = t.branches;
    return q;
}

std::string labeling_key(const Labeling& f) {
    std::string k;
    for (auto r : f.edge_labels) k += std::to_string(r) + ",";
    k += "|";
    for (auto& n : f.node_constants) k += (n ? std::to_string(*n) : std::string("_")) + ",";
    return k;
}

// Shape-preserving generalizations: every edge label to a super-role and every
// concept to a super-concept (R6 / R1 applied any number of times).
void generalize_labeling(const Labeling& f, const Ontology& o, std::map<std::string, Labeling>& out) {
    std::vector<std::vector<RelId>> rels(f.edge_labels.size());
    for (std::size_t i = 0; i < f.edge_labels.size(); ++i) {
        if (f.edge_labels[i] == kTypeRel) {
            rels[i] = {kTypeRel};
            continue;
        }
        for (Role r : o.closure().role_supers({f.edge_labels[i], false})) {
            if (!r.inverse && r.rel != kTypeRel) rels[i].push_back(r.rel);
        }
        if (rels[i].empty()) rels[i].push_back(f.edge_labels[i]);
    }
    std::vector<std::vector<std::optional<NodeId>>> nodes(f.node_constants.size());
    for (std::size_t n = 0; n < f.node_constants.size(); ++n) {
        if (!f.node_constants[n] || !o.symbols().is_concept(*f.node_constants[n])) {
            nodes[n] = {f.node_constants[n]};
            continue;
        }
        for (NodeId c : o.closure().concept_supers(*f.node_constants[n])) nodes[n].push_back(c);
    }
    Labeling cur = f;
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        std::size_t ne = rels.size();
        if (i == ne + nodes.size()) {
            out.emplace(labeling_key(cur), cur);
            return;
        }
        if (i < ne) {
            for (RelId r : rels[i]) {
                cur.edge_labels[i] = r;
                rec(i + 1);
            }
        } else {
            for (auto c : nodes[i - ne]) {
                cur.node_constants[i - ne] = c;
                rec(i + 1);
            }
        }
    };
    rec(0);
}

}  // namespace

std::vector<std::vector<NodeId>> anchor_tuples(const ShapeTemplate& t, const Labeling& f, const KnowledgeGraph& g,
                                               std::size_t limit, bool* truncated) {
    if (!t.branches.empty()) throw ContractError("anchor enumeration is defined for conjunctive shapes");
    if (truncated) *truncated = false;
    std::vector<std::uint32_t> anchors;
    auto q = pattern_query(t, f, g.symbols(), &anchors, nullptr);
    auto xs = answers(q, g);
    std::set<std::vector<NodeId>> found;
    if (xs.empty()) return {};
    // BFS order from the answer variable; each later variable has a link atom
    // to an earlier one (shapes are trees).
    std::vector<std::uint32_t> order{q.answer_var};
    std::vector<std::int64_t> link(q.var_count(), -1);
    std::vector<char> placed(q.var_count(), 0);
    placed[q.answer_var] = 1;
    for (std::size_t k = 0; k < order.size(); ++k) {
        for (std::size_t i = 0; i < q.atoms.size(); ++i) {
            const auto& a = q.atoms[i];
            for (const Term* tm : {&a.head, &a.tail}) {
                if (!tm->is_var() || placed[tm->id]) continue;
                const Term& other = tm == &a.head ? a.tail : a.head;
                if (other.is_var() && other.id == order[k]) {
                    placed[tm->id] = 1;
                    link[tm->id] = static_cast<std::int64_t>(i);
                    order.push_back(tm->id);
                }
            }
        }
    }
    std::vector<NodeId> val(q.var_count(), 0);
    std::vector<char> bound(q.var_count(), 0);
    auto atom_ok = [&](const Atom& a) {
        auto v = [&](const Term& tm, NodeId& out) {
            if (tm.is_const()) {
                out = tm.id;
                return true;
            }
            if (!bound[tm.id]) return false;
            out = val[tm.id];
            return true;
        };
        NodeId h, tl;
        if (!v(a.head, h) || !v(a.tail, tl)) return true;  // checked later
        return g.contains({h, a.rel, tl});
    };
    bool stop = false;
    std::function<void(std::size_t)> rec = [&](std::size_t k) {
        if (stop) return;
        if (k == order.size()) {
            std::vector<NodeId> tup;
            for (auto v : anchors) tup.push_back(val[v]);
            found.insert(std::move(tup));
            if (found.size() >= limit) {
                stop = true;
                if (truncated) *truncated = true;
            }
            return;
        }
        std::uint32_t v = order[k];
        const auto& a = q.atoms[static_cast<std::size_t>(link[v])];
        bool v_head = a.head.is_var() && a.head.id == v;
        NodeId other = val[(v_head ? a.tail : a.head).id];
        auto cands = v_head ? g.predecessors(other, a.rel) : g.successors(other, a.rel);
        for (NodeId c : cands) {
            val[v] = c;
            bound[v] = 1;
            bool ok = true;
            for (const auto& b : q.atoms) {
                if (!atom_ok(b)) {
                    ok = false;
                    break;
                }
            }
            if (ok) rec(k + 1);
            bound[v] = 0;
            if (stop) return;
        }
    };
    for (NodeId x : xs) {
        val[q.answer_var] = x;
        bound[q.answer_var] = 1;
        rec(1);
        if (stop) break;
    }
    return {found.begin(), found.end()};
}

std::vector<TrainSample> sample_onto(const KnowledgeGraph& g, const Ontology& o, const std::vector<Shape>& shapes,
                                     const OntoOptions& opt, std::uint64_t seed, SampleReport* report) {
    check_train_shapes(shapes);
    if (!(opt.anchor_fraction > 0.0 && opt.anchor_fraction <= 1.0)) {
        throw ConfigError("anchor fraction must lie in (0, 1]");
    }
    const KnowledgeGraph sat = saturate(g, o);
    const auto& st = g.symbols();
    std::vector<ShapeBatch> batches(shapes.size());
    parallel_for(shapes.size(), [&](std::size_t si) {
        auto& b = batches[si];
        const Shape shape = shapes[si];
        const auto& t = shape_template(shape);
        auto rng = Rng::stream(seed, "onto/" + std::string(shape_name(shape)));
        b.line.shape = shape;
        std::map<std::string, Labeling> patterns;
        std::size_t n_valid = 0, n_data = 0;
        for (auto& f : candidate_labelings(t.graph, st)) {
            auto pq = pattern_query(t, f, st, nullptr, nullptr);
            if (has_duplicate_atoms(pq)) continue;
            if (is_valid_labeling(t.graph, f, o)) {
                ++n_valid;
                patterns.emplace(labeling_key(f), f);
            }
            if (!answers(pq, g).empty()) {
                ++n_data;
                generalize_labeling(f, o, patterns);
            }
        }
        // (labeling, anchors) pairs with at least one certain answer
        std::vector<std::pair<const Labeling*, std::vector<NodeId>>> picks;
        for (auto& [key, f] : patterns) {
            bool trunc = false;
            auto tuples = anchor_tuples(t, f, sat, opt.tuple_limit, &trunc);
            if (trunc) {
                b.warnings.push_back("shape " + std::string(shape_name(shape)) + ": anchor enumeration truncated at " +
                                     std::to_string(opt.tuple_limit) + " tuples");
            }
            if (tuples.empty()) continue;
            rng.shuffle(tuples);
            auto keep = static_cast<std::size_t>(std::ceil(opt.anchor_fraction * static_cast<double>(tuples.size())));
            for (std::size_t k = 0; k < keep && k < tuples.size(); ++k) picks.push_back({&f, std::move(tuples[k])});
        }
        if (opt.cap && picks.size() > opt.cap) {
            rng.shuffle(picks);
            picks.resize(opt.cap);
        }
        auto src = source_nodes(t.graph);
        std::unordered_set<std::string> seen;
        for (auto& [fp, tup] : picks) {
            Labeling f = *fp;
            std::size_t k = 0;
            for (std::uint32_t n = 0; n < t.graph.node_count; ++n) {
                if (src[n] && !f.node_constants[n]) f.node_constants[n] = tup[k++];
            }
            auto q = instantiate(t, f, st);
            if (has_duplicate_atoms(q) || !seen.insert(canonical_form(q)).second) continue;
            TrainSample s;
            s.positives = answers(q, sat);
            s.query = std::move(q);
            s.strategy = Strategy::Onto;
            b.samples.push_back(std::move(s));
        }
        b.line.requested = opt.cap;
        b.line.produced = b.samples.size();
        b.line.attempts = patterns.size();
        if (b.samples.empty()) {
            b.warnings.push_back("shape " + std::string(shape_name(shape)) + ": no strategic queries (" +
                                 std::to_string(n_valid) + " valid labelings, " + std::to_string(n_data) +
                                 " data patterns)");
        }
    });
    merge_report(report, batches);
    std::vector<TrainSample> out;
    for (auto& b : batches) std::move(b.samples.begin(), b.samples.end(), std::back_inserter(out));
    return out;
}

// ---------------------------------------------------------------------------
// negatives

std::vector<NodeId> negatives(const std::vector<NodeId>& positives, const std::vector<NodeId>& universe,
                              std::size_t k, Rng& rng) {
    auto is_pos = [&](NodeId e) { return std::binary_search(positives.begin(), positives.end(), e); };
    std::size_t n_pos = 0;
    for (NodeId e : universe) n_pos += is_pos(e) ? 1 : 0;
    const std::size_t comp = universe.size() - n_pos;
    if (comp == 0) throw SamplingError("every entity is a positive answer; no negative exists");
    std::vector<NodeId> out;
    out.reserve(k);
    if (k == 0) return out;
    if (comp >= 4 * k && comp * 2 >= universe.size()) {
        // rejection keeps the draw uniform over ordered k-subsets of the complement
        std::unordered_set<NodeId> taken;
        while (out.size() < k) {
            NodeId e = universe[rng.index(universe.size())];
            if (is_pos(e) || !taken.insert(e).second) continue;
            out.push_back(e);
        }
        return out;
    }
    std::vector<NodeId> pool;
    pool.reserve(comp);
    for (NodeId e : universe) {
        if (!is_pos(e)) pool.push_back(e);
    }
    if (comp >= k) {
        for (std::size_t i = 0; i < k; ++i) {
            std::size_t j = i + rng.index(pool.size() - i);
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
    } else {
        for (std::size_t i = 0; i < k; ++i) out.push_back(pool[rng.index(pool.size())]);
    }
    return out;
}

std::vector<NodeId> negatives(const std::vector<NodeId>& positives, const KnowledgeGraph& g, std::size_t k,
                              std::uint64_t seed) {
    Rng rng = Rng::stream(seed, "negatives");
    return negatives(positives, g.symbols().entities(), k, rng);
}

// ---------------------------------------------------------------------------
// evaluation sets

std::vector<EvalSample> build_eval(EvalCase c, const SplitBundle& bundle, const Ontology& o,
                                   const std::vector<Shape>& shapes, std::size_t n, std::uint64_t seed,
                                   const EvalOptions& opt, SampleReport* report) {
    const bool test = opt.split == EvalSplit::Test;
    const KnowledgeGraph& upper_raw = test ? bundle.g_test : bundle.g_valid;
    const KnowledgeGraph& lower_raw = test ? bundle.g_valid : bundle.g_train;
    KnowledgeGraph big, small;
    switch (c) {
        case EvalCase::A:
            big = upper_raw;
            small = lower_raw;
            break;
        case EvalCase::B:
            big = saturate(bundle.g_train, o);
            small = bundle.g_train;
            break;
        case EvalCase::C:
            big = saturate(upper_raw, o);
            small = saturate(lower_raw, o);
            break;
    }
    std::vector<std::vector<EvalSample>> per(shapes.size());
    std::vector<ShapeBatch> lines(shapes.size());
    parallel_for(shapes.size(), [&](std::size_t i) {
        const Shape shape = shapes[i];
        auto rng = Rng::stream(seed, "eval/" + std::string(case_name(c)) + (test ? "/test/" : "/valid/") +
                                         std::string(shape_name(shape)));
        auto& line = lines[i].line;
        line.shape = shape;
        line.requested = n;
        Walker w(big, shape_template(shape));
        std::unordered_set<std::string> seen;
        const std::size_t budget = opt.attempts_per_query * n + 100;
        while (per[i].size() < n && line.attempts < budget && !w.empty()) {
            ++line.attempts;
            auto q = w.draw(rng);
            if (!q) continue;
            auto key = canonical_form(*q);
            if (seen.count(key) || opt.exclude.count(key)) continue;
            seen.insert(key);
            auto full = answers(*q, big);
            auto easy = answers(*q, small);
            auto hard = set_minus(full, easy);
            if (hard.empty()) continue;
            per[i].push_back({std::move(*q), std::move(easy), std::move(hard), c});
        }
        line.produced = per[i].size();
        if (line.produced < n) {
            lines[i].warnings.push_back("case " + std::string(case_name(c)) + " shape " +
                                        std::string(shape_name(shape)) + ": " + std::to_string(line.produced) +
                                        " of " + std::to_string(n) + " queries with hard answers");
        }
    });
    merge_report(report, lines);
    std::vector<EvalSample> out;
    for (auto& v : per) std::move(v.begin(), v.end(), std::back_inserter(out));
    return out;
}

// ---------------------------------------------------------------------------
// records

QueryRecord to_record(const TrainSample& s, std::size_t index) {
    QueryRecord r;
    r.id = "q" + std::to_string(index);
    r.query = s.query;
    if (s.strategy == Strategy::Plain) {
        r.plain = s.positives;
    } else {
        r.certain = s.positives;
    }
    r.strategy = std::string(strategy_name(s.strategy));
    r.gens = s.gens;
    return r;
}

QueryRecord to_record(const EvalSample& s, std::size_t index) {
    QueryRecord r;
    r.id = "e" + std::to_string(index);
    r.query = s.query;
    std::vector<NodeId> full;
    std::set_union(s.easy.begin(), s.easy.end(), s.hard.begin(), s.hard.end(), std::back_inserter(full));
    // the full answer set of the case's larger graph; easy = full \ hard
    if (s.c == EvalCase::A) {
        r.plain = std::move(full);
    } else {
        r.certain = std::move(full);
    }
    r.hard = s.hard;
    r.case_tag = std::string(case_name(s.c));
    return r;
}

TrainSample train_sample_from(const QueryRecord& r) {
    TrainSample s;
    s.query = r.query;
    if (r.certain) {
        s.positives = *r.certain;
    } else if (r.plain) {
        s.positives = *r.plain;
    } else {
        throw FormatError("query " + r.id + " has no answers for training");
    }
    if (s.positives.empty()) throw FormatError("query " + r.id + " has an empty answer set");
    s.strategy = r.strategy.empty() ? (r.certain ? Strategy::Gen : Strategy::Plain) : parse_strategy(r.strategy);
    s.gens = r.gens;
    return s;
}

EvalSample eval_sample_from(const QueryRecord& r) {
    if (!r.hard || r.hard->empty()) throw FormatError("query " + r.id + " has no hard answers");
    EvalSample s;
    s.query = r.query;
    s.hard = *r.hard;
    const auto* full = r.certain ? &*r.certain : (r.plain ? &*r.plain : nullptr);
    if (full) s.easy = set_minus(*full, s.hard);
    s.c = r.case_tag.empty() ? EvalCase::A : parse_case(r.case_tag);
    return s;
}

}  // namespace omqa
