#include "omqa/kg.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "omqa/error.hpp"
#include "omqa/ontology.hpp"
#include "omqa/rng.hpp"

namespace omqa {

KnowledgeGraph::KnowledgeGraph(std::shared_ptr<SymbolTable> symbols) : symbols_(std::move(symbols)) {
    if (!symbols_) symbols_ = std::make_shared<SymbolTable>();
    build();
}

KnowledgeGraph::KnowledgeGraph(std::shared_ptr<SymbolTable> symbols, std::vector<Triple> triples)
    : symbols_(std::move(symbols)), spo_(std::move(triples)) {
    if (!symbols_) symbols_ = std::make_shared<SymbolTable>();
    const auto& st = *symbols_;
    for (const auto& t : spo_) {
        if (t.rel >= st.relation_count()) throw SchemaError("relation id out of range");
        if (!st.is_entity(t.head)) {
            throw SchemaError("head '" + st.node_name(t.head) + "' of a " + st.relation_name(t.rel) +
                              " triple is not an entity");
        }
        bool concept_tail = st.is_concept(t.tail);
        if (t.rel == kTypeRel && !concept_tail) {
            throw SchemaError("tail '" + st.node_name(t.tail) + "' of a type triple is not a concept");
        }
        if (t.rel != kTypeRel && concept_tail) {
            throw SchemaError("concept '" + st.node_name(t.tail) + "' used with relation " + st.relation_name(t.rel));
        }
    }
    std::sort(spo_.begin(), spo_.end());
    spo_.erase(std::unique(spo_.begin(), spo_.end()), spo_.end());
    build();
}

void KnowledgeGraph::build() {
    const std::size_t n = symbols_->node_count();
    const std::size_t nr = symbols_->relation_count();

    ops_ = spo_;
    std::sort(ops_.begin(), ops_.end(), [](const Triple& a, const Triple& b) {
        return std::tie(a.tail, a.rel, a.head) < std::tie(b.tail, b.rel, b.head);
    });

    spo_tails_.resize(spo_.size());
    ops_heads_.resize(ops_.size());
    spo_offsets_.assign(n + 1, 0);
    ops_offsets_.assign(n + 1, 0);
    for (std::size_t i = 0; i < spo_.size(); ++i) {
        spo_tails_[i] = spo_[i].tail;
        ops_heads_[i] = ops_[i].head;
        ++spo_offsets_[spo_[i].head + 1];
        ++ops_offsets_[ops_[i].tail + 1];
    }
    for (std::size_t i = 0; i < n; ++i) {
        spo_offsets_[i + 1] += spo_offsets_[i];
        ops_offsets_[i + 1] += ops_offsets_[i];
    }

    std::vector<Triple> by_rel = spo_;
    std::stable_sort(by_rel.begin(), by_rel.end(), [](const Triple& a, const Triple& b) { return a.rel < b.rel; });
    p_pairs_.resize(by_rel.size());
    p_offsets_.assign(nr + 1, 0);
    for (std::size_t i = 0; i < by_rel.size(); ++i) {
        p_pairs_[i] = {by_rel[i].head, by_rel[i].tail};
        ++p_offsets_[by_rel[i].rel + 1];
    }
    for (std::size_t i = 0; i < nr; ++i) p_offsets_[i + 1] += p_offsets_[i];
}

bool KnowledgeGraph::contains(const Triple& t) const { return std::binary_search(spo_.begin(), spo_.end(), t); }

std::span<const Triple> KnowledgeGraph::out_edges(NodeId h) const {
    if (static_cast<std::size_t>(h) + 1 >= spo_offsets_.size()) return {};
    return {spo_.data() + spo_offsets_[h], spo_offsets_[h + 1] - spo_offsets_[h]};
}

std::span<const Triple> KnowledgeGraph::in_edges(NodeId t) const {
    if (static_cast<std::size_t>(t) + 1 >= ops_offsets_.size()) return {};
    return {ops_.data() + ops_offsets_[t], ops_offsets_[t + 1] - ops_offsets_[t]};
}

std::span<const NodeId> KnowledgeGraph::successors(NodeId h, RelId r) const {
    auto edges = out_edges(h);
    if (edges.empty()) return {};
    auto lo = std::lower_bound(edges.begin(), edges.end(), r, [](const Triple& t, RelId x) { return t.rel < x; });
    auto hi = std::upper_bound(lo, edges.end(), r, [](RelId x, const Triple& t) { return x < t.rel; });
    std::size_t first = static_cast<std::size_t>(&*edges.begin() - spo_.data()) + (lo - edges.begin());
    return {spo_tails_.data() + first, static_cast<std::size_t>(hi - lo)};
}

std::span<const NodeId> KnowledgeGraph::predecessors(NodeId t, RelId r) const {
    auto edges = in_edges(t);
    if (edges.empty()) return {};
    auto lo = std::lower_bound(edges.begin(), edges.end(), r, [](const Triple& e, RelId x) { return e.rel < x; });
    auto hi = std::upper_bound(lo, edges.end(), r, [](RelId x, const Triple& e) { return x < e.rel; });
    std::size_t first = static_cast<std::size_t>(&*edges.begin() - ops_.data()) + (lo - edges.begin());
    return {ops_heads_.data() + first, static_cast<std::size_t>(hi - lo)};
}

std::vector<NodeId> KnowledgeGraph::successors(std::string_view h, std::string_view r) const {
    auto s = successors(symbols_->node(h), symbols_->relation(r));
    return {s.begin(), s.end()};
}

std::vector<NodeId> KnowledgeGraph::predecessors(std::string_view t, std::string_view r) const {
    auto s = predecessors(symbols_->node(t), symbols_->relation(r));
    return {s.begin(), s.end()};
}

std::span<const std::pair<NodeId, NodeId>> KnowledgeGraph::pairs(RelId r) const {
    if (static_cast<std::size_t>(r) + 1 >= p_offsets_.size()) return {};
    return {p_pairs_.data() + p_offsets_[r], p_offsets_[r + 1] - p_offsets_[r]};
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

}  // namespace

KnowledgeGraph load_triples(std::istream& in, std::shared_ptr<SymbolTable> symbols) {
    if (!symbols) symbols = std::make_shared<SymbolTable>();
    auto& st = *symbols;
    std::vector<Triple> triples;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto f = split_tabs(line);
        if (f.size() != 3) {
            throw ParseError(lineno, "expected 3 tab-separated fields, got " + std::to_string(f.size()));
        }
        if (f[0].empty() || f[1].empty() || f[2].empty()) throw ParseError(lineno, "empty field");
        try {
            Triple t;
            // heads are always entities; a name already known as a concept fails here
            t.head = st.intern_entity(f[0]);
            t.rel = st.intern_relation(f[1]);
            t.tail = (t.rel == kTypeRel) ? st.intern_concept(f[2]) : st.intern_entity(f[2]);
            triples.push_back(t);
        } catch (const SchemaError& e) {
            throw SchemaError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return KnowledgeGraph(std::move(symbols), std::move(triples));
}

KnowledgeGraph load_triples_file(const std::string& path, std::shared_ptr<SymbolTable> symbols) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open triple file '" + path + "'");
    return load_triples(in, std::move(symbols));
}

void serialize(const KnowledgeGraph& g, std::ostream& out) {
    const auto& st = g.symbols();
    for (const auto& t : g.triples()) {
        out << st.node_name(t.head) << '\t' << st.relation_name(t.rel) << '\t' << st.node_name(t.tail) << '\n';
    }
}

std::size_t split_removal_count(std::size_t n, double ratio) {
    if (n <= 1) return 0;
    auto k = static_cast<std::size_t>(static_cast<double>(n) * ratio);
    return std::max<std::size_t>(k, 1);
}

namespace {

std::vector<Triple> drop_random(const std::vector<Triple>& in, double ratio, Rng& rng) {
    std::size_t k = split_removal_count(in.size(), ratio);
    std::vector<std::size_t> idx(in.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    // partial Fisher-Yates: the first k positions are the removed sample
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.index(idx.size() - i));
        std::swap(idx[i], idx[j]);
    }
    std::vector<char> removed(in.size(), 0);
    for (std::size_t i = 0; i < k; ++i) removed[idx[i]] = 1;
    std::vector<Triple> out;
    out.reserve(in.size() - k);
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (!removed[i]) out.push_back(in[i]);
    }
    return out;
}

}  // namespace

SplitBundle split(const KnowledgeGraph& g, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0,1)");
    if (g.empty()) throw ConfigError("cannot split an empty graph");
    Rng rng = Rng::stream(seed, "split");
    auto valid = drop_random(g.triples(), ratio, rng);
    auto train = drop_random(valid, ratio, rng);
    return SplitBundle{KnowledgeGraph(g.symbols_ptr(), std::move(train)),
                       KnowledgeGraph(g.symbols_ptr(), std::move(valid)), g};
}

StatsRecord stats(const KnowledgeGraph& g, const Ontology* o) {
    StatsRecord s;
    s.triples = g.size();
    std::set<NodeId> ents, cons;
    std::set<RelId> rels;
    for (const auto& t : g.triples()) {
        ents.insert(t.head);
        rels.insert(t.rel);
        (t.rel == kTypeRel ? cons : ents).insert(t.tail);
    }
    s.entities = ents.size();
    s.concepts = cons.size();
    s.relations = rels.size();
    if (o) {
        s.axioms = o->axioms().size();
        s.closure_triples = saturate(g, *o).size();
    }
    return s;
}

void write_stats(const StatsRecord& s, std::ostream& out) {
    out << "|G|\t|I|\t|R|\t|C|";
    if (s.axioms) out << "\t|O|\t|O_inf(G)|";
    out << '\n' << s.triples << '\t' << s.entities << '\t' << s.relations << '\t' << s.concepts;
    if (s.axioms) out << '\t' << *s.axioms << '\t' << *s.closure_triples;
    out << '\n';
}

}  // namespace omqa
