#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "omqa/symbols.hpp"

namespace omqa {

struct Triple {
    NodeId head = 0;
    RelId rel = 0;
    NodeId tail = 0;
    auto operator<=>(const Triple&) const = default;
};

// Immutable triple set with three indexes:
//   spo - triples sorted by (head, rel, tail), CSR offsets per head
//   ops - triples sorted by (tail, rel, head), CSR offsets per tail
//   p   - (head, tail) pairs grouped per relation
class KnowledgeGraph {
public:
    explicit KnowledgeGraph(std::shared_ptr<SymbolTable> symbols = std::make_shared<SymbolTable>());
    // Sorts and deduplicates; checks kind constraints against the symbol table.
    KnowledgeGraph(std::shared_ptr<SymbolTable> symbols, std::vector<Triple> triples);

    const std::vector<Triple>& triples() const { return spo_; }
    std::size_t size() const { return spo_.size(); }
    bool empty() const { return spo_.empty(); }
    bool contains(const Triple& t) const;

    std::span<const NodeId> successors(NodeId h, RelId r) const;
    std::span<const NodeId> predecessors(NodeId t, RelId r) const;
    // Name-based variants raise LookupError on unknown symbols.
    std::vector<NodeId> successors(std::string_view h, std::string_view r) const;
    std::vector<NodeId> predecessors(std::string_view t, std::string_view r) const;

    // All triples with the given head (spo order) / tail (ops order).
    std::span<const Triple> out_edges(NodeId h) const;
    std::span<const Triple> in_edges(NodeId t) const;
    std::span<const std::pair<NodeId, NodeId>> pairs(RelId r) const;

    const SymbolTable& symbols() const { return *symbols_; }
    const std::shared_ptr<SymbolTable>& symbols_ptr() const { return symbols_; }

private:
    void build();

    std::shared_ptr<SymbolTable> symbols_;
    std::vector<Triple> spo_;
    std::vector<Triple> ops_;
    std::vector<NodeId> spo_tails_;
    std::vector<NodeId> ops_heads_;
    std::vector<std::size_t> spo_offsets_;
    std::vector<std::size_t> ops_offsets_;
    std::vector<std::pair<NodeId, NodeId>> p_pairs_;
    std::vector<std::size_t> p_offsets_;
};

// TSV ingestion: head<TAB>relation<TAB>tail, '#' comments, blank lines skipped.
// Symbols are interned into `symbols` in first-appearance order.
KnowledgeGraph load_triples(std::istream& in, std::shared_ptr<SymbolTable> symbols = nullptr);
KnowledgeGraph load_triples_file(const std::string& path, std::shared_ptr<SymbolTable> symbols = nullptr);
void serialize(const KnowledgeGraph& g, std::ostream& out);

struct SplitBundle {
    KnowledgeGraph g_train;
    KnowledgeGraph g_valid;
    KnowledgeGraph g_test;
};

// Removal count per level is floor(ratio * n), at least 1 when n > 1.
std::size_t split_removal_count(std::size_t n, double ratio);
SplitBundle split(const KnowledgeGraph& g, double ratio, std::uint64_t seed);

class Ontology;

struct StatsRecord {
    std::size_t triples = 0;
    std::size_t entities = 0;
    std::size_t relations = 0;
    std::size_t concepts = 0;
    std::optional<std::size_t> axioms;
    std::optional<std::size_t> closure_triples;
};

// Counts symbols occurring in g (not the whole shared table).
StatsRecord stats(const KnowledgeGraph& g, const Ontology* o = nullptr);
void write_stats(const StatsRecord& s, std::ostream& out);

}  // namespace omqa
