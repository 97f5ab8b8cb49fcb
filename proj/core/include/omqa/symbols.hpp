#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace omqa {

// Entities and concepts share one id space ("nodes"); relations have their own.
using NodeId = std::uint32_t;
using RelId = std::uint32_t;

enum class NodeKind : std::uint8_t { Entity, Concept };

inline constexpr RelId kTypeRel = 0;
inline constexpr std::string_view kTypeName = "type";

class SymbolTable {
public:
    SymbolTable();

    // Interning is idempotent; re-interning a name under the other node kind
    // raises SchemaError.
    NodeId intern_entity(std::string_view name);
    NodeId intern_concept(std::string_view name);
    RelId intern_relation(std::string_view name);

    std::optional<NodeId> find_node(std::string_view name) const;
    std::optional<RelId> find_relation(std::string_view name) const;
    // Throwing lookups (LookupError).
    NodeId node(std::string_view name) const;
    NodeId entity(std::string_view name) const;
    NodeId concept_id(std::string_view name) const;
    RelId relation(std::string_view name) const;

    const std::string& node_name(NodeId id) const;
    const std::string& relation_name(RelId id) const;
    NodeKind kind(NodeId id) const { return kinds_.at(id); }
    bool is_concept(NodeId id) const { return id < kinds_.size() && kinds_[id] == NodeKind::Concept; }
    bool is_entity(NodeId id) const { return id < kinds_.size() && kinds_[id] == NodeKind::Entity; }

    std::size_t node_count() const { return node_names_.size(); }
    std::size_t relation_count() const { return rel_names_.size(); }
    const std::vector<NodeId>& entities() const { return entities_; }
    const std::vector<NodeId>& concepts() const { return concepts_; }

private:
    NodeId intern_node(std::string_view name, NodeKind kind);

    std::vector<std::string> node_names_;
    std::vector<NodeKind> kinds_;
    std::unordered_map<std::string, NodeId> node_ids_;
    std::vector<std::string> rel_names_;
    std::unordered_map<std::string, RelId> rel_ids_;
    std::vector<NodeId> entities_;
    std::vector<NodeId> concepts_;
};

}  // namespace omqa
