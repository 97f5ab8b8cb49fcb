#include "omqa/symbols.hpp"

#include "omqa/error.hpp"

namespace omqa {

SymbolTable::SymbolTable() { intern_relation(kTypeName); }

NodeId SymbolTable::intern_node(std::string_view name, NodeKind kind) {
    if (name.empty()) throw SchemaError("empty symbol name");
    auto it = node_ids_.find(std::string(name));
    if (it != node_ids_.end()) {
        if (kinds_[it->second] != kind) {
            throw SchemaError("symbol '" + std::string(name) + "' used both as entity and as concept");
        }
        return it->second;
    }
    auto id = static_cast<NodeId>(node_names_.size());
    node_names_.emplace_back(name);
    kinds_.push_back(kind);
    node_ids_.emplace(std::string(name), id);
    (kind == NodeKind::Entity ? entities_ : concepts_).push_back(id);
    return id;
}

NodeId SymbolTable::intern_entity(std::string_view name) { return intern_node(name, NodeKind::Entity); }
NodeId SymbolTable::intern_concept(std::string_view name) { return intern_node(name, NodeKind::Concept); }

RelId SymbolTable::intern_relation(std::string_view name) {
    if (name.empty()) throw SchemaError("empty relation name");
    auto it = rel_ids_.find(std::string(name));
    if (it != rel_ids_.end()) return it->second;
    auto id = static_cast<RelId>(rel_names_.size());
    rel_names_.emplace_back(name);
    rel_ids_.emplace(std::string(name), id);
    return id;
}

std::optional<NodeId> SymbolTable::find_node(std::string_view name) const {
    auto it = node_ids_.find(std::string(name));
    if (it == node_ids_.end()) return std::nullopt;
    return it->second;
}

std::optional<RelId> SymbolTable::find_relation(std::string_view name) const {
    auto it = rel_ids_.find(std::string(name));
    if (it == rel_ids_.end()) return std::nullopt;
    return it->second;
}

NodeId SymbolTable::node(std::string_view name) const {
    auto id = find_node(name);
    if (!id) throw LookupError("unknown symbol '" + std::string(name) + "'");
    return *id;
}

NodeId SymbolTable::entity(std::string_view name) const {
    NodeId id = node(name);
    if (!is_entity(id)) throw LookupError("'" + std::string(name) + "' is a concept, not an entity");
    return id;
}

NodeId SymbolTable::concept_id(std::string_view name) const {
    NodeId id = node(name);
    if (!is_concept(id)) throw LookupError("'" + std::string(name) + "' is an entity, not a concept");
    return id;
}

RelId SymbolTable::relation(std::string_view name) const {
    auto id = find_relation(name);
    if (!id) throw LookupError("unknown relation '" + std::string(name) + "'");
    return *id;
}

const std::string& SymbolTable::node_name(NodeId id) const {
    if (id >= node_names_.size()) throw LookupError("node id " + std::to_string(id) + " out of range");
    return node_names_[id];
}

const std::string& SymbolTable::relation_name(RelId id) const {
    if (id >= rel_names_.size()) throw LookupError("relation id " + std::to_string(id) + " out of range");
    return rel_names_[id];
}

}  // namespace omqa
