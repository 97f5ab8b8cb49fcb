#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "omqa/model.hpp"
#include "omqa/symbols.hpp"

namespace omqa {

// Magic, u64 LE metadata length, JSON metadata (d, gamma, vocabularies in id
// order, array manifest), then little-endian float32 arrays in manifest order.
inline constexpr char kCheckpointMagic[] = "OMQA-CKPT\x01";
inline constexpr std::size_t kCheckpointMagicSize = sizeof(kCheckpointMagic) - 1;

struct Checkpoint {
    Parameters params;
    std::vector<std::string> nodes;      // names in NodeId order
    std::vector<std::string> node_kinds; // "entity" | "concept"
    std::vector<std::string> relations;  // names in RelId order
};

void save_checkpoint(const Parameters& p, const SymbolTable& st, std::ostream& out);
void save_checkpoint(const Parameters& p, const SymbolTable& st, const std::string& path);
Checkpoint load_checkpoint(std::istream& in);  // FormatError
Checkpoint load_checkpoint(const std::string& path);

// Checks that the checkpoint vocabulary is a prefix-compatible match for st
// (same names at the same ids); ContractError otherwise.
void check_vocabulary(const Checkpoint& c, const SymbolTable& st);

}  // namespace omqa
