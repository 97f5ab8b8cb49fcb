#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "omqa/query.hpp"

namespace omqa {

// One line of a query file (JSON object per line).
struct QueryRecord {
    std::string id;
    ConjunctiveQuery query;
    std::optional<std::vector<NodeId>> plain, certain, hard;
    std::string case_tag;
    std::string strategy;
    std::vector<ConjunctiveQuery> gens;
    std::vector<std::string> provenance;
};

// Variables are written `?name`; every other term must name a known symbol.
QueryRecord parse_query_line(const std::string& line, const SymbolTable& st, std::size_t lineno = 0);
std::vector<QueryRecord> read_query_file(std::istream& in, const SymbolTable& st);
std::vector<QueryRecord> read_query_file(const std::string& path, const SymbolTable& st);
std::string format_query_line(const QueryRecord& r, const SymbolTable& st);
void write_query_file(std::ostream& out, const std::vector<QueryRecord>& records, const SymbolTable& st);

}  // namespace omqa
