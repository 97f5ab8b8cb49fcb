#include "omqa/query_io.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "omqa/error.hpp"

namespace omqa {

using nlohmann::json;

namespace {

ConjunctiveQuery query_from_json(const json& j, const SymbolTable& st) {
    ConjunctiveQuery q;
    std::string ans = j.at("answer_var").get<std::string>();
    if (ans.size() < 2 || ans[0] != '?') throw FormatError("answer_var must be a variable like ?x");
    q.answer_var = q.add_var(ans.substr(1));
    auto term = [&](const std::string& s) {
        if (!s.empty() && s[0] == '?') {
            if (s.size() < 2) throw FormatError("empty variable name");
            return Term::var(q.add_var(s.substr(1)));
        }
        return Term::constant(st.node(s));
    };
    for (const auto& a : j.at("atoms")) {
        if (!a.is_array() || a.size() != 3) throw FormatError("atom must be [term, relation, term]");
        Atom atom;
        atom.head = term(a[0].get<std::string>());
        atom.rel = st.relation(a[1].get<std::string>());
        atom.tail = term(a[2].get<std::string>());
        q.atoms.push_back(atom);
    }
    if (j.contains("branches")) {
        for (const auto& b : j.at("branches")) q.branches.push_back(b.get<std::vector<std::uint32_t>>());
    }
    validate(q, st);
    return q;
}

json query_to_json(const ConjunctiveQuery& q, const SymbolTable& st) {
    json atoms = json::array();
    auto term = [&](const Term& t) { return t.is_var() ? "?" + q.var_names.at(t.id) : st.node_name(t.id); };
    for (const auto& a : q.atoms) atoms.push_back({term(a.head), st.relation_name(a.rel), term(a.tail)});
    json j;
    j["atoms"] = atoms;
    j["answer_var"] = "?" + q.var_names.at(q.answer_var);
    if (!q.branches.empty()) j["branches"] = q.branches;
    return j;
}

std::vector<NodeId> names_to_ids(const json& arr, const SymbolTable& st) {
    std::vector<NodeId> out;
    for (const auto& n : arr) out.push_back(st.entity(n.get<std::string>()));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

json ids_to_names(const std::vector<NodeId>& ids, const SymbolTable& st) {
    json arr = json::array();
    for (auto id : ids) arr.push_back(st.node_name(id));
    return arr;
}

}  // namespace

QueryRecord parse_query_line(const std::string& line, const SymbolTable& st, std::size_t lineno) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
    }
    try {
        QueryRecord r;
        r.id = j.value("id", std::string());
        r.query = query_from_json(j, st);
        if (j.contains("shape")) {
            auto declared = parse_shape(j.at("shape").get<std::string>());
            auto actual = try_shape_of(r.query);
            if (actual && *actual != declared) {
                throw FormatError("declared shape " + std::string(shape_name(declared)) + " but query is " +
                                  std::string(shape_name(*actual)));
            }
        }
        if (j.contains("answers")) {
            const auto& a = j.at("answers");
            if (a.contains("plain")) r.plain = names_to_ids(a.at("plain"), st);
            if (a.contains("certain")) r.certain = names_to_ids(a.at("certain"), st);
            if (a.contains("hard")) r.hard = names_to_ids(a.at("hard"), st);
        }
        r.case_tag = j.value("case", std::string());
        r.strategy = j.value("strategy", std::string());
        if (j.contains("gens")) {
            for (const auto& g : j.at("gens")) r.gens.push_back(query_from_json(g, st));
        }
        if (j.contains("provenance")) r.provenance = j.at("provenance").get<std::vector<std::string>>();
        return r;
    } catch (const json::exception& e) {
        throw ParseError(lineno, std::string("malformed query record: ") + e.what());
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        throw ParseError(lineno, e.what());
    }
}

std::vector<QueryRecord> read_query_file(std::istream& in, const SymbolTable& st) {
    std::vector<QueryRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        out.push_back(parse_query_line(line, st, lineno));
    }
    return out;
}

std::vector<QueryRecord> read_query_file(const std::string& path, const SymbolTable& st) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open query file '" + path + "'");
    return read_query_file(in, st);
}

std::string format_query_line(const QueryRecord& r, const SymbolTable& st) {
    json j = query_to_json(r.query, st);
    j["id"] = r.id;
    if (auto s = try_shape_of(r.query)) j["shape"] = std::string(shape_name(*s));
    if (r.plain || r.certain || r.hard) {
        json a = json::object();
        if (r.plain) a["plain"] = ids_to_names(*r.plain, st);
        if (r.certain) a["certain"] = ids_to_names(*r.certain, st);
        if (r.hard) a["hard"] = ids_to_names(*r.hard, st);
        j["answers"] = a;
    }
    if (!r.case_tag.empty()) j["case"] = r.case_tag;
    if (!r.strategy.empty()) j["strategy"] = r.strategy;
    if (!r.gens.empty()) {
        json g = json::array();
        for (const auto& q : r.gens) g.push_back(query_to_json(q, st));
        j["gens"] = g;
    }
    if (!r.provenance.empty()) j["provenance"] = r.provenance;
    return j.dump();
}

void write_query_file(std::ostream& out, const std::vector<QueryRecord>& records, const SymbolTable& st) {
    for (const auto& r : records) out << format_query_line(r, st) << '\n';
}

}  // namespace omqa
