#include "omqa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "omqa/error.hpp"

namespace omqa {

namespace {

using json = nlohmann::json;

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw FormatError("truncated checkpoint header");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

void put_floats(std::ostream& out, const std::vector<float>& v) {
    std::vector<unsigned char> buf(v.size() * 4);
    for (std::size_t i = 0; i < v.size(); ++i) {
        auto u = std::bit_cast<std::uint32_t>(v[i]);
        for (int k = 0; k < 4; ++k) buf[4 * i + k] = static_cast<unsigned char>(u >> (8 * k));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void get_floats(std::istream& in, std::vector<float>& v, std::size_t n, const std::string& name) {
    std::vector<unsigned char> buf(n * 4);
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
        throw FormatError("truncated checkpoint: array " + name);
    }
    v.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t u = 0;
        for (int k = 0; k < 4; ++k) u |= static_cast<std::uint32_t>(buf[4 * i + k]) << (8 * k);
        v[i] = std::bit_cast<float>(u);
    }
}

}  // namespace

void save_checkpoint(const Parameters& p, const SymbolTable& st, std::ostream& out) {
    json meta;
    meta["format"] = 1;
    meta["d"] = p.d;
    meta["gamma"] = p.gamma;
    meta["node_count"] = p.nodes;
    meta["relation_count"] = p.relations;
    json nodes = json::array(), kinds = json::array(), rels = json::array();
    for (NodeId i = 0; i < st.node_count(); ++i) {
        nodes.push_back(st.node_name(i));
        kinds.push_back(st.is_concept(i) ? "concept" : "entity");
    }
    for (RelId r = 0; r < st.relation_count(); ++r) rels.push_back(st.relation_name(r));
    meta["nodes"] = nodes;
    meta["node_kinds"] = kinds;
    meta["relations"] = rels;
    json arrays = json::array();
    for (const auto& a : p.arrays()) arrays.push_back({{"name", a.name}, {"rows", a.rows}, {"cols", a.cols}});
    meta["arrays"] = arrays;
    std::string text = meta.dump();
    out.write(kCheckpointMagic, kCheckpointMagicSize);
    put_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& a : p.arrays()) put_floats(out, *a.data);
    if (!out) throw Error("failed to write checkpoint");
}

void save_checkpoint(const Parameters& p, const SymbolTable& st, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    save_checkpoint(p, st, out);
}

Checkpoint load_checkpoint(std::istream& in) {
    char magic[kCheckpointMagicSize];
    if (!in.read(magic, kCheckpointMagicSize)) throw FormatError("truncated checkpoint: missing magic");
    if (std::memcmp(magic, kCheckpointMagic, kCheckpointMagicSize - 1) != 0) {
        throw FormatError("not an omqa checkpoint (bad magic)");
    }
    if (magic[kCheckpointMagicSize - 1] != kCheckpointMagic[kCheckpointMagicSize - 1]) {
        throw FormatError("unsupported checkpoint version " + std::to_string(static_cast<int>(magic[kCheckpointMagicSize - 1])));
    }
    std::uint64_t len = get_u64(in);
    if (len > (1ull << 32)) throw FormatError("implausible checkpoint metadata length");
    std::string text(len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw FormatError("truncated checkpoint metadata");
    json meta;
    try {
        meta = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed checkpoint metadata: ") + e.what());
    }
    Checkpoint c;
    try {
        auto& p = c.params;
        p.d = meta.at("d").get<std::size_t>();
        p.gamma = meta.at("gamma").get<double>();
        p.nodes = meta.at("node_count").get<std::size_t>();
        p.relations = meta.at("relation_count").get<std::size_t>();
        c.nodes = meta.at("nodes").get<std::vector<std::string>>();
        c.node_kinds = meta.at("node_kinds").get<std::vector<std::string>>();
        c.relations = meta.at("relations").get<std::vector<std::string>>();
        auto expected = p.arrays();
        const auto& manifest = meta.at("arrays");
        if (manifest.size() != expected.size()) throw FormatError("checkpoint array manifest has the wrong length");
        for (std::size_t i = 0; i < expected.size(); ++i) {
            const auto& m = manifest[i];
            if (m.at("name").get<std::string>() != expected[i].name || m.at("rows").get<std::size_t>() != expected[i].rows ||
                m.at("cols").get<std::size_t>() != expected[i].cols) {
                throw FormatError("checkpoint array manifest mismatch at " + expected[i].name);
            }
            get_floats(in, *expected[i].data, expected[i].rows * expected[i].cols, expected[i].name);
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed checkpoint metadata: ") + e.what());
    }
    return c;
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint " + path);
    return load_checkpoint(in);
}

void check_vocabulary(const Checkpoint& c, const SymbolTable& st) {
    if (c.nodes.size() != st.node_count() || c.relations.size() != st.relation_count()) {
        throw ContractError("checkpoint vocabulary size differs from the loaded graph");
    }
    for (NodeId i = 0; i < st.node_count(); ++i) {
        if (c.nodes[i] != st.node_name(i)) throw ContractError("checkpoint node " + std::to_string(i) + " is '" + c.nodes[i] + "', graph has '" + st.node_name(i) + "'");
    }
    for (RelId r = 0; r < st.relation_count(); ++r) {
        if (c.relations[r] != st.relation_name(r)) throw ContractError("checkpoint relation " + std::to_string(r) + " differs");
    }
}

}  // namespace omqa
