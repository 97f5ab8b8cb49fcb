#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "omqa/kg.hpp"
#include "omqa/ontology.hpp"
#include "omqa/query.hpp"
#include "omqa/query_io.hpp"
#include "omqa/rng.hpp"

namespace omqa {

enum class Strategy : std::uint8_t { Plain, Gen, Spec, Onto };
enum class EvalCase : std::uint8_t { A, B, C };

std::string_view strategy_name(Strategy s);
Strategy parse_strategy(std::string_view s);  // ConfigError
std::string_view case_name(EvalCase c);
EvalCase parse_case(std::string_view s);  // ConfigError

struct TrainSample {
    ConjunctiveQuery query;
    std::vector<NodeId> positives;        // sorted
    std::vector<ConjunctiveQuery> gens;   // generalizations, canonical-form distinct
    Strategy strategy = Strategy::Plain;
};

struct EvalSample {
    ConjunctiveQuery query;
    std::vector<NodeId> easy;  // sorted
    std::vector<NodeId> hard;  // sorted, disjoint from easy, non-empty
    EvalCase c = EvalCase::A;
};

// Per-shape bookkeeping for partial results.
struct SampleReport {
    struct Line {
        Shape shape;
        std::size_t requested = 0;
        std::size_t produced = 0;
        std::size_t attempts = 0;
    };
    std::vector<Line> lines;
    std::vector<std::string> warnings;
};

// Random queries by reverse instantiation: pick an answer entity, walk the
// template backwards through the graph. Training shapes only.
std::vector<TrainSample> sample_plain(const KnowledgeGraph& g, const std::vector<Shape>& shapes, std::size_t n,
                                      std::uint64_t seed, SampleReport* report = nullptr);

enum class CertainMode : std::uint8_t { Gen, Spec };

struct CertainOptions {
    CertainMode mode = CertainMode::Gen;
    std::size_t depth = 2;  // closure depth for generalizations / specializations
};

std::vector<TrainSample> sample_certain(const KnowledgeGraph& g, const Ontology& o, const std::vector<Shape>& shapes,
                                        std::size_t n, std::uint64_t seed, const CertainOptions& opt = {},
                                        SampleReport* report = nullptr);

// Validity of a labeled shape, judged pairwise on atoms sharing a node. Edges
// follow atom orientation: a `type` edge goes from its subject to the concept
// node, whichever way the shape draws it.
bool is_valid_labeling(const QueryShape& shape, const Labeling& f, const Ontology& o);

// Every labeling over the ontology's signature: relations on edges, concepts on
// the free end of `type` edges; entity nodes stay unassigned.
std::vector<Labeling> candidate_labelings(const QueryShape& shape, const SymbolTable& st);
std::vector<Labeling> valid_labelings(const QueryShape& shape, const Ontology& o);

struct OntoOptions {
    double anchor_fraction = 0.5;
    std::size_t cap = 1000;  // per shape; 0 = unbounded
    // Anchor tuples enumerated per labeled pattern before giving up on exhaustiveness.
    std::size_t tuple_limit = 100000;
};

std::vector<TrainSample> sample_onto(const KnowledgeGraph& g, const Ontology& o, const std::vector<Shape>& shapes,
                                     const OntoOptions& opt, std::uint64_t seed, SampleReport* report = nullptr);

// Distinct entity tuples for the unlabeled (nullopt, non-distinguished) source
// nodes of `t` under `f` that give the query at least one answer over g.
std::vector<std::vector<NodeId>> anchor_tuples(const ShapeTemplate& t, const Labeling& f, const KnowledgeGraph& g,
                                               std::size_t limit, bool* truncated = nullptr);

// k entities drawn uniformly from the complement of `positives` (sorted), without
// replacement when the complement holds at least k entities.
std::vector<NodeId> negatives(const std::vector<NodeId>& positives, const KnowledgeGraph& g, std::size_t k,
                              std::uint64_t seed);
std::vector<NodeId> negatives(const std::vector<NodeId>& positives, const std::vector<NodeId>& universe,
                              std::size_t k, Rng& rng);

enum class EvalSplit : std::uint8_t { Test, Valid };

struct EvalOptions {
    EvalSplit split = EvalSplit::Test;
    std::set<std::string> exclude;  // canonical forms of training/validation queries (case B)
    std::size_t attempts_per_query = 60;
};

std::vector<EvalSample> build_eval(EvalCase c, const SplitBundle& bundle, const Ontology& o,
                                   const std::vector<Shape>& shapes, std::size_t n, std::uint64_t seed,
                                   const EvalOptions& opt = {}, SampleReport* report = nullptr);

QueryRecord to_record(const TrainSample& s, std::size_t index);
QueryRecord to_record(const EvalSample& s, std::size_t index);
TrainSample train_sample_from(const QueryRecord& r);  // FormatError without plain/certain answers
EvalSample eval_sample_from(const QueryRecord& r);    // FormatError without hard answers

}  // namespace omqa
