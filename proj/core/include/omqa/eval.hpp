#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "omqa/model.hpp"
#include "omqa/ontology.hpp"
#include "omqa/sampler.hpp"

namespace omqa {

struct RankRecord {
    std::string query_id;
    NodeId answer = 0;
    std::size_t rank = 1;
    EvalCase c = EvalCase::A;
    Shape shape = Shape::P1;
};

// Pessimistic rank: 1 + #others scoring strictly better + #others tying.
// Lower scores are better.
std::size_t pessimistic_rank(double answer_score, std::span<const double> others);

struct MetricCell {
    std::size_t count = 0;
    double hits1 = 0, hits3 = 0, hits10 = 0, mrr = 0;  // means after finalize
};

struct MetricsTable {
    // key: (case, shape name); "all" rows aggregate every shape of a case
    std::map<std::pair<std::string, std::string>, MetricCell> cells;
    const MetricCell* find(const std::string& c, const std::string& shape) const;
};

// Averages per hard answer, grouped per (case, shape), plus (case, "all").
MetricsTable metrics_from_records(const std::vector<RankRecord>& records);

// Scores every candidate entity of `entities` for one query (min over branches).
std::vector<double> score_entities(const Parameters& p, const QueryPlan& plan, const std::vector<NodeId>& entities);

// rank of hard answer a among entities outside full_answers (plus a itself);
// ContractError if a is an easy answer or not an answer at all.
RankRecord rank_answer(const Parameters& p, const ConjunctiveQuery& q, NodeId a, const std::vector<NodeId>& hard,
                       const std::vector<NodeId>& full_answers, const std::vector<NodeId>& entities);

// Query ids default to "e<index>" when `ids` is empty.
MetricsTable evaluate(const Parameters& p, const std::vector<EvalSample>& set, const std::vector<NodeId>& entities,
                      std::vector<RankRecord>* records = nullptr, const std::vector<std::string>& ids = {});

// Entity score = min distance over rew(q, O) restricted to the supported shapes.
MetricsTable evaluate_rewriting_baseline(const Parameters& p, const std::vector<EvalSample>& set, const Ontology& o,
                                         const std::vector<NodeId>& entities,
                                         std::vector<RankRecord>* records = nullptr,
                                         const std::vector<std::string>& ids = {});

// Human-readable table followed by a `key = value` block.
void write_metrics(const MetricsTable& t, std::ostream& out, const std::string& title = "");
void write_rank_records(const std::vector<RankRecord>& r, const SymbolTable& st, std::ostream& out);
std::vector<RankRecord> read_rank_records(std::istream& in, const SymbolTable& st);

}  // namespace omqa
