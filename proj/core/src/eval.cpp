#include "omqa/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "omqa/error.hpp"
#include "omqa/parallel.hpp"
#include "omqa/rewrite.hpp"

namespace omqa {

std::size_t pessimistic_rank(double answer_score, std::span<const double> others) {
    std::size_t r = 1;
    for (double s : others) r += s <= answer_score ? 1 : 0;
    return r;
}

const MetricCell* MetricsTable::find(const std::string& c, const std::string& shape) const {
    auto it = cells.find({c, shape});
    return it == cells.end() ? nullptr : &it->second;
}

MetricsTable metrics_from_records(const std::vector<RankRecord>& records) {
    MetricsTable t;
    for (const auto& r : records) {
        if (r.rank == 0) throw ContractError("rank must be positive");
        const std::string c(case_name(r.c));
        for (const std::string& s : {std::string(shape_name(r.shape)), std::string("all")}) {
            auto& cell = t.cells[{c, s}];
            ++cell.count;
            cell.hits1 += r.rank <= 1 ? 1 : 0;
            cell.hits3 += r.rank <= 3 ? 1 : 0;
            cell.hits10 += r.rank <= 10 ? 1 : 0;
            cell.mrr += 1.0 / static_cast<double>(r.rank);
        }
    }
    for (auto& [k, cell] : t.cells) {
        const double n = static_cast<double>(cell.count);
        cell.hits1 /= n;
        cell.hits3 /= n;
        cell.hits10 /= n;
        cell.mrr /= n;
    }
    return t;
}

std::vector<double> score_entities(const Parameters& p, const QueryPlan& plan, const std::vector<NodeId>& entities) {
    auto emb = embed_plan(p, plan);
    std::vector<double> out(entities.size());
    const std::size_t d = p.d;
    for (std::size_t i = 0; i < entities.size(); ++i) {
        const float* v = &p.entity.at(entities[i] * d);
        double best = INFINITY;
        for (const auto& b : emb.branches) {
            double s = 0;
            for (std::size_t k = 0; k < d; ++k) s += std::abs(b.center[k] - v[k]);
            best = std::min(best, s);
        }
        out[i] = best;
    }
    return out;
}

namespace {

bool in(const std::vector<NodeId>& v, NodeId x) { return std::binary_search(v.begin(), v.end(), x); }

// Ranks every hard answer of s given per-entity scores (aligned with `entities`).
void rank_sample(const EvalSample& s, const std::vector<NodeId>& entities, const std::vector<double>& scores,
                 const std::string& id, std::vector<RankRecord>& out) {
    std::vector<NodeId> full;
    std::set_union(s.easy.begin(), s.easy.end(), s.hard.begin(), s.hard.end(), std::back_inserter(full));
    std::vector<double> cand;
    std::vector<double> hard_scores(s.hard.size(), NAN);
    for (std::size_t i = 0; i < entities.size(); ++i) {
        if (!in(full, entities[i])) {
            cand.push_back(scores[i]);
        } else if (in(s.hard, entities[i])) {
            auto pos = std::lower_bound(s.hard.begin(), s.hard.end(), entities[i]) - s.hard.begin();
            hard_scores[static_cast<std::size_t>(pos)] = scores[i];
        }
    }
    std::sort(cand.begin(), cand.end());
    const Shape shape = shape_of(s.query);
    for (std::size_t h = 0; h < s.hard.size(); ++h) {
        if (std::isnan(hard_scores[h])) throw ContractError("hard answer is not a candidate entity");
        // pessimistic: every candidate scoring <= the answer ranks ahead of it
        auto ahead = static_cast<std::size_t>(std::upper_bound(cand.begin(), cand.end(), hard_scores[h]) - cand.begin());
        out.push_back({id, s.hard[h], 1 + ahead, s.c, shape});
    }
}

template <class ScoreFn>
MetricsTable evaluate_with(const std::vector<EvalSample>& set, const std::vector<NodeId>& entities,
                           std::vector<RankRecord>* records, const std::vector<std::string>& ids, ScoreFn score) {
    std::vector<std::vector<RankRecord>> per(set.size());
    parallel_for(set.size(), [&](std::size_t i) {
        std::string id = ids.empty() ? "e" + std::to_string(i) : ids.at(i);
        rank_sample(set[i], entities, score(set[i]), id, per[i]);
    });
    std::vector<RankRecord> all;
    for (auto& v : per) std::move(v.begin(), v.end(), std::back_inserter(all));
    auto t = metrics_from_records(all);
    if (records) *records = std::move(all);
    return t;
}

}  // namespace

RankRecord rank_answer(const Parameters& p, const ConjunctiveQuery& q, NodeId a, const std::vector<NodeId>& hard,
                       const std::vector<NodeId>& full_answers, const std::vector<NodeId>& entities) {
    if (!in(hard, a)) {
        throw ContractError(in(full_answers, a) ? "answer is easy, not hard" : "entity is not a hard answer");
    }
    EvalSample s;
    s.query = q;
    s.hard = {a};
    s.easy = full_answers;
    s.easy.erase(std::remove(s.easy.begin(), s.easy.end(), a), s.easy.end());
    // other hard answers stay filtered, as part of the full answer set
    std::vector<RankRecord> out;
    rank_sample(s, entities, score_entities(p, plan_query(q), entities), "q", out);
    return out.at(0);
}

MetricsTable evaluate(const Parameters& p, const std::vector<EvalSample>& set, const std::vector<NodeId>& entities,
                      std::vector<RankRecord>* records, const std::vector<std::string>& ids) {
    return evaluate_with(set, entities, records, ids, [&](const EvalSample& s) {
        return score_entities(p, plan_query(s.query), entities);
    });
}

MetricsTable evaluate_rewriting_baseline(const Parameters& p, const std::vector<EvalSample>& set, const Ontology& o,
                                         const std::vector<NodeId>& entities, std::vector<RankRecord>* records,
                                         const std::vector<std::string>& ids) {
    const std::vector<Shape> shapes(kAllShapes.begin(), kAllShapes.end());
    return evaluate_with(set, entities, records, ids, [&](const EvalSample& s) {
        auto rs = rew(s.query, o, shapes);
        std::vector<double> best(entities.size(), INFINITY);
        for (const auto& m : rs.members) {
            auto plan = plan_query(m.query);
            auto sc = score_entities(p, plan, entities);
            for (std::size_t i = 0; i < sc.size(); ++i) best[i] = std::min(best[i], sc[i]);
        }
        return best;
    });
}

namespace {

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", x);
    return buf;
}

int shape_order(const std::string& s) {
    if (s == "all") return 100;
    for (std::size_t i = 0; i < kAllShapes.size(); ++i) {
        if (shape_name(kAllShapes[i]) == s) return static_cast<int>(i);
    }
    return 50;
}

std::vector<std::pair<std::pair<std::string, std::string>, MetricCell>> ordered(const MetricsTable& t) {
    std::vector<std::pair<std::pair<std::string, std::string>, MetricCell>> v(t.cells.begin(), t.cells.end());
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        if (a.first.first != b.first.first) return a.first.first < b.first.first;
        return shape_order(a.first.second) < shape_order(b.first.second);
    });
    return v;
}

}  // namespace

void write_metrics(const MetricsTable& t, std::ostream& out, const std::string& title) {
    out << "# " << (title.empty() ? "metrics" : title) << "\n";
    out << "# averaged per hard answer; pessimistic ties; candidates filtered by the full answer set\n";
    char line[160];
    std::snprintf(line, sizeof line, "%-5s %-5s %7s %8s %8s %8s %8s\n", "case", "shape", "answers", "hits@1", "hits@3",
                  "hits@10", "mrr");
    out << line;
    auto rows = ordered(t);
    for (const auto& [k, c] : rows) {
        std::snprintf(line, sizeof line, "%-5s %-5s %7zu %8.4f %8.4f %8.4f %8.4f\n", k.first.c_str(), k.second.c_str(),
                      c.count, c.hits1, c.hits3, c.hits10, c.mrr);
        out << line;
    }
    out << "\n";
    for (const auto& [k, c] : rows) {
        const std::string pre = k.first + "." + k.second + ".";
        out << pre << "count = " << c.count << "\n";
        out << pre << "hits@1 = " << fmt(c.hits1) << "\n";
        out << pre << "hits@3 = " << fmt(c.hits3) << "\n";
        out << pre << "hits@10 = " << fmt(c.hits10) << "\n";
        out << pre << "mrr = " << fmt(c.mrr) << "\n";
    }
}

void write_rank_records(const std::vector<RankRecord>& r, const SymbolTable& st, std::ostream& out) {
    out << "query\tanswer\trank\tcase\tshape\n";
    for (const auto& x : r) {
        out << x.query_id << '\t' << st.node_name(x.answer) << '\t' << x.rank << '\t' << case_name(x.c) << '\t'
            << shape_name(x.shape) << '\n';
    }
}

std::vector<RankRecord> read_rank_records(std::istream& in, const SymbolTable& st) {
    std::vector<RankRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && line.rfind("query\t", 0) == 0) continue;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string x; std::getline(ss, x, '\t');) f.push_back(x);
        if (f.size() != 5) throw ParseError(lineno, "expected 5 tab-separated fields");
        RankRecord r;
        r.query_id = f[0];
        r.answer = st.node(f[1]);
        try {
            r.rank = std::stoul(f[2]);
        } catch (const std::exception&) {
            throw ParseError(lineno, "bad rank '" + f[2] + "'");
        }
        r.c = parse_case(f[3]);
        r.shape = parse_shape(f[4]);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace omqa
