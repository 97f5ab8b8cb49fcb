// Hot paths on a generated university graph. Run with
//   build/benchmarks/omqa_bench --benchmark_min_time=0.2
#include <benchmark/benchmark.h>

#include "omqa/eval.hpp"
#include "omqa/lubm.hpp"
#include "omqa/model.hpp"
#include "omqa/rewrite.hpp"
#include "omqa/sampler.hpp"

using namespace omqa;

namespace {

const LubmData& data() {
    static const LubmData d = generate_lubm(LubmOptions{}, 0);
    return d;
}

const KnowledgeGraph& closure() {
    static const KnowledgeGraph c = saturate(data().graph, data().ontology);
    return c;
}

const std::vector<TrainSample>& samples() {
    static const auto s = sample_onto(data().graph, data().ontology, {kTrainShapes.begin(), kTrainShapes.end()},
                                      OntoOptions{.cap = 200}, 1);
    return s;
}

void BM_Saturate(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(saturate(data().graph, data().ontology).size());
    st.counters["triples"] = static_cast<double>(closure().size());
}
BENCHMARK(BM_Saturate)->Unit(benchmark::kMillisecond);

void BM_Answers(benchmark::State& st) {
    const auto& s = samples();
    std::size_t i = 0;
    for (auto _ : st) benchmark::DoNotOptimize(answers(s[i++ % s.size()].query, closure()).size());
}
BENCHMARK(BM_Answers);

void BM_GenClosure(benchmark::State& st) {
    const auto& s = samples();
    std::size_t i = 0;
    for (auto _ : st) benchmark::DoNotOptimize(gen_closure(s[i++ % s.size()].query, data().ontology).members.size());
}
BENCHMARK(BM_GenClosure);

void BM_SpecClosure(benchmark::State& st) {
    const auto& s = samples();
    std::size_t i = 0;
    for (auto _ : st) benchmark::DoNotOptimize(spec_closure(s[i++ % s.size()].query, data().ontology).members.size());
}
BENCHMARK(BM_SpecClosure);

struct Batch {
    std::vector<std::vector<QueryPlan>> plans;
    std::vector<Example> examples;
};

Batch make_batch(std::size_t n, std::size_t k) {
    const auto& s = samples();
    const auto& st = *data().symbols;
    Batch b;
    b.plans.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& x = s[(i * 7) % s.size()];
        auto& ps = b.plans.emplace_back();
        ps.push_back(plan_query(x.query));
        for (const auto& g : x.gens) ps.push_back(plan_query(g));
    }
    Rng rng(3);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& x = s[(i * 7) % s.size()];
        Example e;
        for (const auto& p : b.plans[i]) e.plans.push_back(&p);
        e.positive = x.positives.front();
        e.negatives = negatives(x.positives, st.entities(), k, rng);
        b.examples.push_back(std::move(e));
    }
    return b;
}

void BM_Backward(benchmark::State& st) {
    const auto& sym = *data().symbols;
    auto p = init_parameters(sym.node_count(), sym.relation_count(), static_cast<std::size_t>(st.range(0)), 12.0, 0);
    auto b = make_batch(64, 32);
    Gradients g(p);
    for (auto _ : st) benchmark::DoNotOptimize(backward(p, b.examples, g));
    st.SetItemsProcessed(st.iterations() * 64);
}
BENCHMARK(BM_Backward)->Arg(32)->Arg(128)->Unit(benchmark::kMicrosecond);

void BM_RankAllEntities(benchmark::State& st) {
    const auto& sym = *data().symbols;
    auto p = init_parameters(sym.node_count(), sym.relation_count(), 128, 12.0, 0);
    const auto& s = samples();
    std::size_t i = 0;
    for (auto _ : st) {
        auto e = embed_query(p, s[i++ % s.size()].query);
        double acc = 0;
        for (auto v : sym.entities()) acc += distance(e, p, v);
        benchmark::DoNotOptimize(acc);
    }
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(sym.entities().size()));
}
BENCHMARK(BM_RankAllEntities)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
