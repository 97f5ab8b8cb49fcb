#include "omqa/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "omqa/checkpoint.hpp"
#include "omqa/error.hpp"
#include "omqa/ontology.hpp"
#include "omqa/query_io.hpp"
#include "omqa/sampler.hpp"

namespace fs = std::filesystem;

namespace omqa {

namespace {

class Sink {
public:
    explicit Sink(std::string dir) : dir_(std::move(dir)) {
        if (!dir_.empty()) fs::create_directories(dir_);
    }
    bool on() const { return !dir_.empty(); }
    std::string path(const std::string& name) const { return (fs::path(dir_) / name).string(); }

    template <class Fn>
    void write(const std::string& name, Fn fn) const {
        if (!on()) return;
        std::ofstream out(path(name), std::ios::binary);
        if (!out) throw Error("cannot write " + path(name));
        fn(out);
    }

private:
    std::string dir_;
};

template <class S>
std::vector<QueryRecord> records(const std::vector<S>& v) {
    std::vector<QueryRecord> r;
    r.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) r.push_back(to_record(v[i], i));
    return r;
}

void note(const ProgressFn& progress, const std::string& s) {
    if (progress) progress(s);
}

std::string cell(const MetricsTable& t, const char* c, const char* what) {
    const MetricCell* m = t.find(c, "all");
    if (!m) return "     -";
    char buf[16];
    std::snprintf(buf, sizeof buf, "%6.4f", what[0] == 'h' ? m->hits3 : m->mrr);
    return buf;
}

std::string comparison_table(const MetricsTable& plain, const MetricsTable& rewriting, const MetricsTable& onto,
                             bool with_rewriting) {
    std::ostringstream out;
    out << "# test HITS@3 / MRR over hard answers, pessimistic ties\n";
    out << "model                 A.hits@3 A.mrr  B.hits@3 B.mrr  C.hits@3 C.mrr\n";
    auto row = [&](const char* name, const MetricsTable& t) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%-21s", name);
        out << buf;
        for (const char* c : {"A", "B", "C"}) out << " " << cell(t, c, "h") << "   " << cell(t, c, "m");
        out << "\n";
    };
    row("Q2B_plain", plain);
    if (with_rewriting) row("Rewriting+Q2B_plain", rewriting);
    row("O2B_onto", onto);
    return out.str();
}

}  // namespace

DemoResult run_demo(const std::string& out_dir, std::uint64_t seed, const DemoOptions& opt, const ProgressFn& progress) {
    Sink sink(out_dir);
    DemoResult res;

    auto data = generate_lubm(opt.lubm, Rng::derive(seed, "demo/kg"));
    const SymbolTable& st = *data.symbols;
    const Ontology& o = data.ontology;
    sink.write("kg.tsv", [&](std::ostream& s) { serialize(data.graph, s); });
    sink.write("ontology.onto", [&](std::ostream& s) { write_ontology(o, s); });
    note(progress, "generated " + std::to_string(data.graph.size()) + " triples, " +
                       std::to_string(o.axioms().size()) + " axioms");

    auto bundle = split(data.graph, opt.split_ratio, Rng::derive(seed, "demo/split"));
    sink.write("train.tsv", [&](std::ostream& s) { serialize(bundle.g_train, s); });
    sink.write("valid.tsv", [&](std::ostream& s) { serialize(bundle.g_valid, s); });
    sink.write("test.tsv", [&](std::ostream& s) { serialize(bundle.g_test, s); });
    auto closure = saturate(bundle.g_train, o);
    sink.write("train_closure.tsv", [&](std::ostream& s) { serialize(closure, s); });
    note(progress, "split " + std::to_string(bundle.g_train.size()) + "/" + std::to_string(bundle.g_valid.size()) +
                       "/" + std::to_string(bundle.g_test.size()) + ", train closure " +
                       std::to_string(closure.size()));

    // training queries, all four strategies
    const std::vector<Shape> train_shapes(kTrainShapes.begin(), kTrainShapes.end());
    const std::vector<Shape> all_shapes(kAllShapes.begin(), kAllShapes.end());
    auto plain = sample_plain(bundle.g_train, train_shapes, opt.train_per_shape, Rng::derive(seed, "demo/plain"));
    auto gen = sample_certain(bundle.g_train, o, train_shapes, opt.certain_per_shape, Rng::derive(seed, "demo/gen"),
                              {CertainMode::Gen, 2});
    auto spec = sample_certain(bundle.g_train, o, train_shapes, opt.certain_per_shape,
                               Rng::derive(seed, "demo/spec"), {CertainMode::Spec, 2});
    OntoOptions oo;
    oo.cap = opt.train_per_shape;
    auto onto = sample_onto(bundle.g_train, o, train_shapes, oo, Rng::derive(seed, "demo/onto"));
    sink.write("train_plain.queries", [&](std::ostream& s) { write_query_file(s, records(plain), st); });
    sink.write("train_gen.queries", [&](std::ostream& s) { write_query_file(s, records(gen), st); });
    sink.write("train_spec.queries", [&](std::ostream& s) { write_query_file(s, records(spec), st); });
    sink.write("train_onto.queries", [&](std::ostream& s) { write_query_file(s, records(onto), st); });
    note(progress, "samples plain " + std::to_string(plain.size()) + ", gen " + std::to_string(gen.size()) +
                       ", spec " + std::to_string(spec.size()) + ", onto " + std::to_string(onto.size()));

    // validation (cases A and C on the validation split) and test sets; test
    // queries never coincide with a training or validation query of either model
    EvalOptions vo;
    vo.split = EvalSplit::Valid;
    for (const auto* set : {&plain, &onto}) {
        for (const auto& s : *set) vo.exclude.insert(canonical_form(s.query));
    }
    std::vector<EvalSample> valid;
    for (EvalCase c : {EvalCase::A, EvalCase::C}) {
        auto v = build_eval(c, bundle, o, all_shapes, opt.valid_per_shape, Rng::derive(seed, "demo/valid"), vo);
        std::move(v.begin(), v.end(), std::back_inserter(valid));
    }
    sink.write("valid.queries", [&](std::ostream& s) { write_query_file(s, records(valid), st); });
    EvalOptions to = vo;
    to.split = EvalSplit::Test;
    for (const auto& s : valid) to.exclude.insert(canonical_form(s.query));
    std::vector<EvalSample> test[3];
    std::vector<std::string> test_ids;
    for (EvalCase c : {EvalCase::A, EvalCase::B, EvalCase::C}) {
        auto& t = test[static_cast<int>(c)];
        t = build_eval(c, bundle, o, all_shapes, opt.test_per_shape, Rng::derive(seed, "demo/test"), to);
        auto recs = records(t);
        // case-prefixed so rank files can be joined back to the query files
        for (auto& r : recs) r.id = std::string(case_name(c)) + "." + r.id;
        for (const auto& r : recs) test_ids.push_back(r.id);
        sink.write("test_" + std::string(case_name(c)) + ".queries",
                   [&](std::ostream& s) { write_query_file(s, recs, st); });
    }
    std::vector<EvalSample> test_all;
    for (auto& t : test) test_all.insert(test_all.end(), t.begin(), t.end());
    note(progress, "valid " + std::to_string(valid.size()) + ", test " + std::to_string(test_all.size()));

    TrainConfig cfg;
    cfg.apply_desk_preset();
    cfg.seed = Rng::derive(seed, "demo/train");
    if (opt.max_steps) {
        cfg.max_steps = *opt.max_steps;
        cfg.eval_every = std::min(cfg.eval_every, cfg.max_steps);
    }
    for (const auto& [k, v] : opt.overrides) set_config_value(cfg, k, v);
    auto run = [&](const std::vector<TrainSample>& samples, const std::string& name) {
        TrainConfig c = cfg;
        c.strategy = name == "q2b_plain" ? "plain" : "onto";
        auto r = train(c, samples, valid, st, [&](const std::string& s) { note(progress, name + ": " + s); });
        if (sink.on()) {
            r.manifest.checkpoint = name + ".ckpt";
            r.manifest.digests["train.tsv"] = file_digest(sink.path("train.tsv"));
            r.manifest.digests["train_" + c.strategy + ".queries"] =
                file_digest(sink.path("train_" + c.strategy + ".queries"));
            r.manifest.digests["valid.queries"] = file_digest(sink.path("valid.queries"));
            save_checkpoint(r.params, st, sink.path(name + ".ckpt"));
            sink.write(name + ".manifest.json", [&](std::ostream& s) { r.manifest.write_json(s); });
        }
        return r;
    };
    auto plain_run = run(plain, "q2b_plain");
    auto onto_run = run(onto, "o2b_onto");

    const auto& entities = st.entities();
    std::vector<RankRecord> recs;
    res.plain = evaluate(plain_run.params, test_all, entities, &recs, test_ids);
    sink.write("metrics_q2b_plain.txt", [&](std::ostream& s) { write_metrics(res.plain, s, "Q2B_plain"); });
    sink.write("ranks_q2b_plain.tsv", [&](std::ostream& s) { write_rank_records(recs, st, s); });
    res.onto = evaluate(onto_run.params, test_all, entities, &recs, test_ids);
    sink.write("metrics_o2b_onto.txt", [&](std::ostream& s) { write_metrics(res.onto, s, "O2B_onto"); });
    sink.write("ranks_o2b_onto.tsv", [&](std::ostream& s) { write_rank_records(recs, st, s); });
    if (opt.rewriting_baseline) {
        res.rewriting = evaluate_rewriting_baseline(plain_run.params, test_all, o, entities, &recs, test_ids);
        sink.write("metrics_rewriting_q2b_plain.txt",
                   [&](std::ostream& s) { write_metrics(res.rewriting, s, "Rewriting+Q2B_plain"); });
        sink.write("ranks_rewriting_q2b_plain.tsv", [&](std::ostream& s) { write_rank_records(recs, st, s); });
    }
    res.comparison = comparison_table(res.plain, res.rewriting, res.onto, opt.rewriting_baseline);
    sink.write("comparison.txt", [&](std::ostream& s) { s << res.comparison; });
    res.plain_run = std::move(plain_run.manifest);
    res.onto_run = std::move(onto_run.manifest);
    return res;
}

}  // namespace omqa
