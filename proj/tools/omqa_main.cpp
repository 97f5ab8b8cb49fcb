// omqa: command line front end over the omqa core library.
//
// Exit codes: 0 success, 1 usage error, 2 data / contract error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "omqa/checkpoint.hpp"
#include "omqa/error.hpp"
#include "omqa/eval.hpp"
#include "omqa/kg.hpp"
#include "omqa/ontology.hpp"
#include "omqa/parallel.hpp"
#include "omqa/pipeline.hpp"
#include "omqa/query_io.hpp"
#include "omqa/rewrite.hpp"
#include "omqa/sampler.hpp"
#include "omqa/trainer.hpp"

namespace fs = std::filesystem;
using namespace omqa;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    bool deterministic = false;
    bool quiet = false;
};

// Writes to a file, or standard output for "-".
class Output {
public:
    explicit Output(const std::string& path) {
        if (path != "-") {
            file_.open(path, std::ios::binary);
            if (!file_) throw Error("cannot write '" + path + "'");
        }
    }
    std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

private:
    std::ofstream file_;
};

std::shared_ptr<SymbolTable> load_graphs(const std::vector<std::string>& paths, std::vector<KnowledgeGraph>* out) {
    auto st = std::make_shared<SymbolTable>();
    for (const auto& p : paths) {
        auto g = load_triples_file(p, st);
        if (out) out->push_back(std::move(g));
    }
    return st;
}

// Rebuilds the id space recorded in a checkpoint.
std::shared_ptr<SymbolTable> symbols_from(const Checkpoint& c) {
    auto st = std::make_shared<SymbolTable>();
    for (const auto& r : c.relations) st->intern_relation(r);
    for (std::size_t i = 0; i < c.nodes.size(); ++i) {
        if (c.node_kinds[i] == "concept") {
            st->intern_concept(c.nodes[i]);
        } else {
            st->intern_entity(c.nodes[i]);
        }
    }
    return st;
}

std::vector<Shape> shapes_or(const std::string& csv, std::span<const Shape> dflt) {
    if (csv.empty()) return {dflt.begin(), dflt.end()};
    return parse_shape_list(csv);
}

void print_report(const SampleReport& r) {
    for (const auto& l : r.lines) {
        std::cerr << "# " << shape_name(l.shape) << ": " << l.produced << "/" << l.requested << " after " << l.attempts
                  << " attempts\n";
    }
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
}

void manifest(const Globals& g, const CLI::App* sub) {
    std::cerr << "# omqa " << sub->get_name() << "\n";
    std::istringstream lines(sub->config_to_str(true, false));
    std::cerr << "#   seed=" << g.seed << "\n#   deterministic=" << (g.deterministic ? "true" : "false") << "\n";
    for (std::string l; std::getline(lines, l);) {
        if (!l.empty() && l[0] != '[') std::cerr << "#   " << l << "\n";
    }
    std::cerr << "#   threads=" << thread_count() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ontology-mediated query answering with box embeddings"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);
    app.option_defaults()->always_capture_default();
    Globals G;
    app.add_option("--seed", G.seed, "Master seed; every stage derives a named sub-stream");
    app.add_option("--threads", G.threads, "Worker threads (default: OMQA_THREADS or all cores)");
    app.add_flag("--deterministic", G.deterministic, "Serial execution");
    app.add_flag("-q,--quiet", G.quiet, "No progress lines");

    // closure
    auto* closure = app.add_subcommand("closure", "Saturate a KG under an ontology");
    std::string kg, onto, out = "-";
    closure->add_option("--kg", kg, "Triple file")->required()->check(CLI::ExistingFile);
    closure->add_option("--ontology", onto, "Ontology file")->required()->check(CLI::ExistingFile);
    closure->add_option("--out", out, "Output file or -");

    // rewrite
    auto* rewrite = app.add_subcommand("rewrite", "Generalize / specialize queries");
    std::vector<std::string> kgs;
    std::string query_file, mode = "gen", depth = "2", shapes_csv;
    bool no_r8 = false;
    rewrite->add_option("--kg", kgs, "Triple files providing the vocabulary")->check(CLI::ExistingFile);
    rewrite->add_option("--ontology", onto, "Ontology file")->required()->check(CLI::ExistingFile);
    rewrite->add_option("--query", query_file, "Query file")->required()->check(CLI::ExistingFile);
    rewrite->add_option("--mode", mode, "gen | spec | rew")->check(CLI::IsMember({"gen", "spec", "rew"}));
    rewrite->add_option("--depth", depth, "Closure depth or 'fix'");
    rewrite->add_option("--shapes", shapes_csv, "Shapes kept by rew (default: all)");
    rewrite->add_flag("--no-r8", no_r8, "Disable anchor abstraction / atom unification");
    rewrite->add_option("--out", out, "Output file or -");

    // split
    auto* splitc = app.add_subcommand("split", "Split a KG into nested train / valid / test graphs");
    double ratio = 0.1;
    std::string out_dir;
    splitc->add_option("--kg", kg, "Triple file")->required()->check(CLI::ExistingFile);
    splitc->add_option("--ratio", ratio, "Fraction removed per level")->check(CLI::Range(0.0, 1.0));
    splitc->add_option("--out-dir", out_dir, "Directory for train.tsv, valid.tsv, test.tsv")->required();

    // sample
    auto* sample = app.add_subcommand("sample", "Generate training queries");
    std::string strategy = "plain";
    std::size_t n = 100, sdepth = 2, cap = 1000;
    double anchor_fraction = 0.5;
    sample->add_option("--kg", kg, "Training graph")->required()->check(CLI::ExistingFile);
    sample->add_option("--ontology", onto, "Ontology (gen, spec, onto)")->check(CLI::ExistingFile);
    sample->add_option("--strategy", strategy, "plain | gen | spec | onto")
        ->check(CLI::IsMember({"plain", "gen", "spec", "onto"}));
    sample->add_option("--shapes", shapes_csv, "Comma separated shapes (default: training shapes)");
    sample->add_option("--n", n, "Queries per shape (plain, gen, spec)");
    sample->add_option("--depth", sdepth, "Rewriting depth (gen, spec)");
    sample->add_option("--anchor-fraction", anchor_fraction, "Anchor fraction per pattern (onto)")
        ->check(CLI::Range(0.0, 1.0));
    sample->add_option("--cap", cap, "Queries per shape (onto, 0 = unbounded)");
    sample->add_option("--out", out, "Output file or -");

    // build-eval
    auto* build = app.add_subcommand("build-eval", "Build test case A, B or C");
    std::string train_kg, valid_kg, test_kg, case_tag = "A", split_tag = "test";
    std::vector<std::string> exclude;
    build->add_option("--train", train_kg, "Training graph")->required()->check(CLI::ExistingFile);
    build->add_option("--valid", valid_kg, "Validation graph")->required()->check(CLI::ExistingFile);
    build->add_option("--test", test_kg, "Test graph")->required()->check(CLI::ExistingFile);
    build->add_option("--ontology", onto, "Ontology file")->required()->check(CLI::ExistingFile);
    build->add_option("--case", case_tag, "A | B | C")->check(CLI::IsMember({"A", "B", "C"}));
    build->add_option("--split", split_tag, "test | valid")->check(CLI::IsMember({"test", "valid"}));
    build->add_option("--shapes", shapes_csv, "Comma separated shapes (default: all nine)");
    build->add_option("--n", n, "Queries per shape");
    build->add_option("--exclude", exclude, "Query files whose queries must not reappear")->check(CLI::ExistingFile);
    build->add_option("--out", out, "Output file or -");

    // train
    auto* trainc = app.add_subcommand("train", "Train a box embedding model");
    std::string samples_file, valid_file, config_file;
    std::vector<std::string> sets;
    bool desk = false;
    trainc->add_option("--kg", kgs, "Triple files defining the vocabulary (include the test graph)")
        ->required()
        ->check(CLI::ExistingFile);
    trainc->add_option("--ontology", onto, "Ontology file (adds its concepts)")->check(CLI::ExistingFile);
    trainc->add_option("--samples", samples_file, "Training queries")->required()->check(CLI::ExistingFile);
    trainc->add_option("--valid", valid_file, "Validation queries")->required()->check(CLI::ExistingFile);
    trainc->add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
    trainc->add_option("--set", sets, "key=value override (repeatable)");
    trainc->add_flag("--desk", desk, "Desk-scale preset");
    trainc->add_option("--out", out_dir, "Output directory")->required();

    // eval
    auto* evalc = app.add_subcommand("eval", "Rank hard answers");
    std::string model, baseline, ranks;
    evalc->add_option("--model", model, "Checkpoint")->required()->check(CLI::ExistingFile);
    evalc->add_option("--queries", query_file, "Evaluation queries")->required()->check(CLI::ExistingFile);
    evalc->add_option("--case", case_tag, "Keep only this case")->check(CLI::IsMember({"A", "B", "C"}));
    evalc->add_option("--ontology", onto, "Ontology (rewriting baseline)")->check(CLI::ExistingFile);
    evalc->add_option("--baseline", baseline, "rewriting")->check(CLI::IsMember({"rewriting"}));
    evalc->add_option("--ranks", ranks, "Dump rank records as TSV");
    evalc->add_option("--out", out, "Metrics file or -");

    // stats
    auto* statsc = app.add_subcommand("stats", "Graph statistics");
    statsc->add_option("--kg", kg, "Triple file")->required()->check(CLI::ExistingFile);
    statsc->add_option("--ontology", onto, "Ontology file")->check(CLI::ExistingFile);

    // demo
    auto* demo = app.add_subcommand("demo", "End-to-end desk-scale run on a generated university KG");
    std::size_t steps = 0;
    demo->add_option("--out", out_dir, "Output directory")->required();
    demo->add_option("--steps", steps, "Override the preset's training steps");
    demo->add_option("--set", sets, "Trainer key=value override (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    // these options share a variable per command; --case defaults differ
    if (evalc->parsed() && evalc->count("--case") == 0) case_tag.clear();

    if (G.deterministic) {
        set_thread_count(1);
    } else if (G.threads) {
        set_thread_count(G.threads);
    } else if (const char* env = std::getenv("OMQA_THREADS")) {
        try {
            set_thread_count(std::stoul(env));
        } catch (const std::exception&) {
            std::cerr << "error: OMQA_THREADS must be a positive integer\n";
            return 1;
        }
    }
    const CLI::App* sub = app.get_subcommands().front();
    manifest(G, sub);
    const ProgressFn progress = [&](const std::string& s) {
        if (!G.quiet) std::cerr << s << "\n";
    };

    try {
        if (closure->parsed()) {
            auto st = std::make_shared<SymbolTable>();
            auto g = load_triples_file(kg, st);
            auto o = load_ontology_file(onto, st);
            Output o_(out);
            serialize(saturate(g, o), o_.stream());
        } else if (rewrite->parsed()) {
            auto st = load_graphs(kgs, nullptr);
            auto o = load_ontology_file(onto, st);
            auto recs = read_query_file(query_file, *st);
            RewriteOptions ro;
            ro.r8 = !no_r8;
            std::optional<std::size_t> d;
            if (depth != "fix") {
                try {
                    d = std::stoul(depth);
                } catch (const std::exception&) {
                    throw ConfigError("--depth must be a number or 'fix'");
                }
            }
            std::vector<QueryRecord> outv;
            for (const auto& r : recs) {
                RewriteSet rs = mode == "gen"    ? gen_closure(r.query, o, d, ro)
                                : mode == "spec" ? spec_closure(r.query, o, d, ro)
                                                 : rew(r.query, o, shapes_or(shapes_csv, kAllShapes));
                for (std::size_t i = 0; i < rs.members.size(); ++i) {
                    QueryRecord m;
                    m.id = (r.id.empty() ? "q" : r.id) + "." + std::to_string(i);
                    m.query = rs.members[i].query;
                    for (const auto& s : rs.members[i].trace) m.provenance.push_back(step_to_string(s, *st));
                    outv.push_back(std::move(m));
                }
            }
            Output o_(out);
            write_query_file(o_.stream(), outv, *st);
        } else if (splitc->parsed()) {
            auto g = load_triples_file(kg);
            auto b = split(g, ratio, Rng::derive(G.seed, "split"));
            fs::create_directories(out_dir);
            for (auto [name, gr] : {std::pair{"train.tsv", &b.g_train}, {"valid.tsv", &b.g_valid},
                                    {"test.tsv", &b.g_test}}) {
                Output o_((fs::path(out_dir) / name).string());
                serialize(*gr, o_.stream());
            }
            std::cerr << "# sizes " << b.g_train.size() << " / " << b.g_valid.size() << " / " << b.g_test.size()
                      << "\n";
        } else if (sample->parsed()) {
            auto st = std::make_shared<SymbolTable>();
            auto g = load_triples_file(kg, st);
            const Strategy s = parse_strategy(strategy);
            if (s != Strategy::Plain && onto.empty()) throw ConfigError("--ontology is required for " + strategy);
            Ontology o = onto.empty() ? Ontology(st) : load_ontology_file(onto, st);
            auto shapes = shapes_or(shapes_csv, kTrainShapes);
            SampleReport rep;
            const std::uint64_t seed = Rng::derive(G.seed, "sample");
            std::vector<TrainSample> v;
            switch (s) {
                case Strategy::Plain: v = sample_plain(g, shapes, n, seed, &rep); break;
                case Strategy::Gen: v = sample_certain(g, o, shapes, n, seed, {CertainMode::Gen, sdepth}, &rep); break;
                case Strategy::Spec:
                    v = sample_certain(g, o, shapes, n, seed, {CertainMode::Spec, sdepth}, &rep);
                    break;
                case Strategy::Onto: {
                    OntoOptions oo;
                    oo.anchor_fraction = anchor_fraction;
                    oo.cap = cap;
                    v = sample_onto(g, o, shapes, oo, seed, &rep);
                    break;
                }
            }
            print_report(rep);
            std::vector<QueryRecord> recs;
            for (std::size_t i = 0; i < v.size(); ++i) recs.push_back(to_record(v[i], i));
            Output o_(out);
            write_query_file(o_.stream(), recs, *st);
        } else if (build->parsed()) {
            std::vector<KnowledgeGraph> gs;
            auto st = load_graphs({train_kg, valid_kg, test_kg}, &gs);
            auto o = load_ontology_file(onto, st);
            SplitBundle b{gs[0], gs[1], gs[2]};
            EvalOptions eo;
            eo.split = split_tag == "test" ? EvalSplit::Test : EvalSplit::Valid;
            for (const auto& f : exclude) {
                for (const auto& r : read_query_file(f, *st)) eo.exclude.insert(canonical_form(r.query));
            }
            SampleReport rep;
            auto v = build_eval(parse_case(case_tag), b, o, shapes_or(shapes_csv, kAllShapes), n,
                                Rng::derive(G.seed, "build-eval"), eo, &rep);
            print_report(rep);
            std::vector<QueryRecord> recs;
            for (std::size_t i = 0; i < v.size(); ++i) recs.push_back(to_record(v[i], i));
            Output o_(out);
            write_query_file(o_.stream(), recs, *st);
        } else if (trainc->parsed()) {
            auto st = load_graphs(kgs, nullptr);
            if (!onto.empty()) load_ontology_file(onto, st);
            TrainConfig cfg = config_file.empty() ? TrainConfig{} : parse_config_file(config_file);
            if (desk) cfg.apply_desk_preset();
            if (app.count("--seed")) cfg.seed = G.seed;
            for (const auto& kv : sets) {
                auto eq = kv.find('=');
                if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
                set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
            }
            std::vector<TrainSample> samples;
            for (const auto& r : read_query_file(samples_file, *st)) samples.push_back(train_sample_from(r));
            std::vector<EvalSample> valid;
            for (const auto& r : read_query_file(valid_file, *st)) valid.push_back(eval_sample_from(r));
            auto res = train(cfg, samples, valid, *st, progress);
            fs::create_directories(out_dir);
            const auto ckpt = (fs::path(out_dir) / "model.ckpt").string();
            save_checkpoint(res.params, *st, ckpt);
            res.manifest.checkpoint = "model.ckpt";
            for (const auto& f : kgs) res.manifest.digests[f] = file_digest(f);
            res.manifest.digests[samples_file] = file_digest(samples_file);
            res.manifest.digests[valid_file] = file_digest(valid_file);
            Output m((fs::path(out_dir) / "manifest.json").string());
            res.manifest.write_json(m.stream());
            std::cerr << "# " << res.manifest.stop_reason << ", best step " << res.manifest.best_step
                      << ", valid hits@3 " << res.manifest.best_hits3 << "\n";
        } else if (evalc->parsed()) {
            auto ck = load_checkpoint(model);
            auto st = symbols_from(ck);
            std::vector<EvalSample> set;
            std::vector<std::string> ids;
            for (const auto& r : read_query_file(query_file, *st)) {
                auto s = eval_sample_from(r);
                if (!case_tag.empty() && s.c != parse_case(case_tag)) continue;
                set.push_back(std::move(s));
                ids.push_back(r.id);
            }
            if (set.empty()) throw ContractError("no evaluation queries");
            std::vector<RankRecord> recs;
            MetricsTable t;
            std::string title = fs::path(model).filename().string();
            if (baseline == "rewriting") {
                if (onto.empty()) throw ConfigError("--baseline rewriting needs --ontology");
                auto o = load_ontology_file(onto, st);
                t = evaluate_rewriting_baseline(ck.params, set, o, st->entities(), &recs, ids);
                title = "rewriting+" + title;
            } else {
                t = evaluate(ck.params, set, st->entities(), &recs, ids);
            }
            Output o_(out);
            write_metrics(t, o_.stream(), title);
            if (!ranks.empty()) {
                Output r(ranks);
                write_rank_records(recs, *st, r.stream());
            }
        } else if (statsc->parsed()) {
            auto st = std::make_shared<SymbolTable>();
            auto g = load_triples_file(kg, st);
            std::optional<Ontology> o;
            if (!onto.empty()) o = load_ontology_file(onto, st);
            write_stats(stats(g, o ? &*o : nullptr), std::cout);
        } else if (demo->parsed()) {
            DemoOptions opt;
            if (steps) opt.max_steps = steps;
            for (const auto& kv : sets) {
                auto eq = kv.find('=');
                if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
                opt.overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
            }
            auto r = run_demo(out_dir, G.seed, opt, progress);
            std::cout << r.comparison;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
