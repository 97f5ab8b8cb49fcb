#include "omqa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <type_traits>

#include "json.hpp"
#include "omqa/error.hpp"

namespace omqa {

void TrainConfig::apply_desk_preset() {
    desk_scale = true;
    d = 32;
    max_steps = 20000;
    batch_size = 128;
    gamma = 4.0;
    learning_rate = kDeskLearningRate;
    eval_every = kDeskEvalEvery;
}

void TrainConfig::validate() const {
    if (d == 0) throw ConfigError("d must be positive");
    if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (max_steps == 0) throw ConfigError("max_steps must be positive");
    if (k_negatives == 0) throw ConfigError("k_negatives must be positive");
    if (eval_every == 0) throw ConfigError("eval_every must be positive");
    if (!(gamma > 0) || !std::isfinite(gamma)) throw ConfigError("gamma must be positive");
    parse_strategy(strategy);
}

namespace {

std::string trim(const std::string& s) {
    auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

template <class T>
T parse_num(const std::string& key, const std::string& v) {
    // unsigned extraction would wrap "-3" around instead of failing
    if constexpr (std::is_unsigned_v<T>) {
        if (v.find('-') != std::string::npos) throw ConfigError("bad value '" + v + "' for " + key);
    }
    std::istringstream ss(v);
    T x{};
    ss >> x;
    if (!ss || !ss.eof()) throw ConfigError("bad value '" + v + "' for " + key);
    return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("bad boolean '" + v + "' for " + key);
}

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

void set_config_value(TrainConfig& c, const std::string& key, const std::string& value) {
    if (key == "d") {
        c.d = parse_num<std::size_t>(key, value);
    } else if (key == "learning_rate") {
        c.learning_rate = parse_num<double>(key, value);
    } else if (key == "batch_size") {
        c.batch_size = parse_num<std::size_t>(key, value);
    } else if (key == "max_steps") {
        c.max_steps = parse_num<std::size_t>(key, value);
    } else if (key == "k_negatives") {
        c.k_negatives = parse_num<std::size_t>(key, value);
    } else if (key == "eval_every") {
        c.eval_every = parse_num<std::size_t>(key, value);
    } else if (key == "patience") {
        c.patience = parse_num<std::size_t>(key, value);
    } else if (key == "gamma") {
        c.gamma = parse_num<double>(key, value);
    } else if (key == "seed") {
        c.seed = parse_num<std::uint64_t>(key, value);
    } else if (key == "strategy") {
        parse_strategy(value);
        c.strategy = value;
    } else if (key == "desk_scale") {
        if (parse_bool(key, value)) {
            c.apply_desk_preset();
        } else {
            c.desk_scale = false;
        }
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

TrainConfig parse_config(std::istream& in) {
    std::vector<std::pair<std::string, std::string>> kv;
    std::string line;
    std::size_t lineno = 0;
    bool desk = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(lineno, "expected key = value");
        auto key = trim(line.substr(0, eq));
        auto val = trim(line.substr(eq + 1));
        if (key == "desk_scale") {
            desk = parse_bool(key, val);
            continue;
        }
        kv.emplace_back(key, val);
    }
    TrainConfig c;
    if (desk) c.apply_desk_preset();
    for (auto& [k, v] : kv) set_config_value(c, k, v);
    c.validate();
    return c;
}

TrainConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path);
    return parse_config(in);
}

void write_config(const TrainConfig& c, std::ostream& out) {
    out << "d = " << c.d << "\n"
        << "learning_rate = " << fmt_double(c.learning_rate) << "\n"
        << "batch_size = " << c.batch_size << "\n"
        << "max_steps = " << c.max_steps << "\n"
        << "k_negatives = " << c.k_negatives << "\n"
        << "eval_every = " << c.eval_every << "\n"
        << "patience = " << c.patience << "\n"
        << "gamma = " << fmt_double(c.gamma) << "\n"
        << "seed = " << c.seed << "\n"
        << "strategy = " << c.strategy << "\n"
        << "desk_scale = " << (c.desk_scale ? "true" : "false") << "\n";
}

// ---------------------------------------------------------------------------

BatchStream::BatchStream(const std::vector<TrainSample>& samples, std::vector<NodeId> universe,
                         std::size_t batch_size, std::size_t k, std::uint64_t seed)
    : samples_(samples), universe_(std::move(universe)), batch_(batch_size), k_(k), rng_(Rng::derive(seed, "batches")) {
    if (samples_.empty()) throw ConfigError("no training samples");
    if (batch_ == 0) throw ConfigError("batch size must be positive");
    for (const auto& s : samples_) {
        if (s.positives.empty()) throw ContractError("training sample without positives");
    }
    order_.resize(samples_.size());
    reshuffle();
}

void BatchStream::reshuffle() {
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    rng_.shuffle(order_);
    pos_ = 0;
}

std::vector<BatchItem> BatchStream::next() {
    if (pos_ == order_.size()) {
        ++epoch_;
        reshuffle();
    }
    std::vector<BatchItem> out;
    while (out.size() < batch_ && pos_ < order_.size()) {
        const auto& s = samples_[order_[pos_]];
        BatchItem it;
        it.sample = order_[pos_];
        it.positive = s.positives[rng_.index(s.positives.size())];
        it.negatives = negatives(s.positives, universe_, k_, rng_);
        out.push_back(std::move(it));
        ++pos_;
    }
    return out;
}

// ---------------------------------------------------------------------------

std::string digest_hex(const std::string& bytes) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return digest_hex(ss.str());
}

void RunManifest::write_json(std::ostream& out) const {
    nlohmann::ordered_json j;
    j["config"] = config;
    j["digests"] = digests;
    auto h = nlohmann::ordered_json::array();
    for (const auto& e : history) {
        h.push_back({{"step", e.step}, {"train_loss", e.train_loss}, {"hits@3", e.hits3}, {"mrr", e.mrr}});
    }
    j["history"] = h;
    j["best_step"] = best_step;
    j["best_hits@3"] = best_hits3;
    j["steps_run"] = steps_run;
    j["stop_reason"] = stop_reason;
    j["checkpoint"] = checkpoint;
    out << j.dump(2) << "\n";
}

double sgd_step(Parameters& p, const std::vector<Example>& batch, Gradients& g, double lr) {
    double L = backward(p, batch, g);
    const std::size_t d = p.d;
    for (auto r : g.entity_rows) {
        for (std::size_t k = 0; k < d; ++k) p.entity[r * d + k] -= static_cast<float>(lr * g.entity[r * d + k]);
    }
    for (auto r : g.rel_rows) {
        for (std::size_t k = 0; k < d; ++k) {
            p.rel_center[r * d + k] -= static_cast<float>(lr * g.rel_center[r * d + k]);
            p.rel_offset[r * d + k] -= static_cast<float>(lr * g.rel_offset[r * d + k]);
        }
    }
    auto dense = [&](std::vector<float>& w, const std::vector<double>& gw) {
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= static_cast<float>(lr * gw[i]);
    };
    dense(p.attn_w1, g.attn_w1);
    dense(p.attn_b1, g.attn_b1);
    dense(p.attn_w2, g.attn_w2);
    dense(p.attn_b2, g.attn_b2);
    dense(p.ds_u1, g.ds_u1);
    dense(p.ds_c1, g.ds_c1);
    dense(p.ds_u2, g.ds_u2);
    dense(p.ds_c2, g.ds_c2);
    dense(p.ds_v, g.ds_v);
    dense(p.ds_e, g.ds_e);
    for (auto& x : p.rel_offset) x = std::max(x, 0.0f);
    return L;
}

TrainResult train(const TrainConfig& cfg, const std::vector<TrainSample>& samples,
                  const std::vector<EvalSample>& valid, const SymbolTable& st, const ProgressFn& progress) {
    cfg.validate();
    if (samples.empty()) throw ConfigError("no training samples");
    if (valid.empty()) throw ConfigError("empty validation set");
    TrainResult res;
    auto& man = res.manifest;
    {
        std::ostringstream ss;
        write_config(cfg, ss);
        man.config = ss.str();
    }
    Parameters p = init_parameters(st.node_count(), st.relation_count(), cfg.d, cfg.gamma, cfg.seed);
    res.params = p;
    // plans: query first, then its generalizations
    std::vector<std::vector<QueryPlan>> plans(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        plans[i].push_back(plan_query(samples[i].query));
        for (const auto& gq : samples[i].gens) plans[i].push_back(plan_query(gq));
    }
    BatchStream stream(samples, st.entities(), cfg.batch_size, cfg.k_negatives, cfg.seed);
    Gradients g(p);
    const auto& entities = st.entities();
    std::size_t since_best = 0;
    double loss_sum = 0;
    std::size_t loss_n = 0;
    man.stop_reason = "max_steps";
    for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
        auto items = stream.next();
        std::vector<Example> batch;
        batch.reserve(items.size());
        for (auto& it : items) {
            Example ex;
            for (const auto& pl : plans[it.sample]) ex.plans.push_back(&pl);
            ex.positive = it.positive;
            ex.negatives = std::move(it.negatives);
            batch.push_back(std::move(ex));
        }
        double L;
        try {
            L = sgd_step(p, batch, g, cfg.learning_rate);
        } catch (const NumericError& e) {
            man.stop_reason = std::string("diverged at step ") + std::to_string(step) + " (" + e.what() + ")";
            man.steps_run = step - 1;
            if (progress) progress(man.stop_reason);
            return res;
        }
        man.steps_run = step;
        loss_sum += L;
        ++loss_n;
        if (step % cfg.eval_every != 0 && step != cfg.max_steps) continue;
        auto t = evaluate(p, valid, entities);
        EvalPoint pt{step, loss_n ? loss_sum / static_cast<double>(loss_n) : 0.0, 0.0, 0.0};
        // pooled over every case present in the validation set
        std::size_t n = 0;
        double h = 0, m = 0;
        for (const auto& [k, c] : t.cells) {
            if (k.second != "all") continue;
            n += c.count;
            h += c.hits3 * static_cast<double>(c.count);
            m += c.mrr * static_cast<double>(c.count);
        }
        if (n) {
            pt.hits3 = h / static_cast<double>(n);
            pt.mrr = m / static_cast<double>(n);
        }
        man.history.push_back(pt);
        loss_sum = 0;
        loss_n = 0;
        if (progress) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "step %zu loss %.5f valid hits@3 %.4f mrr %.4f", step, pt.train_loss,
                          pt.hits3, pt.mrr);
            progress(buf);
        }
        if (pt.hits3 > man.best_hits3) {
            man.best_hits3 = pt.hits3;
            man.best_step = step;
            res.params = p;
            since_best = 0;
        } else {
            ++since_best;
        }
        if (since_best >= cfg.patience) {
            if (step != cfg.max_steps) man.stop_reason = "early stop";
            break;
        }
    }
    return res;
}

}  // namespace omqa
