#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "omqa/eval.hpp"
#include "omqa/model.hpp"
#include "omqa/rng.hpp"
#include "omqa/sampler.hpp"

namespace omqa {

struct TrainConfig {
    std::size_t d = 400;
    double learning_rate = 1e-4;
    std::size_t batch_size = 512;
    std::size_t max_steps = 150000;
    std::size_t k_negatives = 32;
    std::size_t eval_every = 5000;
    std::size_t patience = 5;
    double gamma = 12.0;
    std::uint64_t seed = 0;
    std::string strategy = "plain";
    bool desk_scale = false;

    // d=32, 20000 steps, batch 128, γ=4, and the desk learning rate / eval cadence.
    void apply_desk_preset();
    void validate() const;  // ConfigError
};

inline constexpr double kDeskLearningRate = 0.5;
inline constexpr std::size_t kDeskEvalEvery = 2000;

// `key = value` lines, '#' comments. desk_scale = true applies the preset
// before the explicit keys, whatever their order. Unknown keys: ConfigError.
TrainConfig parse_config(std::istream& in);
TrainConfig parse_config_file(const std::string& path);
// Applies one `key=value` override (CLI --set).
void set_config_value(TrainConfig& c, const std::string& key, const std::string& value);
void write_config(const TrainConfig& c, std::ostream& out);

struct BatchItem {
    std::size_t sample = 0;
    NodeId positive = 0;
    std::vector<NodeId> negatives;
};

// Epoch-wise shuffled batches; the last batch of an epoch may be short.
class BatchStream {
public:
    BatchStream(const std::vector<TrainSample>& samples, std::vector<NodeId> universe, std::size_t batch_size,
                std::size_t k, std::uint64_t seed);
    std::vector<BatchItem> next();
    std::size_t epoch() const { return epoch_; }

private:
    void reshuffle();

    const std::vector<TrainSample>& samples_;
    std::vector<NodeId> universe_;
    std::size_t batch_, k_;
    Rng rng_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0, epoch_ = 0;
};

struct EvalPoint {
    std::size_t step = 0;
    double train_loss = 0;  // mean over steps since the previous evaluation
    double hits3 = 0, mrr = 0;
};

struct RunManifest {
    std::string config;                          // write_config output
    std::map<std::string, std::string> digests;  // input name -> fnv1a64 hex
    std::vector<EvalPoint> history;
    std::size_t best_step = 0;
    double best_hits3 = -1;
    std::size_t steps_run = 0;
    std::string stop_reason;
    std::string checkpoint;

    void write_json(std::ostream& out) const;
};

std::string digest_hex(const std::string& bytes);
std::string file_digest(const std::string& path);

struct TrainResult {
    Parameters params;
    RunManifest manifest;
};

using ProgressFn = std::function<void(const std::string&)>;

// Plain SGD; validation HITS@3 every eval_every steps and at max_steps; early
// stopping after `patience` evaluations without improvement. Returns the best
// parameters. A non-finite loss stops the run with the best parameters so far.
TrainResult train(const TrainConfig& cfg, const std::vector<TrainSample>& samples,
                  const std::vector<EvalSample>& valid, const SymbolTable& st, const ProgressFn& progress = {});

// One SGD step on a fixed batch (exposed for tests); returns the pre-step loss.
double sgd_step(Parameters& p, const std::vector<Example>& batch, Gradients& g, double lr);

}  // namespace omqa
