#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "omqa/eval.hpp"
#include "omqa/lubm.hpp"
#include "omqa/trainer.hpp"

namespace omqa {

struct DemoOptions {
    LubmOptions lubm;
    double split_ratio = 0.1;
    std::size_t train_per_shape = 1000;  // plain and onto training queries per shape
    std::size_t certain_per_shape = 200;  // gen / spec samples (written, not trained on)
    std::size_t valid_per_shape = 20;     // per case A and C
    std::size_t test_per_shape = 50;      // per case and shape
    std::optional<std::size_t> max_steps;  // overrides the desk preset
    std::vector<std::pair<std::string, std::string>> overrides;  // trainer config keys, applied last
    bool rewriting_baseline = true;
};

struct DemoResult {
    MetricsTable plain, onto, rewriting;
    RunManifest plain_run, onto_run;
    std::string comparison;  // contents of comparison.txt
};

// Generate → split → closure → sample (all strategies) → train Q2B_plain and
// O2B_onto with the desk preset → build test cases A/B/C → evaluate. Every
// artefact goes to out_dir (created if missing); an empty out_dir keeps
// everything in memory.
DemoResult run_demo(const std::string& out_dir, std::uint64_t seed, const DemoOptions& opt = {},
                    const ProgressFn& progress = {});

}  // namespace omqa
