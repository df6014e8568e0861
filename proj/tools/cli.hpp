#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgntm/evalkit.hpp"

namespace kgntm::cli {

enum ExitCode { ok = 0, runtime_failure = 1, usage_error = 2, validation_error = 3 };

// Everything a run can be configured with. Read from a JSON file with the
// sections below; command-line flags override file values. The only seed
// is the top-level one.
//
//   {
//     "seed": 1, "threads": 4,
//     "paths": {"corpus": "...", "ontology": "...", "checkpoint": "...", "out": "..."},
//     "train": { TrainConfig fields },
//     "simulate": { "planted": {...}, "docs": 500, "comment_words": 60, ... },
//     "predict": {"threshold": 0.5},
//     "topics": {"top_n": 10},
//     "eval": {"cutoffs": [0.1, 0.15, 0.2, 0.3], "pooled_coherence": true}
//   }
struct RunConfig {
    std::uint64_t seed = 1;
    std::size_t threads = 0; // 0 = all cores
    std::string corpus, ontology, checkpoint, out;
    TrainConfig train;
    ExperimentConfig simulate; // planted world and corpus sizes
    double threshold = 0.5;
    std::size_t top_n = 10;
    std::vector<double> cutoffs = default_cutoffs();
    bool pooled_coherence = true;

    nlohmann::json to_json() const;
    // Unknown keys are rejected.
    static RunConfig from_json(const nlohmann::json& j, RunConfig base);
    // Copies the shared seed and thread count into the nested configs and
    // validates them.
    void resolve();
};

// Runs one subcommand. args excludes the program name. Errors go to `err`
// as one JSON line: {"error": kind, "message": text}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace kgntm::cli
