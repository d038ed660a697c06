#pragma once

// Run configuration file (JSON). Example:
//
//   {
//     "model":     {"kind": "char_lm", "layer_widths": [128, 128], "activation": "relu",
//                   "context_length": 16, "embedding_dim": 16},
//     "optimizer": {"variant": "muon2", "eta": 0.02, "beta1": 0.95, "beta2": 0.95,
//                   "epsilon": 1e-8, "ns_steps": 3, "schedule": "keller"},
//     "fallback":  {"eta": 0.003},
//     "steps": 600, "batch_size": 64, "seed": 1, "snapshot_every": 100,
//     "dataset": "tiny_text"
//   }
//
// Unknown keys are rejected; every violation is collected into one
// ConfigError message.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "polarbench/model.hpp"
#include "polarbench/optim.hpp"

namespace polarbench {

struct RunConfig {
    ModelSpec model;
    OptimizerConfig optimizer;
    std::string schedule_spec = "keller";  // name or path, as written in the file
    AdamConfig fallback;
    long steps = 200;
    int batch_size = 64;
    std::uint64_t seed = 0;
    long snapshot_every = 50;
    std::string dataset = "synthetic_gaussian";
    double eps_target = 0.3;
    int eval_size = 2048;

    /// Throws ConfigError listing every violated constraint.
    void validate() const;
};

RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig parse_run_config_text(const std::string& text, const std::string& origin = "");
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

/// Seed from POLARBENCH_SEED, if set and well-formed.
std::optional<std::uint64_t> seed_from_environment();

}  // namespace polarbench
