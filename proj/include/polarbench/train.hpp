#pragma once

// Seeded, single-threaded training loop and its JSON-lines run log.
//
// Hidden weight matrices take the configured Muon-family rule; the output
// head, biases and the embedding table take the coordinate-wise fallback.
// Every snapshot_every steps, the spectrum of each hidden layer's NS input
// is recorded.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "polarbench/config.hpp"
#include "polarbench/diagnostics.hpp"
#include "polarbench/optim.hpp"

namespace polarbench {

struct StepRecord {
    long step = 0;
    double loss = 0;
    double grad_norm = 0;
    std::vector<int> ns_steps;  // per matrix layer
};

struct SnapshotRecord {
    long step = 0;
    int layer = 0;
    std::optional<SpectrumReport> report;  // empty: zero momentum, snapshot skipped
};

struct RunLog {
    RunConfig config;
    ZoneBoundaries zones;
    std::vector<StepRecord> steps;
    std::vector<SnapshotRecord> snapshots;
    Index parameter_count = 0;
    double final_loss = 0;  // held-out loss after the last step
    bool diverged = false;
    long diverged_step = 0;
    std::string failure;

    /// Mean dead-zone fraction over all recorded (non-skipped) snapshots.
    double mean_dead_fraction() const;
    double mean_effective_rank() const;
    /// One JSON object per line: header, step/snapshot records, summary.
    std::string to_jsonl() const;
};

/// Spectrum of the NS input for one layer's optimizer state. Returns an
/// empty optional when the momentum is still zero.
std::optional<SpectrumReport> snapshot_spectrum(const OptimizerState& state,
                                                const OptimizerConfig& cfg,
                                                const ZoneBoundaries& bounds);

/// Runs the configured training. A non-finite loss stops the run and
/// returns the partial log with `diverged` set; other errors propagate.
RunLog train(const RunConfig& config);

/// Parses a RunLog written by to_jsonl (header + summary are required).
struct RunSummary {
    std::string variant;
    int ns_steps = 0;
    double eta = 0;
    std::uint64_t seed = 0;
    double final_loss = 0;
    bool diverged = false;
    double mean_dead_fraction = 0;
};
RunSummary summarize_jsonl(const std::string& text, const std::string& origin = "");

}  // namespace polarbench
