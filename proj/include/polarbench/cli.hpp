#pragma once

// polarbench command-line front end.
//
//   polar-map   CSV of φ¹..φᵏ over a [0, 1] grid
//   zones       dead / convergent zone boundaries
//   grid-study  orthogonality error and cosine on a uniform spectrum
//   train       one run -> JSON-lines RunLog
//   sweep       learning-rate x variant grid -> RunLogs + summary.json
//   report      markdown table of best final loss per (variant, k)
//
// Exit codes: 0 success, 2 config/usage error, 3 numeric or analysis error,
// 4 diverged run.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "polarbench/config.hpp"
#include "polarbench/train.hpp"

namespace polarbench {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitDiverged = 4;

/// Polar-map table: sigma on an inclusive linspace of [0, 1], then φ¹..φᵏ.
std::string polar_map_csv(const CoefficientSchedule& schedule, int k, int grid);

/// Per-schedule metrics on the midpoint grid treated as a spectrum.
nlohmann::json grid_study(const std::vector<CoefficientSchedule>& schedules, int k, int grid);

struct SweepEntry {
    Variant variant = Variant::muon;
    int ns_steps = 5;
};

struct SweepRun {
    std::filesystem::path file;
    RunSummary summary;
};

/// "muon:5,muon2:3" -> entries.
std::vector<SweepEntry> parse_sweep_entries(const std::string& spec);
std::vector<double> parse_number_list(const std::string& spec);

/// One training run per (entry, eta); each RunLog is written by exactly one
/// worker. Results come back in grid order regardless of `jobs`.
std::vector<SweepRun> run_sweep(const RunConfig& base, const std::vector<SweepEntry>& entries,
                                const std::vector<double>& etas,
                                const std::filesystem::path& out_dir, int jobs = 1);
/// All runs plus the best non-diverged run per (variant, k, seed).
nlohmann::json sweep_summary(const std::vector<SweepRun>& runs);

/// Markdown table, rows sorted by variant then k.
std::string render_report(const std::vector<RunSummary>& runs);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace polarbench
