#pragma once

// Offline measures over a replayed log. Only teams that reached Complete are
// analyzed; everything else is listed as excluded.

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "teamspace/config.hpp"
#include "teamspace/liwc.hpp"
#include "teamspace/state.hpp"

namespace teamspace::analysis {

struct Descriptive {
  std::size_t n = 0;
  std::optional<double> mean;
  std::optional<double> sd;  // sample (n-1); absent below two values
};

Descriptive describe(std::span<const double> values);

struct TeamMeasures {
  TeamId team_id;
  Condition condition = Condition::control;
  std::size_t members = 0;
  std::size_t analyzed_members = 0;
  std::optional<double> baseline_disagreement;
  std::optional<double> climate;
  std::optional<double> compromise;
  bool ranking_submitted = false;
  bool ranking_agreed = false;
};

struct ParticipantMeasures {
  TeamId team_id;
  ParticipantId participant_id;
  Condition condition = Condition::control;
  std::map<std::string, std::optional<double>> scales;
  std::map<std::string, std::optional<bool>> binary;
  std::optional<int> self_report;
  std::optional<AccuracyResult> accuracy;
  /// RMS proportion divergence of this member's private allocation from the team's.
  std::optional<double> allocation_divergence;
};

struct ExcludedTeam {
  TeamId team_id;
  Condition condition = Condition::control;
  std::string final_phase;
  std::string reason;
};

struct AnalysisReport {
  std::vector<TeamMeasures> teams;
  std::vector<ParticipantMeasures> participants;
  std::vector<ExcludedTeam> excluded;
  /// measure -> condition -> descriptive
  std::map<std::string, std::map<std::string, Descriptive>> descriptives;
};

/// Throws ValidationError("no analyzable teams") when no team completed.
AnalysisReport analyze(const SystemState& state, const ExperimentConfig& config);

/// Recomputes every logged feedback from the logged reports and guesses.
/// Throws ConsistencyError naming the first team that disagrees.
void check_feedback_consistency(const SystemState& state);

struct LiwcRow {
  TeamId team_id;
  Condition condition = Condition::control;
  std::string phase;  // "discuss", "decide", or "all"
  LiwcProfile profile;
};

/// Member messages of analyzable teams, per team and phase (or pooled over
/// both chat phases). Control-interlude messages are never included. Phases
/// without messages have no row.
std::vector<LiwcRow> liwc_rows(const SystemState& state, const LiwcDictionary& dict,
                               bool by_phase);

struct ShiftRow {
  TeamId team_id;
  Condition condition = Condition::control;
  std::string category;
  std::optional<double> discuss;
  std::optional<double> decide;
  std::optional<double> shift_percent;
  std::string status;  // "ok", "new" (0 -> positive) or "n/a" (a phase has no messages)
};

std::vector<ShiftRow> liwc_shifts(std::span<const LiwcRow> by_phase_rows,
                                  const LiwcDictionary& dict);

struct ConditionShift {
  std::string condition;
  std::string category;
  Descriptive team_shifts;  // over teams with status "ok"
  std::optional<double> pooled_discuss;
  std::optional<double> pooled_decide;
  std::optional<double> pooled_shift_percent;
};

std::vector<ConditionShift> liwc_condition_shifts(std::span<const ShiftRow> rows);

struct Options {
  std::string subcommand;  // disagreement|climate|compromise|scales|accuracy|liwc|all
  std::filesystem::path log;
  std::optional<std::filesystem::path> dict;
  std::filesystem::path out;
  std::optional<std::filesystem::path> config;
  bool by_phase = false;
  bool shift = false;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitConsistency = 3;

/// config.json beside the log, else the defaults.
ExperimentConfig discover_config(const std::filesystem::path& log,
                                 const std::optional<std::filesystem::path>& explicit_path);

/// Runs one subcommand end to end and writes its CSV files into `out`.
/// Returns one of the exit codes above; diagnostics go to `err`.
int run(const Options& options, std::ostream& err);

/// Same as run() but on an already replayed state.
int run_on_state(const Options& options, const SystemState& state,
                 const ExperimentConfig& config, std::ostream& err);

}  // namespace teamspace::analysis
