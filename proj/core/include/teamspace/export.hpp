#pragma once

// Tidy CSV tables derived from a replayed event log.

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "teamspace/config.hpp"
#include "teamspace/state.hpp"

namespace teamspace {

/// participants, teams, messages, rankings, allocations, exercise, surveys.
const std::vector<std::string>& export_table_names();

/// Renders one table. Throws std::invalid_argument naming the valid tables
/// when `name` is unknown.
std::string export_table(std::string_view name, const SystemState& state,
                         const ExperimentConfig& config);

/// Writes `<name>.csv` for each requested table (all when empty) into `dir`.
/// Returns the paths written.
std::vector<std::filesystem::path> export_tables(const SystemState& state,
                                                 const ExperimentConfig& config,
                                                 const std::filesystem::path& dir,
                                                 std::span<const std::string> names = {});

}  // namespace teamspace
