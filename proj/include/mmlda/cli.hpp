#pragma once

// Batch front-end: generate | train | evaluate | predict | tune | export.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmlda/composition.hpp"
#include "mmlda/evaluation.hpp"
#include "mmlda/models.hpp"
#include "mmlda/tuning.hpp"

namespace mmlda {

/// Experiment settings read from a JSON config file; command-line flags override.
struct RunConfig {
  Architecture architecture = Architecture::ECM;
  std::filesystem::path dataset;
  TrainingSchedule schedule;
  TrainingSchedule inference;
  WeightConfig weights;
  std::uint64_t seed = 1;
  std::filesystem::path output;
  int threads = 1;
  /// Used only when the dataset file carries no train/test split.
  double train_fraction = 0.8;
  int extrapolation_replicates = 10;
  SearchBudget budget;
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);
nlohmann::json to_json(const WeightConfig& w);
WeightConfig weights_from_json(const nlohmann::json& j, WeightConfig base = {});

/// Runs one command. Returns the process exit code; on failure a JSON error
/// record is written to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mmlda
