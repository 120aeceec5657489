#pragma once

#include <memory>
#include <string>
#include <vector>

#include "smnas/engine.hpp"

namespace smnas {

// A full search invocation: stage, space, budget, evaluator wiring and
// journal placement. File-backed sub-configs may be given inline or through
// "*_path" keys resolved relative to the config file.
struct RunConfig {
  std::string stage = "one";  // "one" | "two"
  SpaceDefinition space = SpaceDefinition::defaults();
  SearchBudget budget;
  StageOptions options;
  std::optional<StructuralConfig> seed;  // required for stage two

  std::string evaluator_kind = "surrogate";  // "surrogate" | "external"
  SurrogateProfile surrogate = SurrogateProfile::defaults();
  std::vector<std::string> external_command;
  double external_timeout_s = 600.0;
  int workers = 1;

  std::string journal_dir = ".";
  int select_k = 6;

  static RunConfig from_json(const json& j, const std::string& base_dir = ".");
  static RunConfig from_file(const std::string& path);

  std::string journal_path() const;  // SMNAS_JOURNAL_DIR overrides journal_dir
};

// Builds the evaluator pool and runs the configured stage.
StageResult run_from_config(const RunConfig& config, bool resume);

}  // namespace smnas
