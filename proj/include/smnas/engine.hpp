#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "smnas/evaluator.hpp"
#include "smnas/evolution.hpp"
#include "smnas/journal.hpp"
#include "smnas/pareto.hpp"

namespace smnas {

// Search coordination: round-synchronous candidate generation with
// concurrent evaluation. A single coordinator context owns the archive, the
// journal and the rng; evaluations run on a pool of handles and their
// results are applied serially in arrival order. Candidate generation is a
// pure function of (rng state, front at the round boundary), which is what
// makes crash/resume reproduce uninterrupted runs exactly.

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ResumeMismatch : ConfigError {
  using ConfigError::ConfigError;
};

struct EngineAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StageOptions {
  bool deterministic = true;  // sequential, logical clock; requires pool size 1
  bool pruning = true;        // partial-order pruning, consulted in stage two
  int consecutive_failure_abort = 10;
  int stall_rounds = 8;  // stop after this many rounds without a novel candidate
  double epsilon = 0.0;  // archive dominance slack
  LatencyModel latency = LatencyModel::defaults();
  std::optional<TrainSettings> train;  // defaults to the stage's recipe
  std::string journal_path;            // empty: in-memory journal
  bool resume = false;
  int fail_after_appends = -1;  // journal failpoint for crash tests
};

struct StageResult {
  ParetoArchive archive;
  int evaluations = 0;  // evaluator calls spent (ok + failed)
  int pruned = 0;
  int rounds = 0;
  std::string journal_text;
};

StageResult run_stage_one(const SpaceDefinition& space, const std::vector<Evaluator*>& pool,
                          const SearchBudget& budget, const StageOptions& options = {});

// seed: a stage-one front member; its backbone fixes the block family. Named
// backbones are transcribed into their encoding analog.
StageResult run_stage_two(const StructuralConfig& seed, const SpaceDefinition& space,
                          const std::vector<Evaluator*>& pool, const SearchBudget& budget,
                          const StageOptions& options = {});

// Journal reconstruction shared by resume, export, select and analyze.
struct JournalState {
  std::optional<ParetoArchive> archive;
  std::vector<EvalRecord> records;  // completed + pending, journal order
  int evaluations = 0;
  int pruned = 0;
  bool finished = false;
  bool torn_tail = false;
  json config;
  std::string config_hash;
};

JournalState load_journal(const std::string& path);
JournalState load_journal_text(const std::string& text);

}  // namespace smnas
