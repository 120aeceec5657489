#include "smnas/run_config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace smnas {

namespace {

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot read file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in " + path + ": " + e.what());
  }
  return j;
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base_dir) / p).string();
}

// accepts either an inline object under `key` or a file under `key_path`
json sub_config(const json& j, const std::string& key, const std::string& base_dir) {
  if (j.contains(key + "_path"))
    return load_json_file(resolve(base_dir, j[key + "_path"].get<std::string>()));
  if (j.contains(key)) return j[key];
  return json();
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  RunConfig c;
  c.stage = j.value("stage", c.stage);
  if (c.stage != "one" && c.stage != "two")
    throw ConfigError("stage must be 'one' or 'two'");

  if (const json s = sub_config(j, "space", base_dir); !s.is_null())
    c.space = SpaceDefinition::from_json(s);
  if (j.contains("budget")) c.budget = budget_from_json(j["budget"]);
  if (j.contains("rng_seed_override"))
    c.budget.rng_seed = j["rng_seed_override"].get<std::uint64_t>();

  if (const json seed = sub_config(j, "seed", base_dir); !seed.is_null())
    c.seed = structural_from_json(seed);
  if (c.stage == "two" && !c.seed) throw ConfigError("stage two requires a seed config");

  if (j.contains("evaluator")) {
    const json& e = j["evaluator"];
    c.evaluator_kind = e.value("kind", c.evaluator_kind);
    if (c.evaluator_kind == "surrogate") {
      if (const json p = sub_config(e, "profile", base_dir); !p.is_null())
        c.surrogate = SurrogateProfile::from_json(p);
    } else if (c.evaluator_kind == "external") {
      if (!e.contains("command") || !e["command"].is_array() || e["command"].empty())
        throw ConfigError("external evaluator needs a non-empty command array");
      for (const auto& a : e["command"]) c.external_command.push_back(a.get<std::string>());
      c.external_timeout_s = e.value("timeout_s", c.external_timeout_s);
    } else {
      throw ConfigError("evaluator.kind must be 'surrogate' or 'external'");
    }
  }

  if (const json l = sub_config(j, "latency_model", base_dir); !l.is_null())
    c.options.latency = LatencyModel::from_json(l);

  c.workers = j.value("workers", c.workers);
  if (c.workers < 1) throw ConfigError("workers must be >= 1");
  c.options.deterministic = j.value("deterministic", c.workers == 1);
  c.options.pruning = j.value("pruning", c.options.pruning);
  c.options.stall_rounds = j.value("stall_rounds", c.options.stall_rounds);
  c.options.epsilon = j.value("epsilon", c.options.epsilon);
  c.options.consecutive_failure_abort =
      j.value("consecutive_failure_abort", c.options.consecutive_failure_abort);
  if (j.contains("train")) c.options.train = train_from_json(j["train"]);
  c.journal_dir = j.value("journal_dir", c.journal_dir);
  if (!std::filesystem::path(c.journal_dir).is_absolute())
    c.journal_dir = resolve(base_dir, c.journal_dir);
  c.select_k = j.value("select_k", c.select_k);
  if (c.options.deterministic && c.workers != 1)
    throw ConfigError("deterministic mode requires workers = 1");
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  const json j = load_json_file(path);
  return from_json(j, std::filesystem::path(path).parent_path().string());
}

std::string RunConfig::journal_path() const {
  std::string dir = journal_dir;
  if (const char* env = std::getenv("SMNAS_JOURNAL_DIR"); env && *env) dir = env;
  return (std::filesystem::path(dir) / "journal.jsonl").string();
}

StageResult run_from_config(const RunConfig& config, bool resume) {
  std::vector<std::unique_ptr<Evaluator>> owned;
  std::vector<Evaluator*> pool;
  if (config.evaluator_kind == "surrogate") {
    owned.push_back(std::make_unique<SurrogateEvaluator>(config.surrogate));
    for (int i = 0; i < config.workers; ++i) pool.push_back(owned[0].get());
  } else {
    for (int i = 0; i < config.workers; ++i) {
      owned.push_back(
          std::make_unique<ExternalEvaluator>(config.external_command, config.external_timeout_s));
      pool.push_back(owned.back().get());
    }
  }

  StageOptions options = config.options;
  options.journal_path = config.journal_path();
  options.resume = resume;

  if (config.stage == "one") return run_stage_one(config.space, pool, config.budget, options);
  return run_stage_two(*config.seed, config.space, pool, config.budget, options);
}

}  // namespace smnas
