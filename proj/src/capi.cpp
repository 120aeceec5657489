#include "smnas.h"

#include <cstring>
#include <string>

#include "smnas/analysis.hpp"
#include "smnas/run_config.hpp"

using namespace smnas;

struct smnas_ctx {
  std::string last_error;
};

namespace {

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// maps exception types onto the exit-code contract
template <typename Fn>
smnas_status guarded(smnas_ctx* ctx, Fn&& fn) {
  if (!ctx) return SMNAS_ERR_INVALID;
  ctx->last_error.clear();
  try {
    return fn();
  } catch (const EngineAbort& e) {
    ctx->last_error = e.what();
    return SMNAS_ERR_RUNTIME;
  } catch (const std::ios_base::failure& e) {
    ctx->last_error = e.what();
    return SMNAS_ERR_IO;
  } catch (const std::exception& e) {
    ctx->last_error = e.what();
    return SMNAS_ERR_INVALID;
  }
}

json parse_json_arg(const char* text, const char* what) {
  if (!text) throw std::invalid_argument(std::string(what) + " is null");
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("invalid JSON for ") + what + ": " + e.what());
  }
}

JournalState load_state(const char* journal_path) {
  if (!journal_path) throw std::invalid_argument("journal path is null");
  try {
    return load_journal(journal_path);
  } catch (const std::runtime_error& e) {
    if (std::string(e.what()).rfind("cannot read", 0) == 0) throw std::ios_base::failure(e.what());
    throw;
  }
}

}  // namespace

smnas_ctx* smnas_ctx_new(void) { return new smnas_ctx(); }

void smnas_ctx_free(smnas_ctx* ctx) { delete ctx; }

const char* smnas_last_error(const smnas_ctx* ctx) {
  return ctx ? ctx->last_error.c_str() : "null context";
}

void smnas_string_free(char* s) { std::free(s); }

smnas_status smnas_encoding_normalize(smnas_ctx* ctx, const char* text, char** out_json) {
  return guarded(ctx, [&]() -> smnas_status {
    if (!text || !out_json) throw std::invalid_argument("null argument");
    const BackboneEncoding enc = parse_backbone_encoding(text);
    json stages = json::array();
    for (const auto& s : enc.stages) {
      std::string codes;
      for (std::uint8_t c : s) codes += static_cast<char>('0' + c);
      stages.push_back(codes);
    }
    const json j{{"encoding", format_backbone_encoding(enc)},
                 {"block", std::string(block_kind_name(enc.block))},
                 {"base", enc.base},
                 {"stages", stages},
                 {"depth", enc.depth()},
                 {"doublings", enc.doublings()}};
    *out_json = dup_string(j.dump());
    return SMNAS_OK;
  });
}

smnas_status smnas_config_validate(smnas_ctx* ctx, const char* config_json,
                                   const char* space_json, char** out_json) {
  return guarded(ctx, [&]() -> smnas_status {
    if (!out_json) throw std::invalid_argument("null output argument");
    const StructuralConfig cfg = structural_from_json(parse_json_arg(config_json, "config"));
    const SpaceDefinition space = space_json
                                      ? SpaceDefinition::from_json(parse_json_arg(space_json, "space"))
                                      : SpaceDefinition::defaults();
    const auto violations = validate_structural(cfg, space);
    json v = json::array();
    for (const Violation& x : violations) v.push_back(json{{"field", x.field}, {"rule", x.rule}});
    const json j{{"valid", violations.empty()}, {"violations", v}, {"config", to_json(cfg)}};
    *out_json = dup_string(j.dump());
    return SMNAS_OK;
  });
}

smnas_status smnas_cost(smnas_ctx* ctx, const char* query_json, char** out_json) {
  return guarded(ctx, [&]() -> smnas_status {
    if (!out_json) throw std::invalid_argument("null output argument");
    const json q = parse_json_arg(query_json, "cost query");
    json result;
    if (q.contains("config")) {
      const StructuralConfig cfg = structural_from_json(q["config"]);
      result = to_json(total_cost(cfg));
    } else if (q.contains("backbone")) {
      const BackboneChoice choice = backbone_from_json(q["backbone"]);
      const Resolution res = resolution_from_json(q.at("resolution"));
      const CostProfile p = q.value("trunk_only", false) ? backbone_trunk_cost(choice, res)
                                                         : backbone_cost(choice, res);
      result = to_json(p);
    } else {
      throw std::invalid_argument("cost query needs 'backbone' or 'config'");
    }
    *out_json = dup_string(result.dump());
    return SMNAS_OK;
  });
}

smnas_status smnas_search(smnas_ctx* ctx, const char* run_config_json, const char* base_dir,
                          int resume, char** out_json) {
  return guarded(ctx, [&]() -> smnas_status {
    if (!out_json) throw std::invalid_argument("null output argument");
    const RunConfig config =
        RunConfig::from_json(parse_json_arg(run_config_json, "run config"),
                             base_dir && *base_dir ? base_dir : ".");
    const StageResult result = run_from_config(config, resume != 0);
    json front = json::array();
    for (const json& row : export_front_json(result.archive))
      if (row["rank"].get<int>() == 0) front.push_back(row);
    const json j{{"journal", config.journal_path()},
                 {"evaluations", result.evaluations},
                 {"pruned", result.pruned},
                 {"rounds", result.rounds},
                 {"front_size", result.archive.front().size()},
                 {"front", front}};
    *out_json = dup_string(j.dump());
    return SMNAS_OK;
  });
}

smnas_status smnas_export_front(smnas_ctx* ctx, const char* journal_path, const char* format,
                                char** out_text) {
  return guarded(ctx, [&]() -> smnas_status {
    if (!out_text || !format) throw std::invalid_argument("null argument");
    const JournalState state = load_state(journal_path);
    if (!state.archive) throw std::invalid_argument("journal holds no archive");
    const std::string fmt = format;
    if (fmt == "csv")
      *out_text = dup_string(export_front_csv(*state.archive));
    else if (fmt == "json")
      *out_text = dup_string(export_front_json(*state.archive).dump());
    else
      throw std::invalid_argument("format must be 'csv' or 'json'");
    return SMNAS_OK;
  });
}

smnas_status smnas_select(smnas_ctx* ctx, const char* journal_path, int k, char** out_json) {
  return guarded(ctx, [&]() -> smnas_status {
    if (!out_json) throw std::invalid_argument("null output argument");
    const JournalState state = load_state(journal_path);
    if (!state.archive || state.archive->front().empty())
      throw std::invalid_argument("journal holds an empty front");
    const auto picked = select_candidates(*state.archive, k);
    json arr = json::array();
    for (const StructuralConfig& cfg : picked) arr.push_back(to_json(cfg));
    *out_json = dup_string(arr.dump());
    return SMNAS_OK;
  });
}

smnas_status smnas_analyze(smnas_ctx* ctx, const char* journal_path, char** out_csv) {
  return guarded(ctx, [&]() -> smnas_status {
    if (!out_csv) throw std::invalid_argument("null output argument");
    const JournalState state = load_state(journal_path);
    std::vector<FactorVector> factors;
    for (const EvalRecord& r : state.records)
      if (r.is_modular() && r.status == RecordStatus::ok) factors.push_back(extract_factors(r));
    if (factors.size() < 3)
      throw std::invalid_argument("journal has fewer than 3 completed modular records");
    *out_csv = dup_string(correlation_csv(correlation_matrix(factors)));
    return SMNAS_OK;
  });
}
