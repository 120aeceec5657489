#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include <json.hpp>

#include "smnas/arch_space.hpp"
#include "smnas/cost_model.hpp"

namespace smnas {

// Stage-two candidate: a fixed module combination from stage one plus an
// evolvable backbone encoding and FPN channel width.
struct ModularCandidate {
  StructuralConfig seed;
  BackboneEncoding encoding;
  int fpn_channels = 256;

  bool operator==(const ModularCandidate&) const = default;
};

json to_json(const ModularCandidate& cand);
ModularCandidate modular_from_json(const json& j);
std::string candidate_identity(const ModularCandidate& cand);

using CandidatePayload = std::variant<StructuralConfig, ModularCandidate>;

inline bool payload_is_modular(const CandidatePayload& p) {
  return std::holds_alternative<ModularCandidate>(p);
}
std::string payload_identity(const CandidatePayload& p);
json payload_to_json(const CandidatePayload& p);
CandidatePayload payload_from_json(const std::string& kind, const json& j);

// The structural config a payload effectively describes: modular candidates
// are their seed with the evolved backbone and FPN channels substituted.
StructuralConfig effective_config(const CandidatePayload& p);

enum class ObjectiveKind { latency, flops };
std::string_view objective_kind_name(ObjectiveKind k);
std::optional<ObjectiveKind> objective_kind_from_name(std::string_view name);

struct ObjectivePoint {
  ObjectiveKind kind = ObjectiveKind::latency;
  double cost = 0;      // ms (stage one) or backbone GFLOPs (stage two); lower better
  double accuracy = 0;  // mAP percent; higher better
};

enum class RecordStatus { pending, ok, failed, pruned };
std::string_view record_status_name(RecordStatus s);
std::optional<RecordStatus> record_status_from_name(std::string_view name);

enum class AccuracySource { surrogate, external };

struct EvalRecord {
  std::string id;
  std::optional<std::string> parent_id;
  std::string mutation;  // lineage description ("random_init", "toggle_code(...)", ...)
  CandidatePayload payload;
  CostProfile cost;
  ObjectivePoint objective;  // meaningful when status == ok
  AccuracySource source = AccuracySource::surrogate;
  RecordStatus status = RecordStatus::pending;
  std::int64_t created = 0;
  std::int64_t completed = 0;
  std::optional<double> measured_latency_ms;
  std::optional<std::string> message;

  std::string identity() const { return payload_identity(payload); }
  bool is_modular() const { return payload_is_modular(payload); }
};

}  // namespace smnas
