#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "smnas/record.hpp"

namespace smnas {

struct TrainSettings {
  int epochs = 5;
  double lr_max = 0.04;
  std::string lr_schedule = "cosine";
  std::string norm = "BN";  // BN | GN | GN+WS
  int batch_per_device = 2;
  bool pretrained = true;

  static TrainSettings stage_one_defaults();
  static TrainSettings stage_two_defaults();
};

json to_json(const TrainSettings& t);
TrainSettings train_from_json(const json& j);

struct EvalRequest {
  std::string id;
  CandidatePayload payload;
  Resolution resolution;
  TrainSettings train;
  std::uint64_t seed = 0;

  std::string kind() const { return payload_is_modular(payload) ? "modular" : "structural"; }
};

struct EvalResponse {
  std::string id;
  RecordStatus status = RecordStatus::failed;  // ok or failed
  double accuracy = 0;
  std::optional<double> measured_latency_ms;
  std::optional<std::string> message;

  bool ok() const { return status == RecordStatus::ok; }
  static EvalResponse failure(std::string id, std::string why);
};

// ---------------------------------------------------------------------------
// Wire protocol: newline-delimited JSON over the evaluator process's stdio.
// One object per line, UTF-8, no pretty-printing. Unknown extra fields are
// ignored for forward compatibility.
//   request keys:  id, kind, payload, resolution, train, seed
//   response keys: id, status, accuracy, measured_latency_ms, message
// ---------------------------------------------------------------------------

struct WireError : std::runtime_error {
  WireError(std::string path, const std::string& what)
      : std::runtime_error(what + " (field " + path + ")"), field_path(std::move(path)) {}
  std::string field_path;
};

std::string encode_request(const EvalRequest& req);
EvalRequest decode_request(const std::string& line);
std::string encode_response(const EvalResponse& resp);
EvalResponse decode_response(const std::string& line);

// ---------------------------------------------------------------------------
// Deterministic synthetic surrogate. Accuracy is a saturating function of
// backbone capacity (sum over blocks of log2 output width) plus a resolution
// gain, per-module bonuses and optional seeded noise, clamped to [0, 100].
// With noise_sigma = 0 it is monotone under the backbone partial order and
// under componentwise resolution increase, which is what the pruning
// soundness tests rely on.
// ---------------------------------------------------------------------------

struct SurrogateProfile {
  double a_max = 40.0;
  double k_cap = 0.025;
  double resolution_gain_per_log2_area = 1.5;      // vs the 512x512 reference
  std::map<std::string, double> resolution_gain;   // optional "WxH" overrides
  double neck_bonus[2] = {0.0, 1.0};               // none, fpn
  double rpn_bonus[3] = {0.0, 0.5, 0.8};           // none, rpn, ga_rpn
  double head_bonus[3] = {0.5, 0.3, 1.2};          // fc2, retina, cascade
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  static SurrogateProfile defaults() { return SurrogateProfile{}; }
  static SurrogateProfile from_json(const json& j);
  json to_json() const;
};

// Capacity term: sum of log2(output width) over every encoded block.
double backbone_capacity(const BackboneEncoding& enc);

EvalResponse synthetic_accuracy(const EvalRequest& req, const SurrogateProfile& profile);

// ---------------------------------------------------------------------------
// Evaluator handles. The surrogate is pure and shareable; an external handle
// owns one child process and allows a single request in flight.
// ---------------------------------------------------------------------------

class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual EvalResponse evaluate(const EvalRequest& req) = 0;
  virtual AccuracySource source() const = 0;
};

class SurrogateEvaluator final : public Evaluator {
 public:
  explicit SurrogateEvaluator(SurrogateProfile profile = SurrogateProfile::defaults())
      : profile_(std::move(profile)) {}
  EvalResponse evaluate(const EvalRequest& req) override {
    return synthetic_accuracy(req, profile_);
  }
  AccuracySource source() const override { return AccuracySource::surrogate; }
  const SurrogateProfile& profile() const { return profile_; }

 private:
  SurrogateProfile profile_;
};

class ExternalEvaluator final : public Evaluator {
 public:
  ExternalEvaluator(std::vector<std::string> command, double timeout_s = 600.0);
  ~ExternalEvaluator() override;
  ExternalEvaluator(const ExternalEvaluator&) = delete;
  ExternalEvaluator& operator=(const ExternalEvaluator&) = delete;

  EvalResponse evaluate(const EvalRequest& req) override;
  AccuracySource source() const override { return AccuracySource::external; }
  bool alive() const;

 private:
  void spawn();
  void shutdown();
  std::string read_line(double deadline_s, bool& timed_out, bool& closed);

  std::vector<std::string> command_;
  double timeout_s_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

}  // namespace smnas
