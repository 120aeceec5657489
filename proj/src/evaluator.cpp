#include "smnas/evaluator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

namespace smnas {

TrainSettings TrainSettings::stage_one_defaults() {
  return TrainSettings{5, 0.04, "cosine", "BN", 2, true};
}

TrainSettings TrainSettings::stage_two_defaults() {
  return TrainSettings{9, 0.24, "cosine", "GN+WS", 8, false};
}

json to_json(const TrainSettings& t) {
  return json{{"epochs", t.epochs},
              {"lr_max", t.lr_max},
              {"lr_schedule", t.lr_schedule},
              {"norm", t.norm},
              {"batch_per_device", t.batch_per_device},
              {"pretrained", t.pretrained}};
}

TrainSettings train_from_json(const json& j) {
  TrainSettings t;
  t.epochs = j.value("epochs", t.epochs);
  t.lr_max = j.value("lr_max", t.lr_max);
  t.lr_schedule = j.value("lr_schedule", t.lr_schedule);
  t.norm = j.value("norm", t.norm);
  t.batch_per_device = j.value("batch_per_device", t.batch_per_device);
  t.pretrained = j.value("pretrained", t.pretrained);
  return t;
}

EvalResponse EvalResponse::failure(std::string id, std::string why) {
  EvalResponse r;
  r.id = std::move(id);
  r.status = RecordStatus::failed;
  r.message = std::move(why);
  return r;
}

// --- wire protocol ---------------------------------------------------------------

std::string encode_request(const EvalRequest& req) {
  const json j{{"id", req.id},
               {"kind", req.kind()},
               {"payload", payload_to_json(req.payload)},
               {"resolution", to_json(req.resolution)},
               {"train", to_json(req.train)},
               {"seed", req.seed}};
  return j.dump();
}

EvalRequest decode_request(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw WireError("$", std::string("invalid JSON: ") + e.what());
  }
  for (const char* key : {"id", "kind", "payload", "resolution", "train", "seed"})
    if (!j.contains(key)) throw WireError(key, "missing request field");
  EvalRequest req;
  req.id = j["id"].get<std::string>();
  req.payload = payload_from_json(j["kind"].get<std::string>(), j["payload"]);
  req.resolution = resolution_from_json(j["resolution"]);
  req.train = train_from_json(j["train"]);
  req.seed = j["seed"].get<std::uint64_t>();
  return req;
}

std::string encode_response(const EvalResponse& resp) {
  json j{{"id", resp.id}, {"status", resp.ok() ? "ok" : "failed"}};
  if (resp.ok()) j["accuracy"] = resp.accuracy;
  if (resp.measured_latency_ms) j["measured_latency_ms"] = *resp.measured_latency_ms;
  if (resp.message) j["message"] = *resp.message;
  return j.dump();
}

EvalResponse decode_response(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw WireError("$", std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw WireError("$", "expected object");
  if (!j.contains("id") || !j["id"].is_string()) throw WireError("id", "missing or not a string");
  if (!j.contains("status") || !j["status"].is_string())
    throw WireError("status", "missing or not a string");
  EvalResponse r;
  r.id = j["id"].get<std::string>();
  const std::string status = j["status"].get<std::string>();
  if (status == "ok")
    r.status = RecordStatus::ok;
  else if (status == "failed")
    r.status = RecordStatus::failed;
  else
    throw WireError("status", "expected 'ok' or 'failed'");
  if (r.ok()) {
    if (!j.contains("accuracy") || !j["accuracy"].is_number())
      throw WireError("accuracy", "missing on ok response");
    r.accuracy = j["accuracy"].get<double>();
    if (!(r.accuracy >= 0.0 && r.accuracy <= 100.0))
      throw WireError("accuracy", "must be in [0, 100]");
  }
  if (j.contains("measured_latency_ms") && j["measured_latency_ms"].is_number())
    r.measured_latency_ms = j["measured_latency_ms"].get<double>();
  if (j.contains("message") && j["message"].is_string())
    r.message = j["message"].get<std::string>();
  return r;
}

// --- surrogate -------------------------------------------------------------------

SurrogateProfile SurrogateProfile::from_json(const json& j) {
  SurrogateProfile p;
  p.a_max = j.value("a_max", p.a_max);
  p.k_cap = j.value("k_cap", p.k_cap);
  p.resolution_gain_per_log2_area =
      j.value("resolution_gain_per_log2_area", p.resolution_gain_per_log2_area);
  if (j.contains("resolution_gain"))
    p.resolution_gain = j["resolution_gain"].get<std::map<std::string, double>>();
  if (j.contains("module_bonus")) {
    const json& b = j["module_bonus"];
    if (b.contains("neck")) {
      p.neck_bonus[0] = b["neck"].value("none", p.neck_bonus[0]);
      p.neck_bonus[1] = b["neck"].value("fpn", p.neck_bonus[1]);
    }
    if (b.contains("rpn")) {
      p.rpn_bonus[0] = b["rpn"].value("none", p.rpn_bonus[0]);
      p.rpn_bonus[1] = b["rpn"].value("rpn", p.rpn_bonus[1]);
      p.rpn_bonus[2] = b["rpn"].value("ga_rpn", p.rpn_bonus[2]);
    }
    if (b.contains("head")) {
      p.head_bonus[0] = b["head"].value("fc2", p.head_bonus[0]);
      p.head_bonus[1] = b["head"].value("retina", p.head_bonus[1]);
      p.head_bonus[2] = b["head"].value("cascade", p.head_bonus[2]);
    }
  }
  p.noise_sigma = j.value("noise_sigma", p.noise_sigma);
  p.seed = j.value("seed", p.seed);
  if (!(p.a_max > 0 && p.a_max <= 100)) throw std::runtime_error("a_max must be in (0, 100]");
  if (p.noise_sigma < 0) throw std::runtime_error("noise_sigma must be >= 0");
  return p;
}

json SurrogateProfile::to_json() const {
  return json{{"a_max", a_max},
              {"k_cap", k_cap},
              {"resolution_gain_per_log2_area", resolution_gain_per_log2_area},
              {"resolution_gain", resolution_gain},
              {"module_bonus",
               json{{"neck", json{{"none", neck_bonus[0]}, {"fpn", neck_bonus[1]}}},
                    {"rpn", json{{"none", rpn_bonus[0]},
                                 {"rpn", rpn_bonus[1]},
                                 {"ga_rpn", rpn_bonus[2]}}},
                    {"head", json{{"fc2", head_bonus[0]},
                                  {"retina", head_bonus[1]},
                                  {"cascade", head_bonus[2]}}}}},
              {"noise_sigma", noise_sigma},
              {"seed", seed}};
}

double backbone_capacity(const BackboneEncoding& enc) {
  const int out_mult = (enc.block == BlockKind::bottleneck || enc.block == BlockKind::xbottleneck)
                           ? 4
                           : 1;
  double capacity = 0;
  int width = enc.base;
  for (const auto& stage : enc.stages) {
    for (std::uint8_t code : stage) {
      if (code == 2) width *= 2;
      capacity += std::log2(static_cast<double>(width) * out_mult);
    }
  }
  return capacity;
}

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// standard-normal draw from a hashed seed; deterministic across platforms
double hashed_normal(std::uint64_t h) {
  // two xorshift-mixed uniforms through Box-Muller
  auto mix = [](std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdull;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ull;
    x ^= x >> 33;
    return x;
  };
  const double u1 = (static_cast<double>(mix(h) >> 11) + 0.5) / 9007199254740992.0;
  const double u2 = (static_cast<double>(mix(h + 1) >> 11) + 0.5) / 9007199254740992.0;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

BackboneEncoding payload_encoding(const CandidatePayload& payload) {
  if (const auto* cand = std::get_if<ModularCandidate>(&payload)) return cand->encoding;
  const auto& cfg = std::get<StructuralConfig>(payload);
  if (const auto* enc = std::get_if<BackboneEncoding>(&cfg.backbone)) return *enc;
  return named_to_encoding(std::get<BackboneId>(cfg.backbone));
}

}  // namespace

EvalResponse synthetic_accuracy(const EvalRequest& req, const SurrogateProfile& profile) {
  const StructuralConfig cfg = effective_config(req.payload);
  const double capacity = backbone_capacity(payload_encoding(req.payload));

  double acc = profile.a_max * (1.0 - std::exp(-profile.k_cap * capacity));

  const std::string res_key =
      std::to_string(req.resolution.width) + "x" + std::to_string(req.resolution.height);
  if (const auto it = profile.resolution_gain.find(res_key); it != profile.resolution_gain.end())
    acc += it->second;
  else
    acc += profile.resolution_gain_per_log2_area *
           std::log2(static_cast<double>(req.resolution.area()) / (512.0 * 512.0));

  acc += profile.neck_bonus[static_cast<int>(cfg.neck.kind)];
  acc += profile.rpn_bonus[static_cast<int>(cfg.rpn)];
  acc += profile.head_bonus[static_cast<int>(cfg.head.kind)];

  if (profile.noise_sigma > 0) {
    const std::uint64_t h =
        fnv1a(payload_identity(req.payload), fnv1a(std::to_string(profile.seed + req.seed)));
    acc += profile.noise_sigma * hashed_normal(h);
  }

  EvalResponse resp;
  resp.id = req.id;
  resp.status = RecordStatus::ok;
  resp.accuracy = std::clamp(acc, 0.0, 100.0);
  return resp;
}

// --- external evaluator ------------------------------------------------------------

ExternalEvaluator::ExternalEvaluator(std::vector<std::string> command, double timeout_s)
    : command_(std::move(command)), timeout_s_(timeout_s) {
  if (command_.empty()) throw std::runtime_error("external evaluator command is empty");
  spawn();
}

ExternalEvaluator::~ExternalEvaluator() { shutdown(); }

bool ExternalEvaluator::alive() const { return pid_ > 0; }

void ExternalEvaluator::spawn() {
  int in_pipe[2], out_pipe[2];
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0)
    throw std::runtime_error("failed to create evaluator pipes");
  const pid_t pid = fork();
  if (pid < 0) throw std::runtime_error("failed to fork evaluator process");
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    std::vector<char*> argv;
    argv.reserve(command_.size() + 1);
    for (std::string& a : command_) argv.push_back(a.data());
    argv.push_back(nullptr);
    execvp(argv[0], argv.data());
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  signal(SIGPIPE, SIG_IGN);
}

void ExternalEvaluator::shutdown() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    kill(pid_, SIGKILL);
    int status = 0;
    waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

std::string ExternalEvaluator::read_line(double deadline_s, bool& timed_out, bool& closed) {
  timed_out = closed = false;
  const auto start = std::chrono::steady_clock::now();
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double remaining = deadline_s - elapsed;
    if (remaining <= 0) {
      timed_out = true;
      return {};
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int rv = poll(&pfd, 1, static_cast<int>(std::min(remaining * 1000.0, 1000.0)));
    if (rv < 0) {
      closed = true;
      return {};
    }
    if (rv == 0) continue;
    char chunk[4096];
    const ssize_t n = read(from_child_, chunk, sizeof chunk);
    if (n <= 0) {
      closed = true;
      return {};
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

EvalResponse ExternalEvaluator::evaluate(const EvalRequest& req) {
  if (!alive()) return EvalResponse::failure(req.id, "evaluator process not running");
  const std::string line = encode_request(req) + "\n";
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = write(to_child_, line.data() + written, line.size() - written);
    if (n <= 0) {
      shutdown();
      return EvalResponse::failure(req.id, "evaluator process closed its input");
    }
    written += static_cast<std::size_t>(n);
  }
  bool timed_out = false, closed = false;
  const std::string reply = read_line(timeout_s_, timed_out, closed);
  if (timed_out) {
    shutdown();
    return EvalResponse::failure(req.id, "evaluation timed out after " +
                                             std::to_string(timeout_s_) + " s");
  }
  if (closed) {
    shutdown();
    return EvalResponse::failure(req.id, "evaluator process exited");
  }
  try {
    EvalResponse resp = decode_response(reply);
    if (resp.id != req.id)
      return EvalResponse::failure(req.id, "response id mismatch: got '" + resp.id + "'");
    return resp;
  } catch (const WireError& e) {
    return EvalResponse::failure(req.id, std::string("malformed response: ") + e.what());
  }
}

}  // namespace smnas
