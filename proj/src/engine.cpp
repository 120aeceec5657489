#include "smnas/engine.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace smnas {

namespace {

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string rng_to_string(const Rng& rng) {
  std::ostringstream ss;
  ss << rng;
  return ss.str();
}

void rng_from_string(Rng& rng, const std::string& s) {
  std::istringstream ss(s);
  ss >> rng;
  if (!ss) throw std::runtime_error("invalid rng state in journal");
}

json cost_to_raw_json(const CostProfile& c) {
  json j{{"flops", c.flops}, {"params", c.params}, {"mac", c.mac}};
  if (c.latency_ms) j["latency_est"] = *c.latency_ms;
  return j;
}

CostProfile cost_from_raw_json(const json& j) {
  CostProfile c;
  c.flops = j.value("flops", 0.0);
  c.params = j.value("params", 0.0);
  c.mac = j.value("mac", 0.0);
  if (j.contains("latency_est")) c.latency_ms = j["latency_est"].get<double>();
  return c;
}

enum class Stage { one, two };

struct Proposal {
  CandidatePayload payload;
  std::string parent_identity;  // empty: no parent
  std::string mutation;
};

// A candidate admitted into a round: journaled, costed, awaiting evaluation.
struct Admitted {
  EvalRecord record;
  EvalRequest request;
};

class SearchEngine {
 public:
  SearchEngine(Stage stage, SpaceDefinition space, std::optional<StructuralConfig> seed,
               std::vector<Evaluator*> pool, SearchBudget budget, StageOptions options)
      : stage_(stage),
        space_(std::move(space)),
        seed_(std::move(seed)),
        pool_(std::move(pool)),
        budget_(budget),
        options_(std::move(options)),
        kind_(stage == Stage::one ? ObjectiveKind::latency : ObjectiveKind::flops),
        archive_(kind_, options_.epsilon),
        journal_(make_journal_options()),
        rng_(budget.rng_seed) {
    if (pool_.empty()) throw ConfigError("evaluator pool is empty");
    if (options_.deterministic && pool_.size() != 1)
      throw ConfigError("deterministic mode requires a pool of size 1");
    if (stage_ == Stage::two) prepare_seed_candidate();
    train_ = options_.train.value_or(stage_ == Stage::one ? TrainSettings::stage_one_defaults()
                                                          : TrainSettings::stage_two_defaults());
  }

  StageResult run() {
    if (options_.resume)
      restore();
    else
      start_fresh();

    if (finished_) return result();

    // Re-dispatch pending work from fully generated rounds exactly once;
    // records from a partially generated round stay pending and are picked
    // up when that round is regenerated.
    if (!pending_.empty()) {
      std::vector<Admitted> batch;
      std::vector<EvalRecord> keep;
      for (EvalRecord& r : pending_) {
        if (r_round_.at(r.id) <= last_marker_round_)
          batch.push_back(make_admitted(std::move(r)));
        else
          keep.push_back(std::move(r));
      }
      pending_ = std::move(keep);
      evaluate_batch(batch);
    }

    int stall = 0;
    while (evals_used_ < budget_.max_evaluations && stall <= options_.stall_rounds) {
      const std::vector<Proposal> proposals = generate_round(round_);
      std::vector<Admitted> batch = admit(proposals);
      journal_marker();
      const bool progressed = !batch.empty();
      evaluate_batch(batch);
      stall = progressed ? 0 : stall + 1;
      ++round_;
    }
    journal_.append(json{{"entry_type", "stage_marker"},
                         {"label", "final"},
                         {"evals_used", evals_used_},
                         {"rounds", round_}});
    return result();
  }

 private:
  Journal::Options make_journal_options() const {
    Journal::Options o;
    o.path = options_.journal_path;
    o.deterministic_clock = options_.deterministic;
    o.fail_after_appends = options_.fail_after_appends;
    return o;
  }

  json engine_config_json() const {
    json j{{"stage", stage_ == Stage::one ? "one" : "two"},
           {"space", space_.to_json()},
           {"budget", to_json(budget_)},
           {"objective", std::string(objective_kind_name(kind_))},
           {"pruning", stage_ == Stage::two && options_.pruning}};
    if (seed_) j["seed"] = to_json(*seed_);
    return j;
  }

  void prepare_seed_candidate() {
    const StructuralConfig& seed = *seed_;
    BackboneEncoding enc;
    if (const auto* custom = std::get_if<BackboneEncoding>(&seed.backbone))
      enc = *custom;
    else
      enc = named_to_encoding(std::get<BackboneId>(seed.backbone));
    if (!encoding_within_caps(enc, space_.max_depth, space_.max_doublings))
      throw ConfigError("seed backbone encoding violates the space's depth/doubling caps");
    family_ = enc.block;
    int channels = space_.modular_fpn_channels.empty() ? 256 : space_.modular_fpn_channels[0];
    if (seed.neck.kind == NeckKind::fpn &&
        std::count(space_.modular_fpn_channels.begin(), space_.modular_fpn_channels.end(),
                   seed.neck.channels))
      channels = seed.neck.channels;
    seed_candidate_ = ModularCandidate{seed, enc, channels};
  }

  void start_fresh() {
    if (!options_.journal_path.empty() && std::filesystem::exists(options_.journal_path) &&
        std::filesystem::file_size(options_.journal_path) > 0)
      throw ConfigError("journal file already exists; rerun with resume to continue it");
    const json cfg = engine_config_json();
    journal_.append(json{{"entry_type", "config_snapshot"},
                         {"config_hash", fnv1a_hex(cfg.dump())},
                         {"config", cfg}});
    journal_marker();  // round -1: pristine rng
  }

  void restore() {
    if (options_.journal_path.empty())
      throw ConfigError("resume requires a journal path");
    const auto replay = Journal::replay_file(options_.journal_path);
    if (replay.torn_tail)
      std::fprintf(stderr, "warning: journal tail was torn; truncated on replay\n");

    bool have_config = false;
    std::map<std::string, json> merged;
    std::vector<std::string> id_order;
    std::optional<std::string> rng_state;

    for (const json& e : replay.entries) {
      const std::string type = e.at("entry_type").get<std::string>();
      if (type == "config_snapshot") {
        const json cfg = engine_config_json();
        const std::string want = fnv1a_hex(cfg.dump());
        const std::string got = e.at("config_hash").get<std::string>();
        if (got != want) {
          std::string diff;
          for (const char* key : {"stage", "space", "budget", "objective", "pruning", "seed"}) {
            const json a = e["config"].contains(key) ? e["config"][key] : json();
            const json b = cfg.contains(key) ? cfg[key] : json();
            if (a != b) diff += std::string(diff.empty() ? "" : ", ") + key;
          }
          throw ResumeMismatch("journal was produced by a different configuration (differs in: " +
                               (diff.empty() ? std::string("unknown") : diff) + ")");
        }
        have_config = true;
      } else if (type == "record") {
        const std::string id = e.at("id").get<std::string>();
        auto [it, fresh] = merged.try_emplace(id, json::object());
        if (fresh) id_order.push_back(id);
        for (auto& [k, v] : e.items()) it->second[k] = v;
      } else if (type == "stage_marker") {
        if (e.value("label", std::string()) == "final") finished_ = true;
        if (e.contains("rng_state")) rng_state = e["rng_state"].get<std::string>();
        if (e.contains("round")) last_marker_round_ = e["round"].get<int>();
      }
    }
    if (!have_config) throw ResumeMismatch("journal has no config snapshot");
    if (rng_state) rng_from_string(rng_, *rng_state);
    round_ = last_marker_round_ + 1;

    for (const std::string& id : id_order) {
      const json& j = merged[id];
      EvalRecord r = record_from_merged(j);
      const int rec_round = j.value("round", -1);
      const std::string identity = r.identity();
      seen_.insert(identity);
      id_by_identity_[identity] = r.id;
      r_round_[r.id] = rec_round;
      if (r.id.size() > 1) {
        const int n = std::atoi(r.id.c_str() + 1);
        next_id_ = std::max(next_id_, n + 1);
      }
      switch (r.status) {
        case RecordStatus::ok:
          ++evals_used_;
          apply_ok_to_state(r);
          break;
        case RecordStatus::failed:
          ++evals_used_;
          break;
        case RecordStatus::pruned:
          ++pruned_;
          break;
        case RecordStatus::pending:
          pending_.push_back(std::move(r));
          break;
      }
    }
  }

  EvalRecord record_from_merged(const json& j) const {
    EvalRecord r;
    r.id = j.at("id").get<std::string>();
    if (j.contains("parent_id") && j["parent_id"].is_string())
      r.parent_id = j["parent_id"].get<std::string>();
    r.mutation = j.value("mutation", std::string());
    r.payload = payload_from_json(j.at("kind").get<std::string>(), j.at("payload"));
    r.cost = cost_from_raw_json(j.at("cost"));
    r.objective.kind = kind_;
    r.objective.cost = j.value("objective_cost", 0.0);
    r.objective.accuracy = j.value("accuracy", 0.0);
    if (j.contains("measured_latency_ms") && j["measured_latency_ms"].is_number())
      r.measured_latency_ms = j["measured_latency_ms"].get<double>();
    if (j.contains("accuracy_source"))
      r.source = j["accuracy_source"] == "external" ? AccuracySource::external
                                                    : AccuracySource::surrogate;
    if (j.contains("message") && j["message"].is_string())
      r.message = j["message"].get<std::string>();
    r.created = j.value("created", std::int64_t{0});
    r.completed = j.value("completed", std::int64_t{0});
    const auto status = record_status_from_name(j.value("status", "pending"));
    r.status = status.value_or(RecordStatus::pending);
    return r;
  }

  void apply_ok_to_state(const EvalRecord& r) {
    if (r.is_modular())
      evaluated_enc_.emplace_back(std::get<ModularCandidate>(r.payload).encoding,
                                  r.objective.accuracy);
    archive_.insert(r);
  }

  // front members in a stable order independent of archive internals
  std::vector<const EvalRecord*> sorted_front() const {
    std::vector<const EvalRecord*> v;
    for (const EvalRecord& r : archive_.front()) v.push_back(&r);
    std::sort(v.begin(), v.end(), [](const EvalRecord* a, const EvalRecord* b) {
      if (a->objective.cost != b->objective.cost) return a->objective.cost < b->objective.cost;
      return a->identity() < b->identity();
    });
    return v;
  }

  std::vector<Proposal> generate_round(int round) {
    std::vector<Proposal> out;
    const auto front = sorted_front();
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    const int count = round == 0 ? budget_.initial_population : budget_.mutations_per_round;
    for (int i = 0; i < count; ++i) {
      if (stage_ == Stage::one) {
        if (round == 0 || front.empty() || coin(rng_) >= 0.5) {
          out.push_back({random_structural(space_, rng_), "", "random_init"});
        } else {
          const EvalRecord* parent = front[std::uniform_int_distribution<std::size_t>(
              0, front.size() - 1)(rng_)];
          std::string desc;
          try {
            StructuralConfig cfg = mutate_structural(
                std::get<StructuralConfig>(parent->payload), space_, rng_, &desc);
            out.push_back({std::move(cfg), parent->identity(), desc});
          } catch (const MutationError&) {
            out.push_back({random_structural(space_, rng_), "", "random_init"});
          }
        }
      } else {
        if (round == 0 && i == 0) {
          out.push_back({seed_candidate_, "", "seed_transcription"});
          continue;
        }
        const bool mutate_parent = round == 0 || (!front.empty() && coin(rng_) < 0.5);
        if (mutate_parent) {
          const ModularCandidate* parent = &seed_candidate_;
          std::string parent_identity = candidate_identity(seed_candidate_);
          if (round != 0 && !front.empty()) {
            const EvalRecord* rec = front[std::uniform_int_distribution<std::size_t>(
                0, front.size() - 1)(rng_)];
            parent = &std::get<ModularCandidate>(rec->payload);
            parent_identity = rec->identity();
          }
          std::string desc;
          try {
            ModularCandidate cand = mutate_backbone(*parent, space_, rng_, &desc);
            out.push_back({std::move(cand), std::move(parent_identity), desc});
            continue;
          } catch (const MutationError&) {
            // fall through to a random encoding
          }
        }
        ModularCandidate cand = seed_candidate_;
        cand.encoding = random_encoding(family_, space_, rng_);
        if (!space_.modular_fpn_channels.empty())
          cand.fpn_channels = space_.modular_fpn_channels[std::uniform_int_distribution<
              std::size_t>(0, space_.modular_fpn_channels.size() - 1)(rng_)];
        out.push_back({std::move(cand), "", "random_encoding"});
      }
    }
    return out;
  }

  Admitted make_admitted(EvalRecord record) {
    EvalRequest req;
    req.id = record.id;
    req.payload = record.payload;
    req.resolution = effective_config(record.payload).resolution;
    req.train = train_;
    req.seed = budget_.rng_seed;
    return Admitted{std::move(record), std::move(req)};
  }

  std::vector<Admitted> admit(const std::vector<Proposal>& proposals) {
    std::vector<Admitted> batch;
    const int cap = budget_.max_evaluations - evals_used_;
    for (const Proposal& p : proposals) {
      if (static_cast<int>(batch.size()) >= cap) break;
      const std::string identity = payload_identity(p.payload);
      if (seen_.count(identity)) {
        // a pending record from a partially generated round is picked up here
        auto it = std::find_if(pending_.begin(), pending_.end(), [&](const EvalRecord& r) {
          return r.identity() == identity;
        });
        if (it != pending_.end()) {
          batch.push_back(make_admitted(std::move(*it)));
          pending_.erase(it);
        }
        continue;
      }
      seen_.insert(identity);

      EvalRecord r;
      char idbuf[16];
      std::snprintf(idbuf, sizeof idbuf, "r%06d", next_id_++);
      r.id = idbuf;
      id_by_identity_[identity] = r.id;
      r_round_[r.id] = round_;
      if (!p.parent_identity.empty()) {
        const auto it = id_by_identity_.find(p.parent_identity);
        if (it != id_by_identity_.end()) r.parent_id = it->second;
      }
      r.mutation = p.mutation;
      r.payload = p.payload;
      const StructuralConfig cfg = effective_config(p.payload);
      r.cost = total_cost(cfg, options_.latency);
      r.objective.kind = kind_;
      r.objective.cost = stage_ == Stage::one
                             ? r.cost.latency_ms.value()
                             : backbone_trunk_cost(cfg.backbone, cfg.resolution).flops_g();
      r.status = RecordStatus::pending;
      r.created = journal_.now();
      journal_.append(json{{"entry_type", "record"},
                           {"id", r.id},
                           {"round", round_},
                           {"parent_id", r.parent_id ? json(*r.parent_id) : json()},
                           {"mutation", r.mutation},
                           {"kind", r.is_modular() ? "modular" : "structural"},
                           {"payload", payload_to_json(r.payload)},
                           {"cost", cost_to_raw_json(r.cost)},
                           {"objective_kind", std::string(objective_kind_name(kind_))},
                           {"objective_cost", r.objective.cost},
                           {"created", r.created},
                           {"status", "pending"}});
      batch.push_back(make_admitted(std::move(r)));
    }
    return batch;
  }

  void journal_marker() {
    journal_.append(json{{"entry_type", "stage_marker"},
                         {"label", "round"},
                         {"round", round_},
                         {"rng_state", rng_to_string(rng_)},
                         {"evals_used", evals_used_}});
    last_marker_round_ = round_;
  }

  bool try_prune(const Admitted& a) {
    if (stage_ != Stage::two || !options_.pruning) return false;
    const auto& enc = std::get<ModularCandidate>(a.record.payload).encoding;
    const auto bound = pop_accuracy_upper_bound(enc, evaluated_enc_);
    if (!bound) return false;
    if (!should_prune(enc, a.record.objective.cost, archive_, evaluated_enc_)) return false;
    journal_.append(json{{"entry_type", "record"},
                         {"id", a.record.id},
                         {"status", "pruned"},
                         {"accuracy_bound", *bound},
                         {"completed", journal_.now()}});
    ++pruned_;
    return true;
  }

  void apply_completion(EvalRecord record, const EvalResponse& resp, AccuracySource source) {
    record.completed = journal_.now();
    record.source = source;
    if (resp.ok()) {
      record.status = RecordStatus::ok;
      record.objective.accuracy = resp.accuracy;
      record.measured_latency_ms = resp.measured_latency_ms;
      if (stage_ == Stage::one && resp.measured_latency_ms)
        record.objective.cost = *resp.measured_latency_ms;
      consecutive_failures_ = 0;
    } else {
      record.status = RecordStatus::failed;
      record.message = resp.message;
      ++consecutive_failures_;
    }
    ++evals_used_;
    json entry{{"entry_type", "record"},
               {"id", record.id},
               {"status", std::string(record_status_name(record.status))},
               {"completed", record.completed},
               {"accuracy_source", source == AccuracySource::external ? "external" : "surrogate"}};
    if (record.status == RecordStatus::ok) {
      entry["accuracy"] = record.objective.accuracy;
      entry["objective_cost"] = record.objective.cost;
      if (record.measured_latency_ms) entry["measured_latency_ms"] = *record.measured_latency_ms;
    } else {
      entry["message"] = record.message ? json(*record.message) : json();
    }
    journal_.append(entry);
    if (record.status == RecordStatus::ok) apply_ok_to_state(record);
    if (consecutive_failures_ >= options_.consecutive_failure_abort)
      throw EngineAbort("aborting after " + std::to_string(consecutive_failures_) +
                        " consecutive evaluator failures");
  }

  void evaluate_batch(std::vector<Admitted>& batch) {
    if (batch.empty()) return;
    if (pool_.size() == 1) {
      for (Admitted& a : batch) {
        if (evals_used_ >= budget_.max_evaluations) break;
        if (try_prune(a)) continue;
        const EvalResponse resp = pool_[0]->evaluate(a.request);
        apply_completion(std::move(a.record), resp, pool_[0]->source());
      }
      return;
    }

    // prune with round-start state, then fan out across the pool
    std::vector<Admitted*> survivors;
    for (Admitted& a : batch)
      if (!try_prune(a)) survivors.push_back(&a);

    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::pair<Admitted*, EvalResponse>> done;
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const std::size_t n_workers = std::min(pool_.size(), survivors.size());
    for (std::size_t w = 0; w < n_workers; ++w) {
      workers.emplace_back([&, w] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= survivors.size()) return;
          EvalResponse resp = pool_[w]->evaluate(survivors[i]->request);
          std::lock_guard lock(mu);
          done.emplace_back(survivors[i], std::move(resp));
          cv.notify_one();
        }
      });
    }
    std::size_t applied = 0;
    std::exception_ptr abort;
    while (applied < survivors.size()) {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return !done.empty(); });
      auto [a, resp] = std::move(done.front());
      done.pop_front();
      lock.unlock();
      ++applied;
      if (!abort) {
        try {
          apply_completion(std::move(a->record), resp, pool_[0]->source());
        } catch (...) {
          abort = std::current_exception();
        }
      }
    }
    for (std::thread& t : workers) t.join();
    if (abort) std::rethrow_exception(abort);
  }

  StageResult result() {
    StageResult r{std::move(archive_), evals_used_, pruned_, round_, journal_.text()};
    return r;
  }

  Stage stage_;
  SpaceDefinition space_;
  std::optional<StructuralConfig> seed_;
  std::vector<Evaluator*> pool_;
  SearchBudget budget_;
  StageOptions options_;
  ObjectiveKind kind_;
  ParetoArchive archive_;
  Journal journal_;
  Rng rng_;
  TrainSettings train_;

  BlockKind family_ = BlockKind::basicblock;
  ModularCandidate seed_candidate_;

  std::set<std::string> seen_;
  std::map<std::string, std::string> id_by_identity_;
  std::map<std::string, int> r_round_;
  std::vector<std::pair<BackboneEncoding, double>> evaluated_enc_;
  std::vector<EvalRecord> pending_;
  int evals_used_ = 0;
  int pruned_ = 0;
  int next_id_ = 1;
  int round_ = 0;
  int last_marker_round_ = -2;
  int consecutive_failures_ = 0;
  bool finished_ = false;
};

}  // namespace

StageResult run_stage_one(const SpaceDefinition& space, const std::vector<Evaluator*>& pool,
                          const SearchBudget& budget, const StageOptions& options) {
  SearchEngine engine(Stage::one, space, std::nullopt, pool, budget, options);
  return engine.run();
}

StageResult run_stage_two(const StructuralConfig& seed, const SpaceDefinition& space,
                          const std::vector<Evaluator*>& pool, const SearchBudget& budget,
                          const StageOptions& options) {
  SearchEngine engine(Stage::two, space, seed, pool, budget, options);
  return engine.run();
}

namespace {

JournalState state_from_replay(const Journal::Replay& replay) {
  JournalState out;
  out.torn_tail = replay.torn_tail;
  std::map<std::string, json> merged;
  std::vector<std::string> id_order;
  ObjectiveKind kind = ObjectiveKind::latency;
  for (const json& e : replay.entries) {
    const std::string type = e.at("entry_type").get<std::string>();
    if (type == "config_snapshot") {
      out.config = e.at("config");
      out.config_hash = e.at("config_hash").get<std::string>();
      const auto k = objective_kind_from_name(out.config.value("objective", "latency"));
      kind = k.value_or(ObjectiveKind::latency);
    } else if (type == "record") {
      const std::string id = e.at("id").get<std::string>();
      auto [it, fresh] = merged.try_emplace(id, json::object());
      if (fresh) id_order.push_back(id);
      for (auto& [k2, v] : e.items()) it->second[k2] = v;
    } else if (type == "stage_marker") {
      if (e.value("label", std::string()) == "final") out.finished = true;
    }
  }
  out.archive.emplace(kind);
  for (const std::string& id : id_order) {
    const json& j = merged[id];
    EvalRecord r;
    r.id = id;
    if (j.contains("parent_id") && j["parent_id"].is_string())
      r.parent_id = j["parent_id"].get<std::string>();
    r.mutation = j.value("mutation", std::string());
    r.payload = payload_from_json(j.at("kind").get<std::string>(), j.at("payload"));
    r.cost = cost_from_raw_json(j.at("cost"));
    r.objective.kind = kind;
    r.objective.cost = j.value("objective_cost", 0.0);
    r.objective.accuracy = j.value("accuracy", 0.0);
    if (j.contains("measured_latency_ms") && j["measured_latency_ms"].is_number())
      r.measured_latency_ms = j["measured_latency_ms"].get<double>();
    if (j.contains("accuracy_source"))
      r.source = j["accuracy_source"] == "external" ? AccuracySource::external
                                                    : AccuracySource::surrogate;
    if (j.contains("message") && j["message"].is_string())
      r.message = j["message"].get<std::string>();
    r.created = j.value("created", std::int64_t{0});
    r.completed = j.value("completed", std::int64_t{0});
    r.status = record_status_from_name(j.value("status", "pending"))
                   .value_or(RecordStatus::pending);
    if (r.status == RecordStatus::ok) {
      ++out.evaluations;
      out.archive->insert(r);
    } else if (r.status == RecordStatus::failed) {
      ++out.evaluations;
    } else if (r.status == RecordStatus::pruned) {
      ++out.pruned;
    }
    out.records.push_back(std::move(r));
  }
  return out;
}

}  // namespace

JournalState load_journal(const std::string& path) {
  return state_from_replay(Journal::replay_file(path));
}

JournalState load_journal_text(const std::string& text) {
  return state_from_replay(Journal::replay_text(text));
}

}  // namespace smnas
