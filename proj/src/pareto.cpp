#include "smnas/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace smnas {

// --- record / payload plumbing -------------------------------------------------

json to_json(const ModularCandidate& cand) {
  return json{{"seed", to_json(cand.seed)},
              {"encoding", format_backbone_encoding(cand.encoding)},
              {"fpn_channels", cand.fpn_channels}};
}

ModularCandidate modular_from_json(const json& j) {
  ModularCandidate c;
  c.seed = structural_from_json(j.at("seed"));
  c.encoding = parse_backbone_encoding(j.at("encoding").get<std::string>());
  c.fpn_channels = j.at("fpn_channels").get<int>();
  return c;
}

std::string candidate_identity(const ModularCandidate& cand) { return to_json(cand).dump(); }

std::string payload_identity(const CandidatePayload& p) {
  if (const auto* cfg = std::get_if<StructuralConfig>(&p)) return config_identity(*cfg);
  return candidate_identity(std::get<ModularCandidate>(p));
}

json payload_to_json(const CandidatePayload& p) {
  if (const auto* cfg = std::get_if<StructuralConfig>(&p)) return to_json(*cfg);
  return to_json(std::get<ModularCandidate>(p));
}

CandidatePayload payload_from_json(const std::string& kind, const json& j) {
  if (kind == "structural") return structural_from_json(j);
  if (kind == "modular") return modular_from_json(j);
  throw std::runtime_error("unknown payload kind '" + kind + "'");
}

StructuralConfig effective_config(const CandidatePayload& p) {
  if (const auto* cfg = std::get_if<StructuralConfig>(&p)) return *cfg;
  const auto& cand = std::get<ModularCandidate>(p);
  StructuralConfig cfg = cand.seed;
  cfg.backbone = cand.encoding;
  if (cfg.neck.kind == NeckKind::fpn) cfg.neck.channels = cand.fpn_channels;
  return cfg;
}

std::string_view objective_kind_name(ObjectiveKind k) {
  return k == ObjectiveKind::latency ? "latency" : "flops";
}

std::optional<ObjectiveKind> objective_kind_from_name(std::string_view name) {
  if (name == "latency") return ObjectiveKind::latency;
  if (name == "flops") return ObjectiveKind::flops;
  return std::nullopt;
}

std::string_view record_status_name(RecordStatus s) {
  switch (s) {
    case RecordStatus::pending: return "pending";
    case RecordStatus::ok: return "ok";
    case RecordStatus::failed: return "failed";
    case RecordStatus::pruned: return "pruned";
  }
  return "pending";
}

std::optional<RecordStatus> record_status_from_name(std::string_view name) {
  if (name == "pending") return RecordStatus::pending;
  if (name == "ok") return RecordStatus::ok;
  if (name == "failed") return RecordStatus::failed;
  if (name == "pruned") return RecordStatus::pruned;
  return std::nullopt;
}

// --- dominance -----------------------------------------------------------------

bool dominates(const ObjectivePoint& a, const ObjectivePoint& b, double epsilon) {
  if (a.kind != b.kind)
    throw std::invalid_argument("dominance comparison across objective kinds");
  const bool cost_le = a.cost <= b.cost + epsilon;
  const bool acc_ge = a.accuracy >= b.accuracy;
  const bool cost_lt = a.cost < b.cost - epsilon;
  const bool acc_gt = a.accuracy > b.accuracy;
  return cost_le && acc_ge && (cost_lt || acc_gt);
}

std::vector<std::vector<std::size_t>> nondominated_sort(const std::vector<ObjectivePoint>& points) {
  std::vector<std::vector<std::size_t>> fronts;
  std::vector<std::size_t> remaining(points.size());
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});
  // sorted by (cost asc, accuracy desc): a point is dominated iff some
  // strictly cheaper point reaches its accuracy, or a same-cost point beats it
  std::stable_sort(remaining.begin(), remaining.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].cost != points[b].cost) return points[a].cost < points[b].cost;
    return points[a].accuracy > points[b].accuracy;
  });
  while (!remaining.empty()) {
    std::vector<std::size_t> front, dominated;
    double best_cheaper = -std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    while (i < remaining.size()) {
      std::size_t j = i;
      const double cost = points[remaining[i]].cost;
      double group_best = -std::numeric_limits<double>::infinity();
      while (j < remaining.size() && points[remaining[j]].cost == cost) {
        group_best = std::max(group_best, points[remaining[j]].accuracy);
        ++j;
      }
      for (std::size_t k = i; k < j; ++k) {
        const double acc = points[remaining[k]].accuracy;
        if (best_cheaper >= acc || group_best > acc)
          dominated.push_back(remaining[k]);
        else
          front.push_back(remaining[k]);
      }
      best_cheaper = std::max(best_cheaper, group_best);
      i = j;
    }
    fronts.push_back(std::move(front));
    remaining = std::move(dominated);
  }
  return fronts;
}

std::vector<std::vector<std::size_t>> nondominated_sort(const std::vector<EvalRecord>& records) {
  std::vector<ObjectivePoint> points;
  points.reserve(records.size());
  for (const EvalRecord& r : records) points.push_back(r.objective);
  return nondominated_sort(points);
}

// --- archive -------------------------------------------------------------------

InsertOutcome ParetoArchive::insert(EvalRecord record) {
  if (record.objective.kind != kind_)
    throw std::invalid_argument("record objective kind does not match archive");
  const std::string id = record.identity();
  const auto same_identity = [&](const EvalRecord& r) { return r.identity() == id; };
  if (std::any_of(front_.begin(), front_.end(), same_identity) ||
      std::any_of(history_.begin(), history_.end(), same_identity))
    return InsertOutcome::duplicate;

  for (const EvalRecord& f : front_) {
    if (dominates(f.objective, record.objective, epsilon_)) {
      history_.push_back(std::move(record));
      return InsertOutcome::dominated;
    }
  }
  for (std::size_t i = front_.size(); i-- > 0;) {
    if (dominates(record.objective, front_[i].objective, epsilon_)) {
      history_.push_back(std::move(front_[i]));
      front_.erase(front_.begin() + static_cast<std::ptrdiff_t>(i));
    }
  }
  front_.push_back(std::move(record));
  return InsertOutcome::entered_front;
}

std::vector<const EvalRecord*> ParetoArchive::all() const {
  std::vector<const EvalRecord*> out;
  out.reserve(size());
  for (const EvalRecord& r : front_) out.push_back(&r);
  for (const EvalRecord& r : history_) out.push_back(&r);
  return out;
}

// --- backbone partial order ------------------------------------------------------

namespace {

bool is_subsequence(const std::vector<std::uint8_t>& small, const std::vector<std::uint8_t>& big) {
  std::size_t i = 0;
  for (std::size_t j = 0; j < big.size() && i < small.size(); ++j)
    if (small[i] == big[j]) ++i;
  return i == small.size();
}

bool precedes(const BackboneEncoding& a, const BackboneEncoding& b) {
  if (a.block != b.block || a.base > b.base) return false;
  for (std::size_t s = 0; s < a.stages.size(); ++s)
    if (!is_subsequence(a.stages[s], b.stages[s])) return false;
  return true;
}

}  // namespace

OrderOutcome backbone_partial_order(const BackboneEncoding& a, const BackboneEncoding& b) {
  const bool ab = precedes(a, b);
  const bool ba = precedes(b, a);
  if (ab && ba) return OrderOutcome::equal;
  if (ab) return OrderOutcome::precedes;
  if (ba) return OrderOutcome::succeeds;
  return OrderOutcome::incomparable;
}

std::optional<double> pop_accuracy_upper_bound(
    const BackboneEncoding& c,
    const std::vector<std::pair<BackboneEncoding, double>>& evaluated) {
  std::optional<double> bound;
  for (const auto& [enc, acc] : evaluated) {
    const OrderOutcome o = backbone_partial_order(c, enc);
    if (o == OrderOutcome::precedes || o == OrderOutcome::equal)
      bound = bound ? std::min(*bound, acc) : acc;
  }
  return bound;
}

bool should_prune(const BackboneEncoding& c, double cost, const ParetoArchive& archive,
                  const std::vector<std::pair<BackboneEncoding, double>>& evaluated) {
  const auto bound = pop_accuracy_upper_bound(c, evaluated);
  if (!bound) return false;
  // c enters the front only if even its bound point would; exact ties are kept
  // on the front, so the archived point must strictly dominate the bound.
  const ObjectivePoint at_bound{archive.kind(), cost, *bound};
  for (const EvalRecord& p : archive.front())
    if (dominates(p.objective, at_bound, archive.epsilon())) return true;
  return false;
}

}  // namespace smnas
