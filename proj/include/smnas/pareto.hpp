#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "smnas/record.hpp"

namespace smnas {

// Strict dominance: a dominates b iff a is no worse in both objectives and
// strictly better in at least one. Equal points do not dominate each other.
// An optional epsilon absorbs cost jitter: costs within epsilon compare equal.
bool dominates(const ObjectivePoint& a, const ObjectivePoint& b, double epsilon = 0.0);

// Partition into dominance ranks; fronts[0] is the nondominated set.
std::vector<std::vector<std::size_t>> nondominated_sort(const std::vector<ObjectivePoint>& points);
std::vector<std::vector<std::size_t>> nondominated_sort(const std::vector<EvalRecord>& records);

enum class InsertOutcome { entered_front, dominated, duplicate };

// Nondominated archive under a single-writer contract. The front is a pure
// function of the set of inserted records, independent of insertion order.
class ParetoArchive {
 public:
  explicit ParetoArchive(ObjectiveKind kind, double epsilon = 0.0)
      : kind_(kind), epsilon_(epsilon) {}

  InsertOutcome insert(EvalRecord record);

  ObjectiveKind kind() const { return kind_; }
  double epsilon() const { return epsilon_; }
  const std::vector<EvalRecord>& front() const { return front_; }
  const std::vector<EvalRecord>& history() const { return history_; }
  std::size_t size() const { return front_.size() + history_.size(); }

  // All records, front first; rows carry no ordering promise.
  std::vector<const EvalRecord*> all() const;

 private:
  ObjectiveKind kind_;
  double epsilon_;
  std::vector<EvalRecord> front_;
  std::vector<EvalRecord> history_;  // dominated records
};

// The backbone partial order behind Partial Order Pruning: a precedes b when
// b is the same block family, at least as wide, and every stage of a embeds
// into the corresponding stage of b as an order-preserving subsequence
// ("deeper and wider"). Reflexive as written: equal encodings map to `equal`.
enum class OrderOutcome { precedes, succeeds, equal, incomparable };

OrderOutcome backbone_partial_order(const BackboneEncoding& a, const BackboneEncoding& b);

// Accuracy upper bound for an unevaluated encoding: the minimum accuracy over
// evaluated supersets (c precedes b). Sound when accuracy is monotone under
// the partial order. Absent when no evaluated superset exists.
std::optional<double> pop_accuracy_upper_bound(
    const BackboneEncoding& c,
    const std::vector<std::pair<BackboneEncoding, double>>& evaluated);

// Prune c when its accuracy bound U exists and the archive already holds a
// point at least as cheap with accuracy >= U: c cannot enter the front.
bool should_prune(const BackboneEncoding& c, double cost, const ParetoArchive& archive,
                  const std::vector<std::pair<BackboneEncoding, double>>& evaluated);

}  // namespace smnas
