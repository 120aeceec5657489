#pragma once

#include <random>
#include <string>

#include "smnas/pareto.hpp"
#include "smnas/record.hpp"

namespace smnas {

using Rng = std::mt19937_64;

struct SearchBudget {
  int max_evaluations = 100;
  int initial_population = 8;
  int mutations_per_round = 8;
  std::uint64_t rng_seed = 0;
};

json to_json(const SearchBudget& b);
SearchBudget budget_from_json(const json& j);

struct MutationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Uniform over valid configs via rejection over the field product.
StructuralConfig random_structural(const SpaceDefinition& space, Rng& rng);

// Resamples exactly one field group (backbone | neck | rpn+head | resolution)
// to a different valid value. rpn and head move jointly so the one-stage /
// two-stage coupling cannot break. Throws MutationError when no alternative
// exists after 20 retries.
StructuralConfig mutate_structural(const StructuralConfig& cfg, const SpaceDefinition& space,
                                   Rng& rng, std::string* description = nullptr);

// One operator drawn uniformly from {insert code-1 block, delete block,
// toggle 1<->2, swap a code-2 with an adjacent code-1 (possibly across a
// stage boundary), change base width, change fpn channels}; the result
// respects non-empty stages and the depth/doubling caps. Throws
// MutationError when nothing applies after 20 retries.
ModularCandidate mutate_backbone(const ModularCandidate& cand, const SpaceDefinition& space,
                                 Rng& rng, std::string* description = nullptr);

// Random encoding within the space's modular bounds; used to keep stage-two
// exploration from collapsing onto the seed's neighborhood.
BackboneEncoding random_encoding(BlockKind family, const SpaceDefinition& space, Rng& rng);

// k front members at evenly spaced quantiles of log-cost, endpoints included,
// deterministic. Returns the whole front when it has at most k members.
std::vector<StructuralConfig> select_candidates(const ParetoArchive& archive, int k);

}  // namespace smnas
