#include "smnas/evolution.hpp"

#include <algorithm>
#include <cmath>

namespace smnas {

json to_json(const SearchBudget& b) {
  return json{{"max_evaluations", b.max_evaluations},
              {"initial_population", b.initial_population},
              {"mutations_per_round", b.mutations_per_round},
              {"rng_seed", b.rng_seed}};
}

SearchBudget budget_from_json(const json& j) {
  SearchBudget b;
  b.max_evaluations = j.value("max_evaluations", b.max_evaluations);
  b.initial_population = j.value("initial_population", b.initial_population);
  b.mutations_per_round = j.value("mutations_per_round", b.mutations_per_round);
  b.rng_seed = j.value("rng_seed", b.rng_seed);
  if (b.max_evaluations < 0 || b.initial_population <= 0 || b.mutations_per_round <= 0)
    throw std::runtime_error("budget fields must be positive");
  return b;
}

namespace {

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

std::size_t pick_index(std::size_t n, Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(0, n - 1);
  return d(rng);
}

NeckConfig random_neck(const SpaceDefinition& space, Rng& rng) {
  const std::size_t n_fpn = space.fpn_level_pairs.size() * space.fpn_channels.size();
  const std::size_t n_total = (space.allow_no_neck ? 1 : 0) + n_fpn;
  if (n_total == 0) throw MutationError("space admits no neck choice");
  std::size_t idx = pick_index(n_total, rng);
  if (space.allow_no_neck) {
    if (idx == 0) return NeckConfig{};
    --idx;
  }
  const auto& [lo, hi] = space.fpn_level_pairs[idx / space.fpn_channels.size()];
  const int c = space.fpn_channels[idx % space.fpn_channels.size()];
  return NeckConfig{NeckKind::fpn, lo, hi, c};
}

std::pair<RpnKind, HeadConfig> random_pairing(const SpaceDefinition& space, Rng& rng) {
  // sample uniformly over the valid (rpn, head) pairs
  std::vector<std::pair<RpnKind, HeadConfig>> pairs;
  for (RpnKind rpn : space.rpns) {
    if (rpn == RpnKind::none) {
      if (std::count(space.heads.begin(), space.heads.end(), HeadKind::retina))
        pairs.push_back({rpn, HeadConfig{HeadKind::retina, 0}});
    } else {
      if (std::count(space.heads.begin(), space.heads.end(), HeadKind::fc2))
        pairs.push_back({rpn, HeadConfig{HeadKind::fc2, 0}});
      if (std::count(space.heads.begin(), space.heads.end(), HeadKind::cascade))
        for (int n : space.cascade_stage_counts)
          pairs.push_back({rpn, HeadConfig{HeadKind::cascade, n}});
    }
  }
  if (pairs.empty()) throw MutationError("space admits no valid rpn/head pairing");
  return pick(pairs, rng);
}

}  // namespace

StructuralConfig random_structural(const SpaceDefinition& space, Rng& rng) {
  if (space.backbones.empty() || space.resolutions.empty())
    throw MutationError("space admits no valid config");
  for (int attempt = 0; attempt < 1000; ++attempt) {
    StructuralConfig cfg;
    cfg.backbone = pick(space.backbones, rng);
    cfg.neck = random_neck(space, rng);
    std::tie(cfg.rpn, cfg.head) = random_pairing(space, rng);
    cfg.resolution = pick(space.resolutions, rng);
    if (validate_structural(cfg, space).empty()) return cfg;
  }
  throw MutationError("rejection sampling found no valid config");
}

StructuralConfig mutate_structural(const StructuralConfig& cfg, const SpaceDefinition& space,
                                   Rng& rng, std::string* description) {
  for (int attempt = 0; attempt < 20; ++attempt) {
    StructuralConfig out = cfg;
    std::string desc;
    switch (pick_index(4, rng)) {
      case 0: {
        out.backbone = pick(space.backbones, rng);
        desc = "mutate_backbone_choice";
        break;
      }
      case 1: {
        out.neck = random_neck(space, rng);
        desc = "mutate_neck";
        break;
      }
      case 2: {
        std::tie(out.rpn, out.head) = random_pairing(space, rng);
        desc = "mutate_rpn_head";
        break;
      }
      case 3: {
        out.resolution = pick(space.resolutions, rng);
        desc = "mutate_resolution";
        break;
      }
    }
    if (out == cfg) continue;
    if (!validate_structural(out, space).empty()) continue;
    if (description) *description = desc;
    return out;
  }
  throw MutationError("no alternative value exists for any field group");
}

namespace {

struct BlockRef {
  int stage;
  int pos;
};

std::vector<BlockRef> all_blocks(const BackboneEncoding& enc) {
  std::vector<BlockRef> v;
  for (int s = 0; s < 4; ++s)
    for (int p = 0; p < static_cast<int>(enc.stages[s].size()); ++p) v.push_back({s, p});
  return v;
}

// neighbors of a block in the flattened encoding, crossing stage boundaries
std::vector<BlockRef> neighbors(const BackboneEncoding& enc, BlockRef b) {
  std::vector<BlockRef> out;
  if (b.pos > 0)
    out.push_back({b.stage, b.pos - 1});
  else
    for (int s = b.stage - 1; s >= 0; --s)
      if (!enc.stages[s].empty()) {
        out.push_back({s, static_cast<int>(enc.stages[s].size()) - 1});
        break;
      }
  if (b.pos + 1 < static_cast<int>(enc.stages[b.stage].size()))
    out.push_back({b.stage, b.pos + 1});
  else
    for (int s = b.stage + 1; s < 4; ++s)
      if (!enc.stages[s].empty()) {
        out.push_back({s, 0});
        break;
      }
  return out;
}

}  // namespace

ModularCandidate mutate_backbone(const ModularCandidate& cand, const SpaceDefinition& space,
                                 Rng& rng, std::string* description) {
  for (int attempt = 0; attempt < 20; ++attempt) {
    ModularCandidate out = cand;
    BackboneEncoding& enc = out.encoding;
    std::string desc;
    bool applied = false;
    switch (pick_index(6, rng)) {
      case 0: {  // insert a code-1 block
        if (enc.depth() >= space.max_depth) break;
        const int s = static_cast<int>(pick_index(4, rng));
        const std::size_t at = pick_index(enc.stages[s].size() + 1, rng);
        enc.stages[s].insert(enc.stages[s].begin() + static_cast<std::ptrdiff_t>(at), 1);
        desc = "insert_block(stage=" + std::to_string(s + 2) + ",pos=" + std::to_string(at) + ")";
        applied = true;
        break;
      }
      case 1: {  // delete a block, keeping every stage non-empty
        std::vector<int> candidates;
        for (int s = 0; s < 4; ++s)
          if (enc.stages[s].size() > 1) candidates.push_back(s);
        if (candidates.empty()) break;
        const int s = candidates[pick_index(candidates.size(), rng)];
        const std::size_t at = pick_index(enc.stages[s].size(), rng);
        enc.stages[s].erase(enc.stages[s].begin() + static_cast<std::ptrdiff_t>(at));
        desc = "delete_block(stage=" + std::to_string(s + 2) + ",pos=" + std::to_string(at) + ")";
        applied = true;
        break;
      }
      case 2: {  // toggle a code 1 <-> 2 under the doubling cap
        const auto blocks = all_blocks(enc);
        const BlockRef b = blocks[pick_index(blocks.size(), rng)];
        std::uint8_t& code = enc.stages[b.stage][static_cast<std::size_t>(b.pos)];
        const std::uint8_t flipped = code == 1 ? 2 : 1;
        if (flipped == 2 && enc.doublings() >= space.max_doublings) break;
        code = flipped;
        desc = std::string("toggle_code(stage=") + std::to_string(b.stage + 2) +
               ",pos=" + std::to_string(b.pos) + ")";
        applied = true;
        break;
      }
      case 3: {  // move a doubling: swap a code-2 with an adjacent code-1
        std::vector<BlockRef> twos;
        for (const BlockRef& b : all_blocks(enc))
          if (enc.stages[b.stage][static_cast<std::size_t>(b.pos)] == 2) twos.push_back(b);
        if (twos.empty()) break;
        const BlockRef b = twos[pick_index(twos.size(), rng)];
        auto ns = neighbors(enc, b);
        std::erase_if(ns, [&](const BlockRef& n) {
          return enc.stages[n.stage][static_cast<std::size_t>(n.pos)] != 1;
        });
        if (ns.empty()) break;
        const BlockRef n = ns[pick_index(ns.size(), rng)];
        std::swap(enc.stages[b.stage][static_cast<std::size_t>(b.pos)],
                  enc.stages[n.stage][static_cast<std::size_t>(n.pos)]);
        desc = "move_doubling(stage=" + std::to_string(b.stage + 2) +
               ",pos=" + std::to_string(b.pos) + "->stage=" + std::to_string(n.stage + 2) +
               ",pos=" + std::to_string(n.pos) + ")";
        applied = true;
        break;
      }
      case 4: {  // change base width
        std::vector<int> alts;
        for (int b : space.modular_bases)
          if (b != enc.base) alts.push_back(b);
        if (alts.empty()) break;
        enc.base = alts[pick_index(alts.size(), rng)];
        desc = "change_base(" + std::to_string(cand.encoding.base) + "->" +
               std::to_string(enc.base) + ")";
        applied = true;
        break;
      }
      case 5: {  // change fpn channels
        std::vector<int> alts;
        for (int c : space.modular_fpn_channels)
          if (c != out.fpn_channels) alts.push_back(c);
        if (alts.empty()) break;
        out.fpn_channels = alts[pick_index(alts.size(), rng)];
        desc = "change_fpn_channels(" + std::to_string(cand.fpn_channels) + "->" +
               std::to_string(out.fpn_channels) + ")";
        applied = true;
        break;
      }
    }
    if (!applied) continue;
    if (!encoding_within_caps(enc, space.max_depth, space.max_doublings)) continue;
    if (description) *description = desc;
    return out;
  }
  throw MutationError("no applicable backbone mutation after 20 retries");
}

BackboneEncoding random_encoding(BlockKind family, const SpaceDefinition& space, Rng& rng) {
  BackboneEncoding enc;
  enc.block = family;
  enc.base = pick(space.modular_bases, rng);
  const int max_depth = std::max(4, space.max_depth);
  std::uniform_int_distribution<int> depth_dist(4, max_depth);
  const int depth = depth_dist(rng);
  // split depth into 4 non-empty stages
  std::array<int, 4> sizes{1, 1, 1, 1};
  for (int i = 0; i < depth - 4; ++i) ++sizes[pick_index(4, rng)];
  std::uniform_int_distribution<int> twos_dist(0, space.max_doublings);
  int twos = std::min(twos_dist(rng), depth);
  for (int s = 0; s < 4; ++s)
    enc.stages[s].assign(static_cast<std::size_t>(sizes[s]), std::uint8_t{1});
  while (twos > 0) {
    const int s = static_cast<int>(pick_index(4, rng));
    const std::size_t p = pick_index(enc.stages[s].size(), rng);
    if (enc.stages[s][p] == 1) {
      enc.stages[s][p] = 2;
      --twos;
    }
  }
  return enc;
}

std::vector<StructuralConfig> select_candidates(const ParetoArchive& archive, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  std::vector<const EvalRecord*> front;
  for (const EvalRecord& r : archive.front()) front.push_back(&r);
  std::sort(front.begin(), front.end(), [](const EvalRecord* a, const EvalRecord* b) {
    if (a->objective.cost != b->objective.cost) return a->objective.cost < b->objective.cost;
    return a->identity() < b->identity();
  });

  std::vector<std::size_t> chosen;
  if (static_cast<int>(front.size()) <= k) {
    for (std::size_t i = 0; i < front.size(); ++i) chosen.push_back(i);
  } else {
    const double lo = std::log(std::max(front.front()->objective.cost, 1e-12));
    const double hi = std::log(std::max(front.back()->objective.cost, 1e-12));
    for (int i = 0; i < k; ++i) {
      const double target = k == 1 ? lo : lo + (hi - lo) * i / (k - 1);
      std::size_t best = 0;
      double best_dist = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < front.size(); ++j) {
        if (std::find(chosen.begin(), chosen.end(), j) != chosen.end()) continue;
        const double d = std::abs(std::log(std::max(front[j]->objective.cost, 1e-12)) - target);
        if (d < best_dist) {
          best_dist = d;
          best = j;
        }
      }
      chosen.push_back(best);
    }
    std::sort(chosen.begin(), chosen.end());
  }

  std::vector<StructuralConfig> out;
  for (std::size_t i : chosen) out.push_back(effective_config(front[i]->payload));
  return out;
}

}  // namespace smnas
