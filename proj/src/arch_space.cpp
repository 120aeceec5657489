#include "smnas/arch_space.hpp"

#include <algorithm>
#include <cctype>

namespace smnas {

namespace {

constexpr std::array<std::string_view, 4> kBlockNames = {
    "basicblock", "bottleneck", "xbottleneck", "mbblock"};

constexpr std::array<std::string_view, 7> kBackboneNames = {
    "resnet18", "resnet34",  "resnet50",   "resnet101",
    "resnext50", "resnext101", "mobilenetv2"};

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view block_kind_name(BlockKind k) {
  return kBlockNames[static_cast<std::size_t>(k)];
}

std::optional<BlockKind> block_kind_from_name(std::string_view name) {
  const std::string lower = to_lower(name);
  for (std::size_t i = 0; i < kBlockNames.size(); ++i) {
    if (lower == kBlockNames[i]) return static_cast<BlockKind>(i);
  }
  return std::nullopt;
}

int BackboneEncoding::depth() const {
  int n = 0;
  for (const auto& s : stages) n += static_cast<int>(s.size());
  return n;
}

int BackboneEncoding::doublings() const {
  int n = 0;
  for (const auto& s : stages)
    n += static_cast<int>(std::count(s.begin(), s.end(), std::uint8_t{2}));
  return n;
}

BackboneEncoding parse_backbone_encoding(std::string_view text) {
  const auto fail = [&](std::size_t pos, const std::string& msg) -> void {
    throw EncodingParseError(pos, msg);
  };

  const std::size_t first_sep = text.find('_');
  if (first_sep == std::string_view::npos)
    fail(text.size(), "malformed encoding: missing '_' after block name");
  const std::string_view block_tok = text.substr(0, first_sep);
  const auto block = block_kind_from_name(block_tok);
  if (!block) fail(0, "unknown block name '" + std::string(block_tok) + "'");

  const std::size_t second_sep = text.find('_', first_sep + 1);
  if (second_sep == std::string_view::npos)
    fail(text.size(), "malformed encoding: missing '_' after base channels");
  const std::string_view base_tok = text.substr(first_sep + 1, second_sep - first_sep - 1);
  if (base_tok.empty() || base_tok[0] == '0' ||
      !std::all_of(base_tok.begin(), base_tok.end(),
                   [](unsigned char c) { return std::isdigit(c); })) {
    fail(first_sep + 1, "base channels must be a positive integer");
  }
  long base = 0;
  for (char c : base_tok) {
    base = base * 10 + (c - '0');
    if (base > 1'000'000) fail(first_sep + 1, "base channels out of range");
  }

  BackboneEncoding enc;
  enc.block = *block;
  enc.base = static_cast<int>(base);

  std::size_t stage_idx = 0;
  std::size_t pos = second_sep + 1;
  std::size_t group_start = pos;
  std::vector<std::uint8_t> current;
  const auto flush_group = [&](std::size_t at) {
    if (current.empty()) fail(group_start, "empty stage group");
    if (stage_idx >= 4) fail(at, "expected 4 stage groups, found more");
    enc.stages[stage_idx++] = std::move(current);
    current.clear();
  };
  for (; pos < text.size(); ++pos) {
    const char c = text[pos];
    if (c == '-') {
      flush_group(pos);
      group_start = pos + 1;
    } else if (c == '1' || c == '2') {
      current.push_back(static_cast<std::uint8_t>(c - '0'));
    } else {
      fail(pos, std::string("invalid block code '") + c + "', expected 1 or 2");
    }
  }
  flush_group(text.size());
  if (stage_idx != 4) {
    fail(text.size(), "expected 4 stage groups, found " + std::to_string(stage_idx));
  }
  return enc;
}

std::string format_backbone_encoding(const BackboneEncoding& enc) {
  std::string out(block_kind_name(enc.block));
  out += '_';
  out += std::to_string(enc.base);
  out += '_';
  for (std::size_t s = 0; s < enc.stages.size(); ++s) {
    if (s > 0) out += '-';
    for (std::uint8_t code : enc.stages[s]) out += static_cast<char>('0' + code);
  }
  return out;
}

bool encoding_within_caps(const BackboneEncoding& enc, int max_depth, int max_doublings) {
  for (const auto& s : enc.stages)
    if (s.empty()) return false;
  return enc.base > 0 && enc.depth() <= max_depth && enc.doublings() <= max_doublings;
}

std::string_view backbone_id_name(BackboneId id) {
  return kBackboneNames[static_cast<std::size_t>(id)];
}

std::optional<BackboneId> backbone_id_from_name(std::string_view name) {
  const std::string lower = to_lower(name);
  for (std::size_t i = 0; i < kBackboneNames.size(); ++i) {
    if (lower == kBackboneNames[i]) return static_cast<BackboneId>(i);
  }
  return std::nullopt;
}

BlockKind backbone_family(const BackboneChoice& choice) {
  if (const auto* enc = std::get_if<BackboneEncoding>(&choice)) return enc->block;
  switch (std::get<BackboneId>(choice)) {
    case BackboneId::resnet18:
    case BackboneId::resnet34:
      return BlockKind::basicblock;
    case BackboneId::resnet50:
    case BackboneId::resnet101:
      return BlockKind::bottleneck;
    case BackboneId::resnext50:
    case BackboneId::resnext101:
      return BlockKind::xbottleneck;
    case BackboneId::mobilenetv2:
      return BlockKind::mbblock;
  }
  return BlockKind::basicblock;
}

std::string_view neck_kind_name(NeckKind k) { return k == NeckKind::none ? "none" : "fpn"; }

std::string_view rpn_kind_name(RpnKind k) {
  switch (k) {
    case RpnKind::none: return "none";
    case RpnKind::rpn: return "rpn";
    case RpnKind::ga_rpn: return "ga_rpn";
  }
  return "none";
}

std::optional<RpnKind> rpn_kind_from_name(std::string_view name) {
  if (name == "none") return RpnKind::none;
  if (name == "rpn") return RpnKind::rpn;
  if (name == "ga_rpn") return RpnKind::ga_rpn;
  return std::nullopt;
}

std::string_view head_kind_name(HeadKind k) {
  switch (k) {
    case HeadKind::fc2: return "fc2";
    case HeadKind::retina: return "retina";
    case HeadKind::cascade: return "cascade";
  }
  return "fc2";
}

std::set<int> derive_feature_levels(const BackboneChoice& choice) {
  // All supported backbones expose four stages at strides 4/8/16/32 (P1..P4);
  // P5 and P6 come from extra downsampling.
  (void)choice;
  return {1, 2, 3, 4, 5, 6};
}

SpaceDefinition SpaceDefinition::defaults() {
  SpaceDefinition s;
  s.backbones = {BackboneId::resnet18,  BackboneId::resnet34,  BackboneId::resnet50,
                 BackboneId::resnet101, BackboneId::resnext50, BackboneId::resnext101,
                 BackboneId::mobilenetv2};
  s.allow_no_neck = true;
  for (int lo = 1; lo <= 6; ++lo)
    for (int hi = lo + 1; hi <= 6; ++hi) s.fpn_level_pairs.emplace_back(lo, hi);
  s.fpn_channels = {128, 256, 512};
  s.rpns = {RpnKind::none, RpnKind::rpn, RpnKind::ga_rpn};
  s.heads = {HeadKind::fc2, HeadKind::retina, HeadKind::cascade};
  s.cascade_stage_counts = {2, 3, 4};
  s.resolutions = {{512, 512}, {800, 600}, {1080, 720}, {1333, 800}};
  s.modular_bases = {48, 56, 64, 72};
  s.modular_fpn_channels = {128, 256, 512};
  s.max_depth = 40;
  s.max_doublings = 4;
  return s;
}

namespace {

bool contains_head(const std::vector<HeadKind>& heads, HeadKind k) {
  return std::find(heads.begin(), heads.end(), k) != heads.end();
}

// Valid (rpn, head) pairings: retina <=> no RPN; fc2/cascade need RPN or GA-RPN.
std::vector<std::pair<RpnKind, HeadConfig>> head_pairings(const SpaceDefinition& space) {
  std::vector<std::pair<RpnKind, HeadConfig>> out;
  for (RpnKind rpn : space.rpns) {
    if (rpn == RpnKind::none) {
      if (contains_head(space.heads, HeadKind::retina))
        out.push_back({rpn, HeadConfig{HeadKind::retina, 0}});
    } else {
      if (contains_head(space.heads, HeadKind::fc2))
        out.push_back({rpn, HeadConfig{HeadKind::fc2, 0}});
      if (contains_head(space.heads, HeadKind::cascade))
        for (int n : space.cascade_stage_counts)
          out.push_back({rpn, HeadConfig{HeadKind::cascade, n}});
    }
  }
  return out;
}

std::vector<NeckConfig> neck_choices(const SpaceDefinition& space) {
  std::vector<NeckConfig> out;
  if (space.allow_no_neck) out.push_back(NeckConfig{});
  for (const auto& [lo, hi] : space.fpn_level_pairs)
    for (int c : space.fpn_channels) out.push_back(NeckConfig{NeckKind::fpn, lo, hi, c});
  return out;
}

}  // namespace

std::vector<Violation> validate_structural(const StructuralConfig& cfg,
                                           const SpaceDefinition& space) {
  std::vector<Violation> v;

  if (const auto* id = std::get_if<BackboneId>(&cfg.backbone)) {
    if (std::find(space.backbones.begin(), space.backbones.end(), *id) ==
        space.backbones.end()) {
      v.push_back({"backbone", "backbone not in the allowed set"});
    }
  } else {
    const auto& enc = std::get<BackboneEncoding>(cfg.backbone);
    if (!encoding_within_caps(enc, space.max_depth, space.max_doublings))
      v.push_back({"backbone", "custom encoding violates depth/doubling caps"});
  }

  const auto levels = derive_feature_levels(cfg.backbone);
  if (cfg.neck.kind == NeckKind::fpn) {
    if (!(1 <= cfg.neck.in_low && cfg.neck.in_low < cfg.neck.in_high && cfg.neck.in_high <= 6))
      v.push_back({"neck", "fpn levels must satisfy 1 <= in_low < in_high <= 6"});
    else if (!levels.count(cfg.neck.in_low) || !levels.count(cfg.neck.in_high))
      v.push_back({"neck", "fpn level not derivable from backbone"});
    const auto& pairs = space.fpn_level_pairs;
    if (std::find(pairs.begin(), pairs.end(),
                  std::make_pair(cfg.neck.in_low, cfg.neck.in_high)) == pairs.end())
      v.push_back({"neck", "fpn level pair not in the allowed set"});
    if (std::find(space.fpn_channels.begin(), space.fpn_channels.end(), cfg.neck.channels) ==
        space.fpn_channels.end())
      v.push_back({"neck", "fpn channels not in the allowed set"});
  } else if (!space.allow_no_neck) {
    v.push_back({"neck", "configurations without a neck are not allowed"});
  }

  if (std::find(space.rpns.begin(), space.rpns.end(), cfg.rpn) == space.rpns.end())
    v.push_back({"rpn", "rpn kind not in the allowed set"});

  if (!contains_head(space.heads, cfg.head.kind))
    v.push_back({"head", "head kind not in the allowed set"});
  if (cfg.head.kind == HeadKind::cascade) {
    if (std::find(space.cascade_stage_counts.begin(), space.cascade_stage_counts.end(),
                  cfg.head.cascade_n) == space.cascade_stage_counts.end())
      v.push_back({"head", "cascade stage count not in the allowed set"});
    if (!(2 <= cfg.head.cascade_n && cfg.head.cascade_n <= 4))
      v.push_back({"head", "cascade stage count must be in 2..4"});
  }

  // one-stage/two-stage coupling
  if (cfg.rpn == RpnKind::none && cfg.head.kind != HeadKind::retina)
    v.push_back({"head", "fc2/cascade heads require an RPN"});
  if (cfg.rpn != RpnKind::none && cfg.head.kind == HeadKind::retina)
    v.push_back({"head", "retina head requires no RPN"});

  if (std::find(space.resolutions.begin(), space.resolutions.end(), cfg.resolution) ==
      space.resolutions.end())
    v.push_back({"resolution", "resolution not in the allowed set"});
  if (cfg.resolution.width <= 0 || cfg.resolution.height <= 0)
    v.push_back({"resolution", "resolution must be positive"});

  return v;
}

std::vector<StructuralConfig> enumerate_structural(const SpaceDefinition& space) {
  std::vector<StructuralConfig> out;
  const auto necks = neck_choices(space);
  const auto pairings = head_pairings(space);
  for (BackboneId b : space.backbones)
    for (const NeckConfig& neck : necks)
      for (const auto& [rpn, head] : pairings)
        for (const Resolution& res : space.resolutions)
          out.push_back(StructuralConfig{b, neck, rpn, head, res});
  return out;
}

std::uint64_t structural_cardinality(const SpaceDefinition& space) {
  const std::uint64_t necks =
      (space.allow_no_neck ? 1 : 0) +
      static_cast<std::uint64_t>(space.fpn_level_pairs.size()) * space.fpn_channels.size();
  std::uint64_t pairings = 0;
  for (RpnKind rpn : space.rpns) {
    if (rpn == RpnKind::none) {
      pairings += contains_head(space.heads, HeadKind::retina) ? 1 : 0;
    } else {
      pairings += contains_head(space.heads, HeadKind::fc2) ? 1 : 0;
      if (contains_head(space.heads, HeadKind::cascade))
        pairings += space.cascade_stage_counts.size();
    }
  }
  return static_cast<std::uint64_t>(space.backbones.size()) * necks * pairings *
         space.resolutions.size();
}

// --- JSON -------------------------------------------------------------------

json to_json(const Resolution& r) { return json{{"width", r.width}, {"height", r.height}}; }

json to_json(const NeckConfig& n) {
  if (n.kind == NeckKind::none) return json{{"kind", "none"}};
  return json{{"kind", "fpn"}, {"in_low", n.in_low}, {"in_high", n.in_high},
              {"channels", n.channels}};
}

json to_json(const HeadConfig& h) {
  if (h.kind == HeadKind::cascade) return json{{"kind", "cascade"}, {"n", h.cascade_n}};
  return json{{"kind", std::string(head_kind_name(h.kind))}};
}

json to_json(const BackboneChoice& b) {
  if (const auto* id = std::get_if<BackboneId>(&b)) return json(std::string(backbone_id_name(*id)));
  return json{{"encoding", format_backbone_encoding(std::get<BackboneEncoding>(b))}};
}

json to_json(const StructuralConfig& cfg) {
  return json{{"backbone", to_json(cfg.backbone)},
              {"neck", to_json(cfg.neck)},
              {"rpn", std::string(rpn_kind_name(cfg.rpn))},
              {"head", to_json(cfg.head)},
              {"resolution", to_json(cfg.resolution)}};
}

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& msg) {
  throw std::runtime_error("config schema error at " + path + ": " + msg);
}

int require_int(const json& j, const char* key, const std::string& path) {
  if (!j.contains(key) || !j[key].is_number_integer())
    schema_error(path + "." + key, "expected integer");
  return j[key].get<int>();
}

}  // namespace

Resolution resolution_from_json(const json& j) {
  if (!j.is_object()) schema_error("resolution", "expected object");
  return Resolution{require_int(j, "width", "resolution"), require_int(j, "height", "resolution")};
}

NeckConfig neck_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind")) schema_error("neck", "expected object with kind");
  const std::string kind = j["kind"].get<std::string>();
  if (kind == "none") return NeckConfig{};
  if (kind != "fpn") schema_error("neck.kind", "expected 'none' or 'fpn'");
  return NeckConfig{NeckKind::fpn, require_int(j, "in_low", "neck"),
                    require_int(j, "in_high", "neck"), require_int(j, "channels", "neck")};
}

HeadConfig head_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind")) schema_error("head", "expected object with kind");
  const std::string kind = j["kind"].get<std::string>();
  if (kind == "fc2") return HeadConfig{HeadKind::fc2, 0};
  if (kind == "retina") return HeadConfig{HeadKind::retina, 0};
  if (kind == "cascade") return HeadConfig{HeadKind::cascade, require_int(j, "n", "head")};
  schema_error("head.kind", "expected 'fc2', 'retina' or 'cascade'");
}

BackboneChoice backbone_from_json(const json& j) {
  if (j.is_string()) {
    const auto id = backbone_id_from_name(j.get<std::string>());
    if (!id) schema_error("backbone", "unknown backbone name '" + j.get<std::string>() + "'");
    return *id;
  }
  if (j.is_object() && j.contains("encoding") && j["encoding"].is_string())
    return parse_backbone_encoding(j["encoding"].get<std::string>());
  schema_error("backbone", "expected backbone name or {\"encoding\": ...}");
}

StructuralConfig structural_from_json(const json& j) {
  if (!j.is_object()) schema_error("config", "expected object");
  for (const char* key : {"backbone", "neck", "rpn", "head", "resolution"})
    if (!j.contains(key)) schema_error(std::string("config.") + key, "missing field");
  StructuralConfig cfg;
  cfg.backbone = backbone_from_json(j["backbone"]);
  cfg.neck = neck_from_json(j["neck"]);
  const auto rpn = rpn_kind_from_name(j["rpn"].get<std::string>());
  if (!rpn) schema_error("config.rpn", "expected 'none', 'rpn' or 'ga_rpn'");
  cfg.rpn = *rpn;
  cfg.head = head_from_json(j["head"]);
  cfg.resolution = resolution_from_json(j["resolution"]);
  return cfg;
}

std::string config_identity(const StructuralConfig& cfg) { return to_json(cfg).dump(); }

// --- SpaceDefinition JSON ----------------------------------------------------

json SpaceDefinition::to_json() const {
  json backs = json::array();
  for (BackboneId b : backbones) backs.push_back(std::string(backbone_id_name(b)));
  json pairs = json::array();
  for (const auto& [lo, hi] : fpn_level_pairs) pairs.push_back(json::array({lo, hi}));
  json rpn_arr = json::array();
  for (RpnKind r : rpns) rpn_arr.push_back(std::string(rpn_kind_name(r)));
  json head_arr = json::array();
  for (HeadKind h : heads) head_arr.push_back(std::string(head_kind_name(h)));
  json res_arr = json::array();
  for (const Resolution& r : resolutions) res_arr.push_back(smnas::to_json(r));
  return json{{"backbones", backs},
              {"allow_no_neck", allow_no_neck},
              {"fpn_level_pairs", pairs},
              {"fpn_channels", fpn_channels},
              {"rpns", rpn_arr},
              {"heads", head_arr},
              {"cascade_stage_counts", cascade_stage_counts},
              {"resolutions", res_arr},
              {"modular_bases", modular_bases},
              {"modular_fpn_channels", modular_fpn_channels},
              {"max_depth", max_depth},
              {"max_doublings", max_doublings}};
}

SpaceDefinition SpaceDefinition::from_json(const json& j) {
  SpaceDefinition s = SpaceDefinition::defaults();
  if (!j.is_object()) schema_error("space", "expected object");
  if (j.contains("backbones")) {
    s.backbones.clear();
    for (const auto& b : j["backbones"]) {
      const auto id = backbone_id_from_name(b.get<std::string>());
      if (!id) schema_error("space.backbones", "unknown backbone '" + b.get<std::string>() + "'");
      s.backbones.push_back(*id);
    }
  }
  if (j.contains("allow_no_neck")) s.allow_no_neck = j["allow_no_neck"].get<bool>();
  if (j.contains("fpn_level_pairs")) {
    s.fpn_level_pairs.clear();
    for (const auto& p : j["fpn_level_pairs"]) {
      if (!p.is_array() || p.size() != 2) schema_error("space.fpn_level_pairs", "expected [lo, hi]");
      s.fpn_level_pairs.emplace_back(p[0].get<int>(), p[1].get<int>());
    }
  }
  if (j.contains("fpn_channels")) s.fpn_channels = j["fpn_channels"].get<std::vector<int>>();
  if (j.contains("rpns")) {
    s.rpns.clear();
    for (const auto& r : j["rpns"]) {
      const auto kind = rpn_kind_from_name(r.get<std::string>());
      if (!kind) schema_error("space.rpns", "unknown rpn kind");
      s.rpns.push_back(*kind);
    }
  }
  if (j.contains("heads")) {
    s.heads.clear();
    for (const auto& h : j["heads"]) {
      const std::string name = h.get<std::string>();
      if (name == "fc2") s.heads.push_back(HeadKind::fc2);
      else if (name == "retina") s.heads.push_back(HeadKind::retina);
      else if (name == "cascade") s.heads.push_back(HeadKind::cascade);
      else schema_error("space.heads", "unknown head kind '" + name + "'");
    }
  }
  if (j.contains("cascade_stage_counts"))
    s.cascade_stage_counts = j["cascade_stage_counts"].get<std::vector<int>>();
  if (j.contains("resolutions")) {
    s.resolutions.clear();
    for (const auto& r : j["resolutions"]) s.resolutions.push_back(resolution_from_json(r));
  }
  if (j.contains("modular_bases")) s.modular_bases = j["modular_bases"].get<std::vector<int>>();
  if (j.contains("modular_fpn_channels"))
    s.modular_fpn_channels = j["modular_fpn_channels"].get<std::vector<int>>();
  if (j.contains("max_depth")) s.max_depth = j["max_depth"].get<int>();
  if (j.contains("max_doublings")) s.max_doublings = j["max_doublings"].get<int>();

  if (s.backbones.empty() && s.modular_bases.empty())
    schema_error("space", "no backbones and no modular bases");
  if (s.max_depth <= 0 || s.max_doublings < 0) schema_error("space", "bounds must be positive");
  return s;
}

}  // namespace smnas
