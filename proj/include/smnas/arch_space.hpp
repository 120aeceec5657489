#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace smnas {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Backbone encodings
//
// Grammar (bit-exact):
//   encoding := block "_" base "_" stage "-" stage "-" stage "-" stage
//   block    := "basicblock" | "bottleneck" | "xbottleneck" | "mbblock"
//   base     := [1-9][0-9]*
//   stage    := [12]+
//
// The four stage groups cover resolution stages 2..5 (stage 1 is the fixed
// stem). Code 1 keeps the running width, code 2 doubles it in that block.
// The grammar is deliberately liberal: any positive base and any stage
// lengths parse; the searchable subset (base set, depth cap, doubling cap)
// is enforced by SpaceDefinition, not by the parser. Block names are
// case-insensitive on input and formatted lowercase.
// ---------------------------------------------------------------------------

enum class BlockKind { basicblock, bottleneck, xbottleneck, mbblock };

std::string_view block_kind_name(BlockKind k);
std::optional<BlockKind> block_kind_from_name(std::string_view name);

struct BackboneEncoding {
  BlockKind block = BlockKind::basicblock;
  int base = 64;
  std::array<std::vector<std::uint8_t>, 4> stages;  // codes, each 1 or 2

  int depth() const;      // total block count over all stages
  int doublings() const;  // total count of code 2

  bool operator==(const BackboneEncoding&) const = default;
};

struct EncodingParseError : std::runtime_error {
  EncodingParseError(std::size_t pos, const std::string& what)
      : std::runtime_error(what + " (at position " + std::to_string(pos) + ")"),
        position(pos) {}
  std::size_t position;
};

BackboneEncoding parse_backbone_encoding(std::string_view text);
std::string format_backbone_encoding(const BackboneEncoding& enc);

// Caps live outside the grammar; mutation and space validation use this.
bool encoding_within_caps(const BackboneEncoding& enc, int max_depth, int max_doublings);

// ---------------------------------------------------------------------------
// Structural (stage-one) configuration types
// ---------------------------------------------------------------------------

enum class BackboneId {
  resnet18,
  resnet34,
  resnet50,
  resnet101,
  resnext50,
  resnext101,
  mobilenetv2,
};

std::string_view backbone_id_name(BackboneId id);
std::optional<BackboneId> backbone_id_from_name(std::string_view name);

using BackboneChoice = std::variant<BackboneId, BackboneEncoding>;

BlockKind backbone_family(const BackboneChoice& choice);

enum class NeckKind { none, fpn };
enum class RpnKind { none, rpn, ga_rpn };
enum class HeadKind { fc2, retina, cascade };

std::string_view neck_kind_name(NeckKind k);
std::string_view rpn_kind_name(RpnKind k);
std::string_view head_kind_name(HeadKind k);
std::optional<RpnKind> rpn_kind_from_name(std::string_view name);

struct NeckConfig {
  NeckKind kind = NeckKind::none;
  int in_low = 0;    // feature level index, 1..6 (fpn only)
  int in_high = 0;   // feature level index, 1..6 (fpn only)
  int channels = 0;  // fpn output channels

  bool operator==(const NeckConfig&) const = default;
};

struct HeadConfig {
  HeadKind kind = HeadKind::fc2;
  int cascade_n = 0;  // 2..4, cascade only

  bool operator==(const HeadConfig&) const = default;
};

struct Resolution {
  int width = 0;
  int height = 0;

  long long area() const { return static_cast<long long>(width) * height; }
  bool operator==(const Resolution&) const = default;
};

struct StructuralConfig {
  BackboneChoice backbone = BackboneId::resnet50;
  NeckConfig neck;
  RpnKind rpn = RpnKind::rpn;
  HeadConfig head;
  Resolution resolution{800, 600};

  bool operator==(const StructuralConfig&) const = default;
};

// Native levels P1..P4 come from the backbone stages at strides 4/8/16/32;
// P5 and P6 are always derivable by extra downsampling.
std::set<int> derive_feature_levels(const BackboneChoice& choice);

// ---------------------------------------------------------------------------
// Search space definition
// ---------------------------------------------------------------------------

struct SpaceDefinition {
  // structural space
  std::vector<BackboneId> backbones;
  bool allow_no_neck = true;
  std::vector<std::pair<int, int>> fpn_level_pairs;  // contiguous [lo, hi], lo < hi
  std::vector<int> fpn_channels;
  std::vector<RpnKind> rpns;
  std::vector<HeadKind> heads;
  std::vector<int> cascade_stage_counts;
  std::vector<Resolution> resolutions;

  // modular (stage-two) bounds
  std::vector<int> modular_bases;
  std::vector<int> modular_fpn_channels;
  int max_depth = 40;
  int max_doublings = 4;

  static SpaceDefinition defaults();

  json to_json() const;
  static SpaceDefinition from_json(const json& j);
};

struct Violation {
  std::string field;
  std::string rule;
};

// Violations are values, not failures; an empty result means the config is
// valid under both the invariants and the space's allowed sets.
std::vector<Violation> validate_structural(const StructuralConfig& cfg,
                                           const SpaceDefinition& space);

// Yields every valid config exactly once, in deterministic nested order over
// (backbone, neck, rpn, head, resolution) as declared by the space.
std::vector<StructuralConfig> enumerate_structural(const SpaceDefinition& space);

// Combinatorial count; equals enumerate_structural(space).size().
std::uint64_t structural_cardinality(const SpaceDefinition& space);

// ---------------------------------------------------------------------------
// JSON serialization (documented schema, field names fixed)
// ---------------------------------------------------------------------------

json to_json(const Resolution& r);
json to_json(const NeckConfig& n);
json to_json(const HeadConfig& h);
json to_json(const BackboneChoice& b);
json to_json(const StructuralConfig& cfg);

Resolution resolution_from_json(const json& j);
NeckConfig neck_from_json(const json& j);
HeadConfig head_from_json(const json& j);
BackboneChoice backbone_from_json(const json& j);
StructuralConfig structural_from_json(const json& j);

// Canonical identity string (stable key ordering) used for deduplication.
std::string config_identity(const StructuralConfig& cfg);

}  // namespace smnas
