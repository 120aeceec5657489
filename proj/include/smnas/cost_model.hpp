#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "smnas/arch_space.hpp"

namespace smnas {

// ---------------------------------------------------------------------------
// Analytical cost model.
//
// flops counts multiply-accumulate pairs (the convention under which
// ResNet18 at 224x224 comes out at ~1.81 GFLOPs); params counts conv weights
// plus batch-norm affine terms plus the classifier; mac counts element reads
// and writes plus weight reads per layer. Spatial sizes use ceiling division
// at every stride-2 layer.
//
// Encoded backbones: stage 1 is a fixed 3x3 stride-2 conv to 32 channels and
// the first layer of stage 2 is a 3x3 stride-2 conv from 32 to the base
// width; the four encoded stages then run at strides 4/8/16/32 with the
// first block of stages 3-5 carrying stride 2. Code 2 doubles the running
// width in its block (with a projection shortcut). Bottleneck blocks use
// inner width = running width and output 4x; xbottleneck uses inner width =
// 2x running width with 32-group 3x3 convs (stride on the 3x3); mbblock uses
// expansion 6 from the input width. Calibrated against the E0 reference
// backbone at 224x224.
// ---------------------------------------------------------------------------

struct CostProfile {
  double flops = 0;  // multiply-add pairs
  double params = 0;
  double mac = 0;  // element reads + writes + weight reads
  std::optional<double> latency_ms;

  double flops_g() const { return flops / 1e9; }
  double params_m() const { return params / 1e6; }
  double mac_m() const { return mac / 1e6; }

  CostProfile& operator+=(const CostProfile& o) {
    flops += o.flops;
    params += o.params;
    mac += o.mac;
    return *this;
  }
};

json to_json(const CostProfile& p);

// Whole classification network (trunk + global pool + 1000-way classifier),
// the convention behind published ImageNet-resolution tables.
CostProfile backbone_cost(const BackboneChoice& choice, Resolution res);

// Trunk only; what a detection pipeline actually runs.
CostProfile backbone_trunk_cost(const BackboneChoice& choice, Resolution res);

// Output channels of the four backbone stages (feature levels P1..P4).
std::array<int, 4> backbone_stage_channels(const BackboneChoice& choice);

struct LevelShape {
  int level = 0;  // 1..6
  int h = 0;
  int w = 0;
  int channels = 0;
};

// Spatial size of feature level `level` (stride 2^(level+1)) for an input.
LevelShape feature_level_shape(int level, Resolution res, int channels);

CostProfile neck_cost(const NeckConfig& neck, const std::array<int, 4>& backbone_channels,
                      Resolution res);

// Feature maps the proposal/dense stages run on: FPN outputs when a neck is
// present, otherwise the raw stride-32 backbone map.
std::vector<LevelShape> detection_feature_shapes(const StructuralConfig& cfg);

CostProfile rpn_cost(RpnKind kind, const std::vector<LevelShape>& features);

// fc2/cascade pool to 7x7xC and run two 1024-wide fully connected layers per
// proposal; cascade repeats per stage with roi_first proposals entering the
// first stage and roi_rest thereafter. retina runs dense per-level subnets
// and ignores the proposal counts.
CostProfile head_cost(const HeadConfig& head, const std::vector<LevelShape>& features,
                      int roi_first = 1000, int roi_rest = 100);

struct LatencyModel {
  double t0_ms = 2.0;
  double ms_per_gflop = 0.6;
  double ms_per_mega_access = 0.01;
  double neck_overhead_ms[2] = {0.0, 1.0};      // none, fpn
  double rpn_overhead_ms[3] = {0.0, 1.5, 2.5};  // none, rpn, ga_rpn
  double head_overhead_ms[3] = {1.0, 2.0, 3.0}; // fc2, retina, cascade

  static LatencyModel defaults() { return LatencyModel{}; }
  static LatencyModel from_json(const json& j);
  json to_json() const;
};

double estimate_latency(const CostProfile& profile, const StructuralConfig& cfg,
                        const LatencyModel& model);

// Componentwise sum of backbone trunk, neck, rpn and head at cfg.resolution,
// with latency_ms filled from the model.
CostProfile total_cost(const StructuralConfig& cfg,
                       const LatencyModel& model = LatencyModel::defaults());

// Stage-one candidates carry named backbones; stage-two evolves encodings of
// the same block family. This is the canonical transcription used to seed
// stage-two (mobilenetv2 is an approximate analog, since its width ladder is
// not a doubling ladder).
BackboneEncoding named_to_encoding(BackboneId id);

}  // namespace smnas
