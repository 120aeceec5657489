#include "smnas/cost_model.hpp"

#include <cmath>
#include <stdexcept>

namespace smnas {

namespace {

struct LayerSpec {
  enum class Op { conv, pool, gap, fc };
  Op op = Op::conv;
  int k = 1;
  int in_ch = 0;
  int out_ch = 0;
  int stride = 1;
  int groups = 1;
  bool bn = false;
  bool bias = false;
  bool starts_block = false;  // records the residual-block entry spatial size
  bool branch = false;        // shortcut: reads the block entry, cursor unchanged
};

struct NetSpec {
  std::vector<LayerSpec> layers;
  std::array<int, 4> level_channels{};  // P1..P4 outputs
  int out_ch = 0;
};

LayerSpec conv(int k, int in_ch, int out_ch, int stride = 1, int groups = 1, bool bn = true,
               bool bias = false) {
  return LayerSpec{LayerSpec::Op::conv, k, in_ch, out_ch, stride, groups, bn, bias, false, false};
}

LayerSpec block_entry(LayerSpec l) {
  l.starts_block = true;
  return l;
}

LayerSpec shortcut(LayerSpec l) {
  l.branch = true;
  return l;
}

int ceil_div(int a, int b) { return (a + b - 1) / b; }

CostProfile net_cost(const NetSpec& net, Resolution res) {
  CostProfile p;
  double h = res.height, w = res.width;
  double block_h = h, block_w = w;
  for (const LayerSpec& l : net.layers) {
    if (l.starts_block) {
      block_h = h;
      block_w = w;
    }
    const double ih = l.branch ? block_h : h;
    const double iw = l.branch ? block_w : w;
    const double in_els = ih * iw * l.in_ch;
    double oh = ih, ow = iw;
    if (l.stride > 1) {
      oh = ceil_div(static_cast<int>(ih), l.stride);
      ow = ceil_div(static_cast<int>(iw), l.stride);
    }
    switch (l.op) {
      case LayerSpec::Op::conv: {
        const double out_els = oh * ow * l.out_ch;
        const double weights =
            static_cast<double>(l.k) * l.k * l.in_ch * l.out_ch / l.groups;
        p.flops += out_els * (static_cast<double>(l.in_ch) / l.groups) * l.k * l.k;
        p.params += weights + (l.bn ? 2.0 * l.out_ch : 0.0) + (l.bias ? l.out_ch : 0.0);
        p.mac += in_els + out_els + weights;
        break;
      }
      case LayerSpec::Op::pool: {
        const double out_els = oh * ow * l.out_ch;
        p.mac += in_els + out_els;
        break;
      }
      case LayerSpec::Op::gap: {
        p.mac += in_els + l.out_ch;
        oh = ow = 1;
        break;
      }
      case LayerSpec::Op::fc: {
        const double weights = static_cast<double>(l.in_ch) * l.out_ch;
        p.flops += weights;
        p.params += weights + (l.bias ? l.out_ch : 0.0);
        p.mac += l.in_ch + l.out_ch + weights;
        oh = ow = 1;
        break;
      }
    }
    if (!l.branch) {
      h = oh;
      w = ow;
    }
  }
  return p;
}

void add_classifier(NetSpec& net) {
  net.layers.push_back(LayerSpec{LayerSpec::Op::gap, 0, net.out_ch, net.out_ch, 1, 1, false, false});
  net.layers.push_back(
      LayerSpec{LayerSpec::Op::fc, 1, net.out_ch, 1000, 1, 1, false, true});
}

// --- named ResNet / ResNeXt ---------------------------------------------------

struct ResnetShape {
  BlockKind block;
  std::array<int, 4> blocks;
  int width_mult;  // inner width = planes * width_mult (bottleneck family)
  int groups;
};

ResnetShape resnet_shape(BackboneId id) {
  switch (id) {
    case BackboneId::resnet18: return {BlockKind::basicblock, {2, 2, 2, 2}, 1, 1};
    case BackboneId::resnet34: return {BlockKind::basicblock, {3, 4, 6, 3}, 1, 1};
    case BackboneId::resnet50: return {BlockKind::bottleneck, {3, 4, 6, 3}, 1, 1};
    case BackboneId::resnet101: return {BlockKind::bottleneck, {3, 4, 23, 3}, 1, 1};
    // ResNeXt 32x4d: inner width = 2x planes; the 101 variant follows the
    // published 32x8d cost figures (inner width = 4x planes).
    case BackboneId::resnext50: return {BlockKind::xbottleneck, {3, 4, 6, 3}, 2, 32};
    case BackboneId::resnext101: return {BlockKind::xbottleneck, {3, 4, 23, 3}, 4, 32};
    default: throw std::logic_error("not a resnet family backbone");
  }
}

NetSpec build_resnet(BackboneId id) {
  const ResnetShape shape = resnet_shape(id);
  const bool basic = shape.block == BlockKind::basicblock;
  const int expansion = basic ? 1 : 4;

  NetSpec net;
  net.layers.push_back(conv(7, 3, 64, 2));
  net.layers.push_back(LayerSpec{LayerSpec::Op::pool, 3, 64, 64, 2, 1, false, false});

  int in_ch = 64;
  for (int stage = 0; stage < 4; ++stage) {
    const int planes = 64 << stage;
    const int out_ch = planes * expansion;
    const int stride = stage == 0 ? 1 : 2;
    for (int b = 0; b < shape.blocks[stage]; ++b) {
      const int s = b == 0 ? stride : 1;
      if (basic) {
        net.layers.push_back(block_entry(conv(3, in_ch, planes, s)));
        net.layers.push_back(conv(3, planes, planes));
      } else {
        const int inner = planes * shape.width_mult;
        net.layers.push_back(block_entry(conv(1, in_ch, inner)));
        net.layers.push_back(conv(3, inner, inner, s, shape.groups));
        net.layers.push_back(conv(1, inner, out_ch));
      }
      if (s != 1 || in_ch != out_ch) net.layers.push_back(shortcut(conv(1, in_ch, out_ch, s)));
      in_ch = out_ch;
    }
    net.level_channels[stage] = out_ch;
  }
  net.out_ch = in_ch;
  return net;
}

NetSpec build_mobilenet_v2() {
  // torchvision layout: t = expansion, c = output channels, n = repeats, s = stride
  struct Group { int t, c, n, s; };
  constexpr Group groups[] = {{1, 16, 1, 1}, {6, 24, 2, 2},  {6, 32, 3, 2}, {6, 64, 4, 2},
                              {6, 96, 3, 1}, {6, 160, 3, 2}, {6, 320, 1, 1}};
  NetSpec net;
  net.layers.push_back(conv(3, 3, 32, 2));
  int in_ch = 32;
  int stride_log2 = 1;
  for (const Group& g : groups) {
    for (int b = 0; b < g.n; ++b) {
      const int s = b == 0 ? g.s : 1;
      if (s == 2) ++stride_log2;
      const int hidden = in_ch * g.t;
      if (g.t != 1) net.layers.push_back(conv(1, in_ch, hidden));
      net.layers.push_back(conv(3, hidden, hidden, s, hidden));
      net.layers.push_back(conv(1, hidden, g.c));
      in_ch = g.c;
      if (stride_log2 >= 2 && stride_log2 <= 5) net.level_channels[stride_log2 - 2] = in_ch;
    }
  }
  net.layers.push_back(conv(1, in_ch, 1280));
  net.out_ch = 1280;
  return net;
}

// --- encoded backbones --------------------------------------------------------

NetSpec build_encoded(const BackboneEncoding& enc) {
  NetSpec net;
  net.layers.push_back(conv(3, 3, 32, 2));            // stage 1 stem
  net.layers.push_back(conv(3, 32, enc.base, 2));     // first layer of stage 2
  int in_ch = enc.base;
  int width = enc.base;
  for (int stage = 0; stage < 4; ++stage) {
    const int stage_stride = stage == 0 ? 1 : 2;
    for (std::size_t b = 0; b < enc.stages[stage].size(); ++b) {
      const int s = b == 0 ? stage_stride : 1;
      if (enc.stages[stage][b] == 2) width *= 2;
      int out_ch = width;
      switch (enc.block) {
        case BlockKind::basicblock:
          net.layers.push_back(block_entry(conv(3, in_ch, width, s)));
          net.layers.push_back(conv(3, width, width));
          break;
        case BlockKind::bottleneck:
          out_ch = 4 * width;
          net.layers.push_back(block_entry(conv(1, in_ch, width)));
          net.layers.push_back(conv(3, width, width, s));
          net.layers.push_back(conv(1, width, out_ch));
          break;
        case BlockKind::xbottleneck: {
          out_ch = 4 * width;
          const int inner = 2 * width;
          net.layers.push_back(block_entry(conv(1, in_ch, inner)));
          net.layers.push_back(conv(3, inner, inner, s, 32));
          net.layers.push_back(conv(1, inner, out_ch));
          break;
        }
        case BlockKind::mbblock: {
          const int hidden = 6 * in_ch;
          net.layers.push_back(block_entry(conv(1, in_ch, hidden)));
          net.layers.push_back(conv(3, hidden, hidden, s, hidden));
          net.layers.push_back(conv(1, hidden, width));
          break;
        }
      }
      const bool needs_proj =
          enc.block != BlockKind::mbblock && (s != 1 || in_ch != out_ch);
      if (needs_proj) net.layers.push_back(shortcut(conv(1, in_ch, out_ch, s)));
      in_ch = out_ch;
    }
    net.level_channels[stage] = in_ch;
  }
  net.out_ch = in_ch;
  return net;
}

NetSpec build_backbone(const BackboneChoice& choice) {
  if (const auto* enc = std::get_if<BackboneEncoding>(&choice)) return build_encoded(*enc);
  const BackboneId id = std::get<BackboneId>(choice);
  if (id == BackboneId::mobilenetv2) return build_mobilenet_v2();
  return build_resnet(id);
}

}  // namespace

json to_json(const CostProfile& p) {
  const auto round4 = [](double x) { return std::round(x * 1e4) / 1e4; };
  json j{{"flops_g", round4(p.flops_g())},
         {"params_m", round4(p.params_m())},
         {"mac_m", round4(p.mac_m())}};
  if (p.latency_ms) j["latency_ms"] = round4(*p.latency_ms);
  return j;
}

CostProfile backbone_cost(const BackboneChoice& choice, Resolution res) {
  NetSpec net = build_backbone(choice);
  add_classifier(net);
  return net_cost(net, res);
}

CostProfile backbone_trunk_cost(const BackboneChoice& choice, Resolution res) {
  return net_cost(build_backbone(choice), res);
}

std::array<int, 4> backbone_stage_channels(const BackboneChoice& choice) {
  return build_backbone(choice).level_channels;
}

LevelShape feature_level_shape(int level, Resolution res, int channels) {
  int h = res.height, w = res.width;
  for (int i = 0; i <= level; ++i) {
    h = ceil_div(h, 2);
    w = ceil_div(w, 2);
  }
  return LevelShape{level, h, w, channels};
}

CostProfile neck_cost(const NeckConfig& neck, const std::array<int, 4>& backbone_channels,
                      Resolution res) {
  CostProfile p;
  if (neck.kind == NeckKind::none) return p;
  const int c = neck.channels;

  const auto add_conv = [&](int k, int in_ch, int out_ch, const LevelShape& in,
                            const LevelShape& out) {
    const double out_els = static_cast<double>(out.h) * out.w * out_ch;
    const double weights = static_cast<double>(k) * k * in_ch * out_ch;
    p.flops += out_els * in_ch * k * k;
    p.params += weights + out_ch;  // conv bias
    p.mac += static_cast<double>(in.h) * in.w * in_ch + out_els + weights;
  };

  // Lateral 1x1 from each native backbone level plus a 3x3 output conv.
  for (int l = neck.in_low; l <= std::min(neck.in_high, 4); ++l) {
    const LevelShape shape = feature_level_shape(l, res, c);
    add_conv(1, backbone_channels[l - 1], c, shape, shape);
    add_conv(3, c, c, shape, shape);
    if (l > neck.in_low) {
      // top-down merge: upsampled add, element traffic only
      p.mac += 2.0 * shape.h * shape.w * c;
    }
  }
  // Extra levels beyond P4 come from stride-2 3x3 convs.
  for (int l = std::max(neck.in_low, 5); l <= neck.in_high; ++l) {
    const LevelShape out = feature_level_shape(l, res, c);
    const LevelShape in = feature_level_shape(l - 1, res, c);
    const int in_ch = (l == 5 && neck.in_low == 5) ? backbone_channels[3] : c;
    add_conv(3, in_ch, c, in, out);
  }
  return p;
}

std::vector<LevelShape> detection_feature_shapes(const StructuralConfig& cfg) {
  std::vector<LevelShape> shapes;
  if (cfg.neck.kind == NeckKind::fpn) {
    for (int l = cfg.neck.in_low; l <= cfg.neck.in_high; ++l)
      shapes.push_back(feature_level_shape(l, cfg.resolution, cfg.neck.channels));
  } else {
    const auto ch = backbone_stage_channels(cfg.backbone);
    shapes.push_back(feature_level_shape(4, cfg.resolution, ch[3]));
  }
  return shapes;
}

CostProfile rpn_cost(RpnKind kind, const std::vector<LevelShape>& features) {
  CostProfile p;
  if (kind == RpnKind::none || features.empty()) return p;
  constexpr int kAnchors = 3;

  // flops/mac accumulate per level; the conv weights are shared across levels
  // and counted once.
  const auto add_conv = [&](int k, int in_ch, int out_ch) {
    const double weights = static_cast<double>(k) * k * in_ch * out_ch;
    for (const LevelShape& f : features) {
      const double els = static_cast<double>(f.h) * f.w;
      p.flops += els * out_ch * in_ch * k * k;
      p.mac += els * in_ch + els * out_ch;
    }
    p.params += weights + out_ch;
    p.mac += weights;
  };
  const int c = features[0].channels;
  add_conv(3, c, c);
  add_conv(1, c, kAnchors);      // objectness
  add_conv(1, c, 4 * kAnchors);  // box deltas
  if (kind == RpnKind::ga_rpn) {
    add_conv(1, c, 1);  // anchor location
    add_conv(1, c, 2);  // anchor shape
  }
  return p;
}

CostProfile head_cost(const HeadConfig& head, const std::vector<LevelShape>& features,
                      int roi_first, int roi_rest) {
  CostProfile p;
  if (features.empty()) return p;
  const int c = features[0].channels;
  constexpr int kHidden = 1024;
  constexpr int kPooled = 7 * 7;

  const auto fc_stage = [&](double rois) {
    const double w1 = static_cast<double>(kPooled) * c * kHidden;
    const double w2 = static_cast<double>(kHidden) * kHidden;
    p.flops += rois * (w1 + w2);
    p.params += w1 + kHidden + w2 + kHidden;
    p.mac += rois * (static_cast<double>(kPooled) * c + 2.0 * kHidden) + w1 + w2;
  };

  switch (head.kind) {
    case HeadKind::fc2:
      fc_stage(roi_first);
      break;
    case HeadKind::cascade:
      for (int stage = 0; stage < head.cascade_n; ++stage)
        fc_stage(stage == 0 ? roi_first : roi_rest);
      break;
    case HeadKind::retina: {
      constexpr int kAnchors = 9;
      constexpr int kClasses = 80;
      // subnets are shared across levels: weights counted once, compute per level
      const auto add_conv = [&](int in_ch, int out_ch, int copies) {
        const double weights = 9.0 * in_ch * out_ch;
        for (const LevelShape& f : features) {
          const double els = static_cast<double>(f.h) * f.w;
          p.flops += copies * els * out_ch * in_ch * 9.0;
          p.mac += copies * (els * in_ch + els * out_ch);
        }
        p.params += copies * (weights + out_ch);
        p.mac += copies * weights;
      };
      add_conv(c, c, 8);  // class + box towers, 4 convs each
      add_conv(c, kAnchors * kClasses, 1);
      add_conv(c, kAnchors * 4, 1);
      break;
    }
  }
  return p;
}

LatencyModel LatencyModel::from_json(const json& j) {
  LatencyModel m;
  if (j.contains("t0_ms")) m.t0_ms = j["t0_ms"].get<double>();
  if (j.contains("ms_per_gflop")) m.ms_per_gflop = j["ms_per_gflop"].get<double>();
  if (j.contains("ms_per_mega_access"))
    m.ms_per_mega_access = j["ms_per_mega_access"].get<double>();
  if (j.contains("module_overhead_ms")) {
    const json& o = j["module_overhead_ms"];
    if (o.contains("neck")) {
      m.neck_overhead_ms[0] = o["neck"].value("none", m.neck_overhead_ms[0]);
      m.neck_overhead_ms[1] = o["neck"].value("fpn", m.neck_overhead_ms[1]);
    }
    if (o.contains("rpn")) {
      m.rpn_overhead_ms[0] = o["rpn"].value("none", m.rpn_overhead_ms[0]);
      m.rpn_overhead_ms[1] = o["rpn"].value("rpn", m.rpn_overhead_ms[1]);
      m.rpn_overhead_ms[2] = o["rpn"].value("ga_rpn", m.rpn_overhead_ms[2]);
    }
    if (o.contains("head")) {
      m.head_overhead_ms[0] = o["head"].value("fc2", m.head_overhead_ms[0]);
      m.head_overhead_ms[1] = o["head"].value("retina", m.head_overhead_ms[1]);
      m.head_overhead_ms[2] = o["head"].value("cascade", m.head_overhead_ms[2]);
    }
  }
  for (double v : {m.t0_ms, m.ms_per_gflop, m.ms_per_mega_access})
    if (!(v >= 0) || !std::isfinite(v))
      throw std::runtime_error("latency model coefficients must be finite and >= 0");
  return m;
}

json LatencyModel::to_json() const {
  return json{{"t0_ms", t0_ms},
              {"ms_per_gflop", ms_per_gflop},
              {"ms_per_mega_access", ms_per_mega_access},
              {"module_overhead_ms",
               json{{"neck", json{{"none", neck_overhead_ms[0]}, {"fpn", neck_overhead_ms[1]}}},
                    {"rpn", json{{"none", rpn_overhead_ms[0]},
                                 {"rpn", rpn_overhead_ms[1]},
                                 {"ga_rpn", rpn_overhead_ms[2]}}},
                    {"head", json{{"fc2", head_overhead_ms[0]},
                                  {"retina", head_overhead_ms[1]},
                                  {"cascade", head_overhead_ms[2]}}}}}};
}

double estimate_latency(const CostProfile& profile, const StructuralConfig& cfg,
                        const LatencyModel& model) {
  double ms = model.t0_ms + model.ms_per_gflop * profile.flops_g() +
              model.ms_per_mega_access * profile.mac_m();
  ms += model.neck_overhead_ms[static_cast<int>(cfg.neck.kind)];
  ms += model.rpn_overhead_ms[static_cast<int>(cfg.rpn)];
  ms += model.head_overhead_ms[static_cast<int>(cfg.head.kind)];
  return ms;
}

CostProfile total_cost(const StructuralConfig& cfg, const LatencyModel& model) {
  CostProfile p = backbone_trunk_cost(cfg.backbone, cfg.resolution);
  const auto channels = backbone_stage_channels(cfg.backbone);
  p += neck_cost(cfg.neck, channels, cfg.resolution);
  const auto features = detection_feature_shapes(cfg);
  p += rpn_cost(cfg.rpn, features);
  p += head_cost(cfg.head, features);
  p.latency_ms = estimate_latency(p, cfg, model);
  return p;
}

BackboneEncoding named_to_encoding(BackboneId id) {
  const auto make = [](BlockKind block, int base,
                       std::array<std::vector<std::uint8_t>, 4> stages) {
    BackboneEncoding e;
    e.block = block;
    e.base = base;
    e.stages = std::move(stages);
    return e;
  };
  const auto stage = [](int n_blocks, bool leading_double) {
    std::vector<std::uint8_t> s(static_cast<std::size_t>(n_blocks), std::uint8_t{1});
    if (leading_double) s[0] = 2;
    return s;
  };
  switch (id) {
    case BackboneId::resnet18:
      return make(BlockKind::basicblock, 64,
                  {stage(2, false), stage(2, true), stage(2, true), stage(2, true)});
    case BackboneId::resnet34:
      return make(BlockKind::basicblock, 64,
                  {stage(3, false), stage(4, true), stage(6, true), stage(3, true)});
    case BackboneId::resnet50:
      return make(BlockKind::bottleneck, 64,
                  {stage(3, false), stage(4, true), stage(6, true), stage(3, true)});
    case BackboneId::resnet101:
      return make(BlockKind::bottleneck, 64,
                  {stage(3, false), stage(4, true), stage(23, true), stage(3, true)});
    case BackboneId::resnext50:
      return make(BlockKind::xbottleneck, 64,
                  {stage(3, false), stage(4, true), stage(6, true), stage(3, true)});
    case BackboneId::resnext101:
      return make(BlockKind::xbottleneck, 64,
                  {stage(3, false), stage(4, true), stage(23, true), stage(3, true)});
    case BackboneId::mobilenetv2:
      return make(BlockKind::mbblock, 24,
                  {stage(2, false), stage(3, true), stage(7, true), stage(4, true)});
  }
  throw std::logic_error("unknown backbone id");
}

}  // namespace smnas
