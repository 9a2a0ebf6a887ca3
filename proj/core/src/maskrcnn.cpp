#include "hedseg/maskrcnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>

#include "hedseg/error.hpp"
#include "hedseg/kv.hpp"
#include "hedseg/log.hpp"
#include "hedseg/rng.hpp"

namespace fs = std::filesystem;
namespace nn = torch::nn;
namespace F = torch::nn::functional;

namespace hedseg {
namespace {

constexpr const char* kDeepName = "deep_residual101_fpn";
constexpr const char* kToyName = "toy_residual18_fpn";

template <typename V>
void visit_fields(DetectorConfig& c, V&& v) {
  v("input_size", c.input_size);
  v("stem_width", c.stem_width);
  v("stage_widths", c.stage_widths);
  v("stage_blocks", c.stage_blocks);
  v("fpn_channels", c.fpn_channels);
  v("anchor_scales", c.anchor_scales);
  v("anchor_ratios", c.anchor_ratios);
  v("rpn_pos_iou", c.rpn_pos_iou);
  v("rpn_neg_iou", c.rpn_neg_iou);
  v("rpn_batch", c.rpn_batch);
  v("rpn_pos_fraction", c.rpn_pos_fraction);
  v("pre_nms_train", c.pre_nms_train);
  v("post_nms_train", c.post_nms_train);
  v("pre_nms_infer", c.pre_nms_infer);
  v("post_nms_infer", c.post_nms_infer);
  v("rpn_nms_iou", c.rpn_nms_iou);
  v("head_pos_iou", c.head_pos_iou);
  v("roi_batch", c.roi_batch);
  v("roi_pos_fraction", c.roi_pos_fraction);
  v("head_nms_iou", c.head_nms_iou);
  v("score_threshold", c.score_threshold);
  v("max_detections", c.max_detections);
  v("box_pool_size", c.box_pool_size);
  v("mask_pool_size", c.mask_pool_size);
  v("mask_head_size", c.mask_head_size);
  v("samples_per_bin", c.samples_per_bin);
  v("head_fc", c.head_fc);
  v("mask_convs", c.mask_convs);
  v("mask_channels", c.mask_channels);
  v("roi_canonical_size", c.roi_canonical_size);
  v("roi_canonical_level", c.roi_canonical_level);
  v("num_classes", c.num_classes);
  v("bbox_std", c.bbox_std);
  v("mask_threshold", c.mask_threshold);
  v("dice_eps", c.dice_eps);
}

int norm_groups(int channels) {
  int g = std::clamp(channels / 4, 1, 32);
  while (channels % g != 0) --g;
  return g;
}

nn::Conv2d conv(int in, int out, int k, int stride = 1) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, k).stride(stride).padding(k / 2).bias(false));
}

nn::GroupNorm gn(int ch) { return nn::GroupNorm(nn::GroupNormOptions(norm_groups(ch), ch)); }

// Residual block: basic (two 3x3) for the toy backbone, bottleneck
// (1x1, 3x3, 1x1 with 4x expansion) for the deep one.
class ResBlockImpl : public nn::Module {
 public:
  ResBlockImpl(int in, int out, int stride, bool bottleneck) {
    if (bottleneck) {
      const int mid = std::max(1, out / 4);
      body_ = register_module("body", nn::Sequential(conv(in, mid, 1), gn(mid), nn::ReLU(true), conv(mid, mid, 3, stride),
                                                       gn(mid), nn::ReLU(true), conv(mid, out, 1), gn(out)));
    } else {
      body_ = register_module("body", nn::Sequential(conv(in, out, 3, stride), gn(out), nn::ReLU(true),
                                                       conv(out, out, 3), gn(out)));
    }
    if (in != out || stride != 1) {
      shortcut_ = register_module("shortcut", nn::Sequential(conv(in, out, 1, stride), gn(out)));
    }
  }

  torch::Tensor forward(const torch::Tensor& x) {
    auto y = body_->forward(x);
    y = y + (shortcut_ ? shortcut_->forward(x) : x);
    return torch::relu(y);
  }

 private:
  nn::Sequential body_{nullptr};
  nn::Sequential shortcut_{nullptr};
};
TORCH_MODULE(ResBlock);

// Per-axis sample positions and bilinear weights, using the same boundary
// rule as the torch-free roi_align.
struct AxisSamples {
  torch::Tensor lo, hi;  // int64 [R, n]
  torch::Tensor w_lo, w_hi;  // float [R, n], zero for samples outside the map
};

AxisSamples axis_samples(const torch::Tensor& start, const torch::Tensor& extent, int out, int s, int64_t size) {
  const auto r = start.size(0);
  const auto steps = (torch::arange(out * s, torch::kDouble).div(s).floor() +
                      (torch::arange(out * s, torch::kDouble).remainder(s) + 0.5) / s)
                         .unsqueeze(0);  // bin index + sub-sample fraction
  auto pos = start.unsqueeze(1) + steps * (extent / out).unsqueeze(1);  // [R, n]
  const auto outside = (pos < -1.0).logical_or(pos > static_cast<double>(size));
  pos = pos.clamp_min(0.0);
  auto lo = pos.floor().to(torch::kLong);
  const auto at_edge = lo >= size - 1;
  lo = torch::where(at_edge, torch::full_like(lo, size - 1), lo);
  auto hi = torch::where(at_edge, lo, lo + 1);
  pos = torch::where(at_edge, lo.to(torch::kDouble), pos);
  auto frac = pos - lo.to(torch::kDouble);
  auto inside = outside.logical_not().to(torch::kDouble);
  (void)r;
  return {lo, hi, ((1.0 - frac) * inside).to(torch::kFloat), (frac * inside).to(torch::kFloat)};
}

std::vector<std::size_t> top_indices(const std::vector<double>& scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
  idx.resize(k);
  return idx;
}

void partial_shuffle(std::vector<int64_t>& v, std::size_t k, Rng& rng) {
  k = std::min(k, v.size());
  for (std::size_t i = 0; i < k; ++i) std::swap(v[i], v[i + rng.below(v.size() - i)]);
  v.resize(k);
}

struct TrainingTargets {
  torch::Tensor input;
  std::vector<Box> gt;
  torch::Tensor gt_mask;  // [1, S, S] in the letterboxed frame
};

TrainingTargets prepare(const MaskRcnnImpl& model, const SegSample& s) {
  const auto& cfg = model.config();
  const auto lb = Letterbox::fit(s.plane.rows(), s.plane.cols(), cfg.input_size);
  TrainingTargets t;
  t.input = detector_input(s.plane, lb);
  const Mask m = lb.apply(s.mask);
  if (const auto box = tight_box(m)) t.gt.push_back(*box);
  t.gt_mask = torch::empty({1, m.rows(), m.cols()}, torch::kFloat);
  auto* p = t.gt_mask.data_ptr<float>();
  for (std::size_t i = 0; i < m.size(); ++i) p[i] = m[i] ? 1.0f : 0.0f;
  return t;
}

torch::Tensor deltas_tensor(const std::vector<BoxDeltas>& d, const std::array<double, 4>& std_dev) {
  auto t = torch::zeros({static_cast<int64_t>(d.size()), 4}, torch::kFloat);
  auto a = t.accessor<float, 2>();
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (int k = 0; k < 4; ++k) a[i][k] = static_cast<float>(d[i][k] / std_dev[k]);
  }
  return t;
}

LossTerms compute_loss(MaskRcnnImpl& model, const TrainingTargets& t, std::uint64_t seed) {
  const auto& cfg = model.config();
  Rng rng(seed);
  const auto feats = model.features(t.input);
  auto [rpn_logits, rpn_deltas] = model.rpn(feats);
  const auto& anchors = model.anchors();

  // RPN sampling.
  const auto match = match_anchors(anchors, t.gt, cfg.rpn_pos_iou, cfg.rpn_neg_iou);
  std::vector<int64_t> pos, neg;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    if (match.labels[i] == AnchorLabel::Positive) pos.push_back(static_cast<int64_t>(i));
    if (match.labels[i] == AnchorLabel::Negative) neg.push_back(static_cast<int64_t>(i));
  }
  partial_shuffle(pos, static_cast<std::size_t>(cfg.rpn_batch * cfg.rpn_pos_fraction), rng);
  partial_shuffle(neg, static_cast<std::size_t>(cfg.rpn_batch) - pos.size(), rng);
  auto rpn_labels = torch::full({static_cast<int64_t>(anchors.size())}, -1, torch::kLong);
  for (auto i : pos) rpn_labels[i] = 1;
  for (auto i : neg) rpn_labels[i] = 0;
  const std::array<double, 4> unit{1.0, 1.0, 1.0, 1.0};
  const auto rpn_targets = deltas_tensor(match.targets, unit);

  // RoI sampling from proposals plus the ground truth boxes.
  auto rois = generate_proposals(rpn_logits.detach(), rpn_deltas.detach(), anchors, cfg, cfg.pre_nms_train,
                                 cfg.post_nms_train);
  rois.insert(rois.end(), t.gt.begin(), t.gt.end());
  std::vector<int64_t> roi_pos, roi_neg;
  std::vector<int> roi_gt(rois.size(), -1);
  for (std::size_t i = 0; i < rois.size(); ++i) {
    double best = 0.0;
    for (std::size_t g = 0; g < t.gt.size(); ++g) {
      const double v = iou(rois[i], t.gt[g]);
      if (v > best) {
        best = v;
        roi_gt[i] = static_cast<int>(g);
      }
    }
    (best >= cfg.head_pos_iou ? roi_pos : roi_neg).push_back(static_cast<int64_t>(i));
  }
  partial_shuffle(roi_pos, static_cast<std::size_t>(cfg.roi_batch * cfg.roi_pos_fraction), rng);
  partial_shuffle(roi_neg, static_cast<std::size_t>(cfg.roi_batch) - roi_pos.size(), rng);

  std::vector<Box> sampled;
  std::vector<int64_t> labels;
  std::vector<BoxDeltas> targets;
  for (auto i : roi_pos) {
    sampled.push_back(rois[i]);
    labels.push_back(kLiverClass);
    targets.push_back(encode_deltas(t.gt[roi_gt[i]], rois[i]));
  }
  for (auto i : roi_neg) {
    sampled.push_back(rois[i]);
    labels.push_back(kBackgroundClass);
    targets.push_back(BoxDeltas{});
  }

  HeadOutputs out;
  LossTargets tg;
  out.rpn_logits = rpn_logits;
  out.rpn_deltas = rpn_deltas;
  tg.rpn_labels = rpn_labels;
  tg.rpn_deltas = rpn_targets;
  if (!sampled.empty()) {
    std::tie(out.cls_logits, out.box_deltas) = model.box_head(model.pool(feats, sampled, cfg.box_pool_size));
    tg.roi_labels = torch::tensor(labels, torch::kLong);
    tg.roi_deltas = deltas_tensor(targets, cfg.bbox_std);
  }
  if (!roi_pos.empty()) {
    const std::vector<Box> pos_boxes(sampled.begin(), sampled.begin() + static_cast<std::ptrdiff_t>(roi_pos.size()));
    out.mask_logits = model.mask_head(model.pool(feats, pos_boxes, cfg.mask_pool_size));
    const auto m = roi_align(t.gt_mask, boxes_to_tensor(pos_boxes), cfg.mask_head_size, cfg.samples_per_bin, 1.0);
    tg.mask_targets = (m.squeeze(1) >= 0.5).to(torch::kFloat);
    tg.mask_labels = torch::full({static_cast<int64_t>(pos_boxes.size())}, kLiverClass, torch::kLong);
  }
  return multitask_loss(out, tg, LossOptions{cfg.dice_eps, 1.0});
}

void save_checkpoint(MaskRcnn& model, torch::optim::Adam* optimizer, int next_epoch, int best_epoch, double best_val,
                     const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  torch::serialize::OutputArchive archive;
  model->save(archive);
  if (optimizer != nullptr) {
    torch::serialize::OutputArchive opt;
    optimizer->save(opt);
    archive.write("optimizer", opt);
  }
  archive.write("epoch", torch::tensor(static_cast<int64_t>(next_epoch)));
  archive.write("best_epoch", torch::tensor(static_cast<int64_t>(best_epoch)));
  archive.write("best_val", torch::tensor(best_val, torch::kDouble));
  archive.write("detector_config", c10::IValue(model->config().serialize()));
  archive.save_to(path.string());
}

LossBreakdown mean_of(const std::vector<LossBreakdown>& v) {
  if (v.empty()) return {};
  double c = 0, b = 0, m = 0;
  for (const auto& x : v) {
    c += x.l_cls;
    b += x.l_box;
    m += x.l_mask;
  }
  const double n = static_cast<double>(v.size());
  return LossBreakdown::from_terms(c / n, b / n, m / n);
}

}  // namespace

DetectorConfig DetectorConfig::toy(int input_size) {
  DetectorConfig c;
  c.backbone = Backbone::ToyResidual18Fpn;
  c.input_size = input_size;
  c.stem_width = 16;
  c.stage_widths = {16, 32, 48, 64};
  c.stage_blocks = {1, 1, 1, 1};
  c.fpn_channels = 32;
  const double k = input_size / 512.0;
  c.anchor_scales = {32 * k, 64 * k, 128 * k, 256 * k, 512 * k};
  c.rpn_batch = 64;
  c.pre_nms_train = 600;
  c.post_nms_train = 128;
  c.pre_nms_infer = 300;
  c.post_nms_infer = 50;
  c.roi_batch = 32;
  c.head_fc = 128;
  c.mask_convs = 2;
  c.mask_channels = 32;
  c.max_detections = 10;
  return c;
}

void DetectorConfig::validate() const {
  if (input_size < 64 || input_size % kFpnStrides.back() != 0) {
    throw Error("invalid_config", "detector input size must be a positive multiple of 64");
  }
  if (stage_widths.size() != 4 || stage_blocks.size() != 4) {
    throw Error("invalid_config", "detector backbone needs four stages");
  }
  for (std::size_t i = 0; i < 4; ++i) {
    if (stage_widths[i] < 1 || stage_blocks[i] < 1) throw Error("invalid_config", "stage widths and blocks must be >= 1");
  }
  if (stem_width < 1 || fpn_channels < 1 || head_fc < 1 || mask_channels < 1 || mask_convs < 0) {
    throw Error("invalid_config", "detector widths must be positive");
  }
  if (anchor_scales.size() != kFpnStrides.size()) throw Error("invalid_config", "need one anchor scale per FPN level");
  if (anchor_ratios.empty()) throw Error("invalid_config", "anchor ratios must not be empty");
  for (double r : anchor_ratios) {
    if (!(r > 0.0)) throw Error("invalid_config", "anchor ratios must be positive");
  }
  if (!(rpn_neg_iou <= rpn_pos_iou)) throw Error("invalid_config", "rpn negative IoU must not exceed positive IoU");
  if (num_classes < 2) throw Error("invalid_config", "need at least background and one object class");
  if (mask_head_size != 2 * mask_pool_size) throw Error("invalid_config", "mask head size must be twice the mask pool size");
  if (score_threshold < 0.0 || score_threshold > 1.0) throw Error("invalid_config", "score threshold must be in [0, 1]");
  if (!(dice_eps > 0.0)) throw Error("invalid_config", "dice epsilon must be positive");
  if (roi_canonical_level < 2 || roi_canonical_level > 5) throw Error("invalid_config", "canonical level must be in [2, 5]");
}

std::vector<AnchorLevel> DetectorConfig::anchor_levels() const {
  std::vector<AnchorLevel> levels;
  for (std::size_t i = 0; i < kFpnStrides.size(); ++i) levels.push_back({kFpnStrides[i], {anchor_scales[i]}});
  return levels;
}

std::string DetectorConfig::serialize() const {
  kv::Document doc;
  doc.set("backbone", backbone == Backbone::ToyResidual18Fpn ? kToyName : kDeepName);
  DetectorConfig copy = *this;
  visit_fields(copy, kv::Writer{doc, ""});
  return doc.dump();
}

DetectorConfig DetectorConfig::deserialize(const std::string& text) {
  const auto doc = kv::Document::parse(text);
  DetectorConfig c;
  if (doc.contains("backbone")) {
    const auto& b = doc.at("backbone");
    if (b == kToyName) {
      c = toy();
    } else if (b != kDeepName) {
      throw Error("invalid_config", "unknown detector backbone '" + b + "'");
    }
  }
  visit_fields(c, kv::Reader{doc, ""});
  return c;
}

torch::Tensor boxes_to_tensor(std::span<const Box> boxes) {
  auto t = torch::empty({static_cast<int64_t>(boxes.size()), 4}, torch::kDouble);
  auto a = t.accessor<double, 2>();
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    a[i][0] = boxes[i].x1;
    a[i][1] = boxes[i].y1;
    a[i][2] = boxes[i].x2;
    a[i][3] = boxes[i].y2;
  }
  return t;
}

torch::Tensor roi_align(const torch::Tensor& feature, const torch::Tensor& boxes, int output_size, int samples_per_bin,
                        double spatial_scale) {
  if (feature.dim() != 3) throw Error("shape_mismatch", "roi_align: feature must be [C, H, W]");
  if (boxes.dim() != 2 || boxes.size(1) != 4) throw Error("shape_mismatch", "roi_align: boxes must be [R, 4]");
  const auto c = feature.size(0), h = feature.size(1), w = feature.size(2);
  const auto r = boxes.size(0);
  const int n = output_size * samples_per_bin;
  if (r == 0) return torch::zeros({0, c, output_size, output_size}, feature.options());
  const auto b = boxes.to(torch::kDouble) * spatial_scale;
  const auto ys = axis_samples(b.select(1, 1) - 0.5, b.select(1, 3) - b.select(1, 1), output_size, samples_per_bin, h);
  const auto xs = axis_samples(b.select(1, 0) - 0.5, b.select(1, 2) - b.select(1, 0), output_size, samples_per_bin, w);

  const auto gather = [&](const torch::Tensor& yi, const torch::Tensor& xi) {
    // [C, R, n, n]
    return feature.index({torch::indexing::Slice(), yi.unsqueeze(2), xi.unsqueeze(1)});
  };
  const auto wy_lo = ys.w_lo.unsqueeze(2), wy_hi = ys.w_hi.unsqueeze(2);
  const auto wx_lo = xs.w_lo.unsqueeze(1), wx_hi = xs.w_hi.unsqueeze(1);
  const auto opts = feature.dtype();
  auto v = gather(ys.lo, xs.lo) * (wy_lo * wx_lo).to(opts) + gather(ys.lo, xs.hi) * (wy_lo * wx_hi).to(opts) +
           gather(ys.hi, xs.lo) * (wy_hi * wx_lo).to(opts) + gather(ys.hi, xs.hi) * (wy_hi * wx_hi).to(opts);
  v = v.view({c, r, output_size, samples_per_bin, output_size, samples_per_bin}).mean({3, 5});
  (void)n;
  return v.permute({1, 0, 2, 3}).contiguous();
}

MaskRcnnImpl::MaskRcnnImpl(const DetectorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const bool bottleneck = cfg_.backbone == Backbone::DeepResidual101Fpn;
  stem_ = register_module("stem", nn::Sequential(conv(3, cfg_.stem_width, 7, 2), gn(cfg_.stem_width), nn::ReLU(true),
                                                   nn::MaxPool2d(nn::MaxPool2dOptions(3).stride(2).padding(1))));
  int in = cfg_.stem_width;
  for (int s = 0; s < 4; ++s) {
    nn::Sequential stage;
    for (int b = 0; b < cfg_.stage_blocks[s]; ++b) {
      const int stride = (b == 0 && s > 0) ? 2 : 1;
      stage->push_back(ResBlock(in, cfg_.stage_widths[s], stride, bottleneck));
      in = cfg_.stage_widths[s];
    }
    stages_.push_back(register_module("stage" + std::to_string(s + 1), stage));
    lateral_.push_back(register_module("lateral" + std::to_string(s + 2),
                                       nn::Conv2d(nn::Conv2dOptions(in, cfg_.fpn_channels, 1))));
    smooth_.push_back(register_module("smooth" + std::to_string(s + 2),
                                      nn::Conv2d(nn::Conv2dOptions(cfg_.fpn_channels, cfg_.fpn_channels, 3).padding(1))));
  }

  const int f = cfg_.fpn_channels;
  const int per_cell = static_cast<int>(cfg_.anchor_ratios.size());
  rpn_conv_ = register_module("rpn_conv", nn::Conv2d(nn::Conv2dOptions(f, f, 3).padding(1)));
  rpn_cls_ = register_module("rpn_cls", nn::Conv2d(nn::Conv2dOptions(f, per_cell, 1)));
  rpn_box_ = register_module("rpn_box", nn::Conv2d(nn::Conv2dOptions(f, 4 * per_cell, 1)));

  const int pooled = f * cfg_.box_pool_size * cfg_.box_pool_size;
  fc1_ = register_module("fc1", nn::Linear(pooled, cfg_.head_fc));
  fc2_ = register_module("fc2", nn::Linear(cfg_.head_fc, cfg_.head_fc));
  cls_ = register_module("cls", nn::Linear(cfg_.head_fc, cfg_.num_classes));
  bbox_ = register_module("bbox", nn::Linear(cfg_.head_fc, 4 * cfg_.num_classes));

  mask_convs_ = nn::Sequential();
  int mc = f;
  for (int i = 0; i < cfg_.mask_convs; ++i) {
    mask_convs_->push_back(nn::Conv2d(nn::Conv2dOptions(mc, cfg_.mask_channels, 3).padding(1)));
    mask_convs_->push_back(nn::ReLU(true));
    mc = cfg_.mask_channels;
  }
  if (cfg_.mask_convs == 0) mask_convs_->push_back(nn::Identity());
  register_module("mask_convs", mask_convs_);
  mask_up_ = register_module("mask_up", nn::ConvTranspose2d(nn::ConvTranspose2dOptions(mc, cfg_.mask_channels, 2).stride(2)));
  mask_out_ = register_module("mask_out", nn::Conv2d(nn::Conv2dOptions(cfg_.mask_channels, cfg_.num_classes, 1)));

  torch::NoGradGuard guard;
  for (auto* c : {&rpn_conv_, &rpn_cls_, &rpn_box_}) {
    nn::init::normal_((*c)->weight, 0.0, 0.01);
    nn::init::zeros_((*c)->bias);
  }
  nn::init::normal_(cls_->weight, 0.0, 0.01);
  nn::init::zeros_(cls_->bias);
  nn::init::normal_(bbox_->weight, 0.0, 0.001);
  nn::init::zeros_(bbox_->bias);

  anchors_ = generate_anchors(cfg_.input_size, cfg_.input_size, cfg_.anchor_levels(), cfg_.anchor_ratios);
}

std::vector<torch::Tensor> MaskRcnnImpl::features(const torch::Tensor& x) {
  std::vector<torch::Tensor> c;
  auto y = stem_->forward(x);
  for (auto& stage : stages_) {
    y = stage->forward(y);
    c.push_back(y);
  }
  std::vector<torch::Tensor> p(4);
  p[3] = lateral_[3]->forward(c[3]);
  for (int i = 2; i >= 0; --i) {
    const auto lat = lateral_[i]->forward(c[i]);
    p[i] = lat + F::interpolate(p[i + 1], F::InterpolateFuncOptions()
                                              .size(std::vector<int64_t>{lat.size(2), lat.size(3)})
                                              .mode(torch::kNearest));
  }
  std::vector<torch::Tensor> out;
  for (int i = 0; i < 4; ++i) out.push_back(smooth_[i]->forward(p[i]));
  out.push_back(F::max_pool2d(out[3], F::MaxPool2dFuncOptions(1).stride(2)));
  return out;
}

std::pair<torch::Tensor, torch::Tensor> MaskRcnnImpl::rpn(const std::vector<torch::Tensor>& feats) {
  const auto per_cell = static_cast<int64_t>(cfg_.anchor_ratios.size());
  std::vector<torch::Tensor> logits, deltas;
  for (const auto& f : feats) {
    const auto t = torch::relu(rpn_conv_->forward(f));
    const auto h = t.size(2), w = t.size(3);
    logits.push_back(rpn_cls_->forward(t).permute({0, 2, 3, 1}).reshape({-1}));
    deltas.push_back(rpn_box_->forward(t).view({1, per_cell, 4, h, w}).permute({0, 3, 4, 1, 2}).reshape({-1, 4}));
  }
  return {torch::cat(logits), torch::cat(deltas)};
}

torch::Tensor MaskRcnnImpl::pool(const std::vector<torch::Tensor>& feats, std::span<const Box> boxes, int output_size) {
  const int64_t f = cfg_.fpn_channels;
  if (boxes.empty()) return torch::zeros({0, f, output_size, output_size});
  std::array<std::vector<Box>, 4> by_level;
  std::array<std::vector<int64_t>, 4> index;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const double side = std::sqrt(std::max(boxes[i].area(), 1e-6));
    int k = static_cast<int>(std::floor(cfg_.roi_canonical_level + std::log2(side / cfg_.roi_canonical_size)));
    k = std::clamp(k, 2, 5);
    by_level[k - 2].push_back(boxes[i]);
    index[k - 2].push_back(static_cast<int64_t>(i));
  }
  std::vector<torch::Tensor> parts;
  std::vector<int64_t> order;
  for (int l = 0; l < 4; ++l) {
    if (by_level[l].empty()) continue;
    parts.push_back(roi_align(feats[l][0], boxes_to_tensor(by_level[l]), output_size, cfg_.samples_per_bin,
                              1.0 / DetectorConfig::kFpnStrides[l]));
    order.insert(order.end(), index[l].begin(), index[l].end());
  }
  const auto inverse = torch::argsort(torch::tensor(order, torch::kLong));
  return torch::cat(parts).index_select(0, inverse);
}

std::pair<torch::Tensor, torch::Tensor> MaskRcnnImpl::box_head(const torch::Tensor& pooled) {
  auto x = pooled.flatten(1);
  x = torch::relu(fc1_->forward(x));
  x = torch::relu(fc2_->forward(x));
  return {cls_->forward(x), bbox_->forward(x).view({-1, cfg_.num_classes, 4})};
}

torch::Tensor MaskRcnnImpl::mask_head(const torch::Tensor& pooled) {
  auto x = mask_convs_->forward(pooled);
  x = torch::relu(mask_up_->forward(x));
  return mask_out_->forward(x);
}

MaskRcnn build_detector(const DetectorConfig& cfg) { return MaskRcnn(cfg); }

torch::Tensor detector_input(const Image& plane, const Letterbox& lb) {
  const Image boxed = lb.apply(plane);
  auto t = torch::from_blob(const_cast<float*>(boxed.data()), {1, 1, boxed.rows(), boxed.cols()}, torch::kFloat).clone();
  return t.expand({1, 3, boxed.rows(), boxed.cols()}).contiguous();
}

std::vector<Box> generate_proposals(const torch::Tensor& logits, const torch::Tensor& deltas,
                                    std::span<const Box> anchors, const DetectorConfig& cfg, int pre_nms, int post_nms) {
  if (logits.numel() != static_cast<int64_t>(anchors.size())) {
    throw Error("shape_mismatch", "generate_proposals: logits do not match anchors");
  }
  const auto l = logits.detach().to(torch::kDouble).contiguous();
  const auto d = deltas.detach().to(torch::kDouble).contiguous();
  const double* lp = l.data_ptr<double>();
  const double* dp = d.data_ptr<double>();
  const std::vector<double> raw(lp, lp + l.numel());
  std::vector<Box> boxes;
  std::vector<double> scores;
  for (std::size_t i : top_indices(raw, static_cast<std::size_t>(std::max(pre_nms, 0)))) {
    const BoxDeltas dd{dp[4 * i], dp[4 * i + 1], dp[4 * i + 2], dp[4 * i + 3]};
    const Box b = clip_box(decode_deltas(dd, anchors[i]), cfg.input_size, cfg.input_size);
    if (b.width() < 1.0 || b.height() < 1.0) continue;
    boxes.push_back(b);
    scores.push_back(raw[i]);
  }
  std::vector<Box> out;
  for (std::size_t k : nms(boxes, scores, cfg.rpn_nms_iou)) {
    if (static_cast<int>(out.size()) >= post_nms) break;
    out.push_back(boxes[k]);
  }
  return out;
}

Mask paste_mask(const torch::Tensor& probs, const Box& box, int rows, int cols, double threshold) {
  Mask out(rows, cols, 0);
  if (!box.valid()) return out;
  const auto p = probs.detach().to(torch::kDouble).contiguous();
  const int m = static_cast<int>(p.size(-1));
  const double* v = p.data_ptr<double>();
  const auto at = [&](int y, int x) { return v[static_cast<std::size_t>(y) * m + x]; };
  const int r0 = std::max(0, static_cast<int>(std::floor(box.y1)));
  const int r1 = std::min(rows, static_cast<int>(std::ceil(box.y2)));
  const int c0 = std::max(0, static_cast<int>(std::floor(box.x1)));
  const int c1 = std::min(cols, static_cast<int>(std::ceil(box.x2)));
  for (int r = r0; r < r1; ++r) {
    const double py = r + 0.5;
    if (py < box.y1 || py >= box.y2) continue;
    const double u = std::clamp((py - box.y1) / box.height() * m - 0.5, 0.0, m - 1.0);
    const int y0 = static_cast<int>(u);
    const int y1 = std::min(y0 + 1, m - 1);
    const double fy = u - y0;
    for (int c = c0; c < c1; ++c) {
      const double px = c + 0.5;
      if (px < box.x1 || px >= box.x2) continue;
      const double w = std::clamp((px - box.x1) / box.width() * m - 0.5, 0.0, m - 1.0);
      const int x0 = static_cast<int>(w);
      const int x1 = std::min(x0 + 1, m - 1);
      const double fx = w - x0;
      const double val = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) + fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
      out(r, c) = val >= threshold ? 1 : 0;
    }
  }
  return out;
}

std::vector<InstanceDetection> detect(MaskRcnn& model, const FusedSample& fused, const DetectorConfig& cfg) {
  torch::NoGradGuard guard;
  const Image& plane = fused.plane;
  const auto lb = Letterbox::fit(plane.rows(), plane.cols(), cfg.input_size);
  const auto feats = model->features(detector_input(plane, lb));
  const auto [logits, deltas] = model->rpn(feats);
  const auto proposals = generate_proposals(logits, deltas, model->anchors(), cfg, cfg.pre_nms_infer, cfg.post_nms_infer);
  if (proposals.empty()) return {};

  const auto [cls_logits, box_deltas] = model->box_head(model->pool(feats, proposals, cfg.box_pool_size));
  const auto probs = torch::softmax(cls_logits, 1).to(torch::kDouble).contiguous();
  const auto bd = box_deltas.to(torch::kDouble).contiguous();
  const auto pa = probs.accessor<double, 2>();
  const auto da = bd.accessor<double, 3>();

  struct Candidate {
    Box box;
    int cls;
    double score;
  };
  std::vector<Candidate> kept;
  for (int c = 1; c < cfg.num_classes; ++c) {
    std::vector<Box> boxes;
    std::vector<double> scores;
    for (std::size_t r = 0; r < proposals.size(); ++r) {
      const double s = pa[r][c];
      if (!(s > cfg.score_threshold)) continue;
      BoxDeltas d;
      for (int k = 0; k < 4; ++k) d[k] = da[r][c][k] * cfg.bbox_std[k];
      const Box b = clip_box(decode_deltas(d, proposals[r]), lb.content_rows, lb.content_cols);
      if (!b.valid()) continue;
      boxes.push_back(b);
      scores.push_back(s);
    }
    for (std::size_t k : nms(boxes, scores, cfg.head_nms_iou)) kept.push_back({boxes[k], c, scores[k]});
  }
  std::stable_sort(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
  if (static_cast<int>(kept.size()) > cfg.max_detections) kept.resize(static_cast<std::size_t>(cfg.max_detections));
  if (kept.empty()) return {};

  std::vector<Box> boxes;
  for (const auto& k : kept) boxes.push_back(k.box);
  const auto mask_probs = torch::sigmoid(model->mask_head(model->pool(feats, boxes, cfg.mask_pool_size)));
  std::vector<InstanceDetection> out;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const Box native{kept[i].box.x1 / lb.scale, kept[i].box.y1 / lb.scale, kept[i].box.x2 / lb.scale,
                     kept[i].box.y2 / lb.scale};
    InstanceDetection det;
    det.box = clip_box(native, plane.rows(), plane.cols());
    det.class_id = kept[i].cls;
    det.score = kept[i].score;
    det.mask = paste_mask(mask_probs[static_cast<int64_t>(i)][kept[i].cls], native, plane.rows(), plane.cols(),
                          cfg.mask_threshold);
    out.push_back(std::move(det));
  }
  return out;
}

std::vector<InstanceDetection> detect(MaskRcnn& model, const FusedSample& fused) {
  return detect(model, fused, model->config());
}

LossBreakdown evaluate_loss(MaskRcnn& model, const SegSample& sample, std::uint64_t seed) {
  torch::NoGradGuard guard;
  return compute_loss(*model, prepare(*model, sample), seed).values();
}

SegTrainResult train_seg(MaskRcnn& model, std::span<const SegSample> train, std::span<const SegSample> val,
                         const SegTrainOptions& options) {
  if (train.empty()) throw Error("empty_dataset", "train_seg: empty training set");
  if (options.images_per_batch < 1) throw Error("invalid_argument", "train_seg: images per batch must be >= 1");
  if (std::none_of(train.begin(), train.end(), [](const SegSample& s) { return count_foreground(s.mask) > 0; })) {
    throw Error("no_positive_samples", "train_seg: no training sample contains the target organ");
  }
  model->train();
  torch::optim::Adam optimizer(model->parameters(), torch::optim::AdamOptions(options.learning_rate));

  SegTrainResult result;
  result.best_val_total = std::numeric_limits<double>::infinity();
  int start = 0;
  const fs::path last = options.checkpoint_dir.empty() ? fs::path{} : options.checkpoint_dir / "seg_last.pt";
  const fs::path best = options.checkpoint_dir.empty() ? fs::path{} : options.checkpoint_dir / "seg_best.pt";
  if (options.resume && !last.empty() && fs::exists(last)) {
    torch::serialize::InputArchive archive;
    archive.load_from(last.string());
    model->load(archive);
    torch::serialize::InputArchive opt;
    if (archive.try_read("optimizer", opt)) optimizer.load(opt);
    for (auto& group : optimizer.param_groups()) {
      static_cast<torch::optim::AdamOptions&>(group.options()).lr(options.learning_rate);
    }
    torch::Tensor t;
    archive.read("epoch", t);
    start = static_cast<int>(t.item<int64_t>());
    archive.read("best_epoch", t);
    result.best_epoch = static_cast<int>(t.item<int64_t>());
    archive.read("best_val", t);
    result.best_val_total = t.item<double>();
  }

  std::ofstream csv;
  if (!options.loss_csv.empty()) {
    if (options.loss_csv.has_parent_path()) fs::create_directories(options.loss_csv.parent_path());
    const bool append = start > 0 && fs::exists(options.loss_csv);
    csv.open(options.loss_csv, append ? std::ios::app : std::ios::trunc);
    if (!append) csv << "epoch,train_cls,train_box,train_mask,train_total,val_cls,val_box,val_mask,val_total\n";
    csv << std::setprecision(10);
  }

  const std::size_t n = train.size();
  const auto batch = static_cast<std::size_t>(options.images_per_batch);
  for (int epoch = start; epoch < options.epochs; ++epoch) {
    model->train();
    const auto perm = permutation(n, derive_seed(options.seed, static_cast<std::uint64_t>(epoch), 0x5e9));
    std::vector<LossBreakdown> train_losses;
    for (std::size_t first = 0; first < n; first += batch) {
      const std::size_t last_index = std::min(n, first + batch);
      optimizer.zero_grad();
      for (std::size_t j = first; j < last_index; ++j) {
        const auto& sample = train[perm[j]];
        const auto terms = compute_loss(*model, prepare(*model, sample), derive_seed(options.seed, epoch, j));
        (terms.total / static_cast<double>(last_index - first)).backward();
        train_losses.push_back(terms.values());
      }
      if (options.grad_clip_norm > 0.0) nn::utils::clip_grad_norm_(model->parameters(), options.grad_clip_norm);
      optimizer.step();
    }

    EpochLog log_row;
    log_row.epoch = epoch;
    log_row.train = mean_of(train_losses);
    if (!val.empty()) {
      std::vector<LossBreakdown> vl;
      for (std::size_t i = 0; i < val.size(); ++i) vl.push_back(evaluate_loss(model, val[i], derive_seed(options.seed, 0x7a1, i)));
      log_row.val = mean_of(vl);
    } else {
      log_row.val = log_row.train;
    }
    result.epochs.push_back(log_row);
    if (csv.is_open()) {
      const auto& t = log_row.train;
      const auto& v = log_row.val;
      csv << epoch << ',' << t.l_cls << ',' << t.l_box << ',' << t.l_mask << ',' << t.total << ',' << v.l_cls << ','
          << v.l_box << ',' << v.l_mask << ',' << v.total << '\n'
          << std::flush;
    }
    log::info("seg epoch " + std::to_string(epoch) + " train " + std::to_string(log_row.train.total) + " val " +
              std::to_string(log_row.val.total));
    if (log_row.val.total < result.best_val_total) {
      result.best_val_total = log_row.val.total;
      result.best_epoch = epoch;
      if (!best.empty()) save_checkpoint(model, nullptr, epoch + 1, epoch, log_row.val.total, best);
    }
    if (!last.empty()) save_checkpoint(model, &optimizer, epoch + 1, result.best_epoch, result.best_val_total, last);
    if (options.stop_after_epoch > 0 && epoch + 1 >= options.stop_after_epoch) break;
  }
  model->eval();
  return result;
}

void save_detector(MaskRcnn& model, const fs::path& path) { save_checkpoint(model, nullptr, 0, -1, 0.0, path); }

MaskRcnn load_detector(const fs::path& path) {
  if (!fs::exists(path)) throw Error("io", "detector checkpoint not found: '" + path.string() + "'");
  torch::serialize::InputArchive archive;
  archive.load_from(path.string());
  c10::IValue cfg_value;
  if (!archive.try_read("detector_config", cfg_value)) throw Error("io", "checkpoint lacks detector configuration");
  MaskRcnn model(DetectorConfig::deserialize(cfg_value.toStringRef()));
  model->load(archive);
  model->eval();
  return model;
}

double parameter_checksum(MaskRcnn& model) {
  torch::NoGradGuard guard;
  double sum = 0.0;
  for (const auto& p : model->parameters()) sum += p.to(torch::kDouble).sum().item<double>();
  return sum;
}

}  // namespace hedseg
