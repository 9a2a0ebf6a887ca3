#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hedseg/anchors.hpp"
#include "hedseg/boxes.hpp"
#include "hedseg/detector_loss.hpp"
#include "hedseg/fuse.hpp"
#include "hedseg/grid.hpp"
#include "hedseg/resize.hpp"

namespace hedseg {

enum class Backbone { DeepResidual101Fpn, ToyResidual18Fpn };

struct DetectorConfig {
  Backbone backbone = Backbone::DeepResidual101Fpn;
  int input_size = 512;

  // Backbone / FPN widths. The FPN levels are P2..P6 at strides 4..64.
  int stem_width = 64;
  std::vector<int> stage_widths{256, 512, 1024, 2048};
  std::vector<int> stage_blocks{3, 4, 23, 3};
  int fpn_channels = 256;

  std::vector<double> anchor_scales{32, 64, 128, 256, 512};  // one per FPN level
  std::vector<double> anchor_ratios{0.5, 1.0, 2.0};

  double rpn_pos_iou = 0.7;
  double rpn_neg_iou = 0.3;
  int rpn_batch = 256;
  double rpn_pos_fraction = 0.5;
  int pre_nms_train = 6000;
  int post_nms_train = 2000;
  int pre_nms_infer = 6000;
  int post_nms_infer = 1000;
  double rpn_nms_iou = 0.7;

  double head_pos_iou = 0.5;
  int roi_batch = 200;
  double roi_pos_fraction = 0.25;
  double head_nms_iou = 0.5;
  double score_threshold = 0.7;
  int max_detections = 100;

  int box_pool_size = 7;
  int mask_pool_size = 14;
  int mask_head_size = 28;
  int samples_per_bin = 2;
  int head_fc = 1024;
  int mask_convs = 4;
  int mask_channels = 256;
  // FPN level for a RoI: floor(canonical_level + log2(sqrt(area) / canonical_size)), clamped to [2, 5].
  double roi_canonical_size = 112.0;
  int roi_canonical_level = 4;

  int num_classes = 2;  // background, liver
  std::array<double, 4> bbox_std{0.1, 0.1, 0.2, 0.2};
  double mask_threshold = 0.5;
  double dice_eps = 1.0;

  /// Residual-18-FPN with reduced widths, anchors scaled to `input_size`.
  static DetectorConfig toy(int input_size = 128);
  void validate() const;

  std::vector<AnchorLevel> anchor_levels() const;
  static constexpr std::array<int, 5> kFpnStrides{4, 8, 16, 32, 64};

  std::string serialize() const;
  static DetectorConfig deserialize(const std::string& text);
};

/// Differentiable RoIAlign over one feature map [C, H, W] for boxes [R, 4]
/// (x1, y1, x2, y2 in image coordinates). Same sampling rule as the
/// torch-free roi_align. Returns [R, C, out, out].
torch::Tensor roi_align(const torch::Tensor& feature, const torch::Tensor& boxes, int output_size, int samples_per_bin,
                        double spatial_scale);

torch::Tensor boxes_to_tensor(std::span<const Box> boxes);

class MaskRcnnImpl : public torch::nn::Module {
 public:
  explicit MaskRcnnImpl(const DetectorConfig& cfg);

  /// x: [1, 3, S, S] -> P2..P6, each [1, F, S/stride, S/stride].
  std::vector<torch::Tensor> features(const torch::Tensor& x);
  /// Objectness logits [A] and deltas [A, 4] in generate_anchors order.
  std::pair<torch::Tensor, torch::Tensor> rpn(const std::vector<torch::Tensor>& feats);
  /// Level-assigned RoIAlign over P2..P5. Returns [R, F, out, out].
  torch::Tensor pool(const std::vector<torch::Tensor>& feats, std::span<const Box> boxes, int output_size);
  /// Class logits [R, C] and class-specific deltas [R, C, 4].
  std::pair<torch::Tensor, torch::Tensor> box_head(const torch::Tensor& pooled);
  /// Mask logits [R, C, M, M].
  torch::Tensor mask_head(const torch::Tensor& pooled);

  const DetectorConfig& config() const { return cfg_; }
  const std::vector<Box>& anchors() const { return anchors_; }

 private:
  DetectorConfig cfg_;
  std::vector<Box> anchors_;
  torch::nn::Sequential stem_{nullptr};
  std::vector<torch::nn::Sequential> stages_;
  std::vector<torch::nn::Conv2d> lateral_;
  std::vector<torch::nn::Conv2d> smooth_;
  torch::nn::Conv2d rpn_conv_{nullptr}, rpn_cls_{nullptr}, rpn_box_{nullptr};
  torch::nn::Linear fc1_{nullptr}, fc2_{nullptr}, cls_{nullptr}, bbox_{nullptr};
  torch::nn::Sequential mask_convs_{nullptr};
  torch::nn::ConvTranspose2d mask_up_{nullptr};
  torch::nn::Conv2d mask_out_{nullptr};
};
TORCH_MODULE(MaskRcnn);

MaskRcnn build_detector(const DetectorConfig& cfg);

/// Detector input for one image: letterboxed to input_size, 3 identical channels.
torch::Tensor detector_input(const Image& plane, const Letterbox& lb);

/// Proposals from RPN outputs: top-`pre_nms` by objectness, decoded, clipped,
/// NMS, then the first `post_nms`.
std::vector<Box> generate_proposals(const torch::Tensor& logits, const torch::Tensor& deltas,
                                    std::span<const Box> anchors, const DetectorConfig& cfg, int pre_nms, int post_nms);

/// Pastes an M x M probability map into a full-image binary mask over `box`
/// by bilinear sampling at pixel centers, threshold `threshold`.
Mask paste_mask(const torch::Tensor& probs, const Box& box, int rows, int cols, double threshold);

/// proposals -> box head -> per-class NMS -> score filter -> mask head.
/// Returned boxes and masks are in the fused sample's native frame. Only
/// detections with score strictly above score_threshold are kept.
std::vector<InstanceDetection> detect(MaskRcnn& model, const FusedSample& fused, const DetectorConfig& cfg);
std::vector<InstanceDetection> detect(MaskRcnn& model, const FusedSample& fused);

struct SegSample {
  std::string id;
  Image plane;  // fused (or enhanced, for the baseline) plane, native size
  Mask mask;
};

struct SegTrainOptions {
  int epochs = 10;
  int images_per_batch = 2;
  double learning_rate = 1e-4;
  double grad_clip_norm = 5.0;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint_dir;  // seg_last.pt / seg_best.pt; empty: none
  std::filesystem::path loss_csv;        // empty: none
  bool resume = false;
  int stop_after_epoch = 0;  // > 0: return after this epoch (for staged runs)
};

struct EpochLog {
  int epoch = 0;
  LossBreakdown train;
  LossBreakdown val;
};

struct SegTrainResult {
  std::vector<EpochLog> epochs;  // epochs run by this call
  int best_epoch = -1;
  double best_val_total = 0.0;
};

/// Ground truth per image is one instance: the tight box of the mask.
/// Per-step sampling is seeded by (seed, epoch, step) so runs resume exactly.
SegTrainResult train_seg(MaskRcnn& model, std::span<const SegSample> train, std::span<const SegSample> val,
                         const SegTrainOptions& options);

/// Loss for one sample without updating the model (used for validation).
LossBreakdown evaluate_loss(MaskRcnn& model, const SegSample& sample, std::uint64_t seed);

void save_detector(MaskRcnn& model, const std::filesystem::path& path);
MaskRcnn load_detector(const std::filesystem::path& path);

/// Sum of all parameter values; cheap checksum for "did training move anything".
double parameter_checksum(MaskRcnn& model);

}  // namespace hedseg
