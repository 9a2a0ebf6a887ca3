#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hedseg/grid.hpp"
#include "hedseg/modality.hpp"

namespace hedseg {

inline constexpr int kHedStages = 5;
inline constexpr int kHedMaps = kHedStages + 1;  // five side heads plus the fused map
inline constexpr int kHedFusedIndex = kHedStages;

enum class HedInit { PretrainedBackbone, Random };

struct HedConfig {
  int input_size = 512;
  std::array<int, kHedStages> stage_widths{64, 128, 256, 512, 512};
  std::array<int, kHedStages> convs_per_stage{2, 2, 3, 3, 3};
  HedInit init = HedInit::Random;
  std::string backbone_weights;  // required for PretrainedBackbone
  std::array<double, kHedMaps> side_weights{1, 1, 1, 1, 1, 1};
  int edge_thickness = 2;
  int ct_map = kHedFusedIndex;  // map used for CT
  int mr_map = 0;               // map used for both MR weightings

  /// Reduced widths for CPU-scale runs.
  static HedConfig toy(int input_size = 64);
  void validate() const;

  std::string serialize() const;
  static HedConfig deserialize(const std::string& text);
};

/// Six probability maps at input resolution: 0..4 side heads (finest to
/// coarsest, strides 1, 2, 4, 8, 16) and 5 the fused map.
struct SideOutputs {
  std::array<Image, kHedMaps> maps;
};

struct EdgeTarget {
  Mask boundary;
  int thickness = 1;
};

/// Band of total width `thickness` around the mask boundary:
/// dilate(mask, floor(t/2)) minus erode(mask, ceil(t/2)) with square
/// structuring elements of those half-widths. Pixels outside the frame count
/// as background, so foreground on the frame border is boundary.
EdgeTarget edge_target_from_mask(const Mask& mask, int thickness);

Mask dilate(const Mask& mask, int radius);
Mask erode(const Mask& mask, int radius);

/// VGG-style backbone with a 1x1 side head per stage. forward() returns the
/// six pre-sigmoid maps as [N, 6, H, W].
class HedNetImpl : public torch::nn::Module {
 public:
  explicit HedNetImpl(const HedConfig& cfg);

  torch::Tensor forward(const torch::Tensor& x);
  SideOutputs predict(const Image& image);

  const HedConfig& config() const { return cfg_; }

 private:
  HedConfig cfg_;
  std::vector<torch::nn::Sequential> stages_;
  std::vector<torch::nn::Conv2d> side_heads_;
  torch::nn::Conv2d fuse_{nullptr};
};
TORCH_MODULE(HedNet);

HedNet build_hed(const HedConfig& cfg);

/// Class-balanced cross entropy on probabilities (clipped to [1e-7, 1 - 1e-7]):
///   -(beta * sum_pos log p + (1 - beta) * sum_neg log(1 - p)) / #pixels,
/// beta = #neg / #pixels. Differentiable w.r.t. `pred`.
torch::Tensor balanced_bce(const torch::Tensor& pred, const torch::Tensor& target);
double balanced_bce(const Image& pred, const EdgeTarget& target);

struct HedLoss {
  torch::Tensor total;
  std::array<double, kHedMaps> per_map{};
};

/// Weighted sum of balanced_bce over the six maps. `probs` is [N, 6, H, W],
/// `target` [N, 1, H, W] (or [N, H, W]).
HedLoss hed_loss(const torch::Tensor& probs, const torch::Tensor& target, std::span<const double> side_weights);

struct HedSample {
  Image image;
  EdgeTarget target;
};

struct HedTrainOptions {
  int iterations = 2000;
  int batch_size = 4;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint_path;  // empty: no checkpoint
  std::filesystem::path loss_csv;         // empty: no log file
  int checkpoint_every = 0;               // 0: only at the end
  bool resume = false;
};

struct HedLossRow {
  int iteration = 0;
  std::array<double, kHedMaps> per_map{};
  double total = 0.0;
};

struct HedTrainResult {
  std::vector<HedLossRow> curve;  // rows produced by this call
};

/// Adam on the deeply-supervised loss. Sample order is a function of (seed,
/// iteration), so a resumed run replays the same batches.
HedTrainResult train_hed(HedNet& model, std::span<const HedSample> data, const HedTrainOptions& options);

void save_hed(HedNet& model, const std::filesystem::path& path);
HedNet load_hed(const std::filesystem::path& path);

/// CT -> cfg.ct_map (fused by default); MR-T1-in and MR-T2 -> cfg.mr_map.
const Image& select_edge_map(const SideOutputs& outputs, Modality modality, const HedConfig& cfg = {});
int edge_map_index(Modality modality, const HedConfig& cfg = {});
int edge_map_index(const std::string& modality_tag, const HedConfig& cfg = {});

torch::Tensor to_tensor(const Image& img);  // [1, 1, H, W] float
torch::Tensor to_tensor(const Mask& mask);  // [1, 1, H, W] float
Image to_image(const torch::Tensor& t);     // any tensor with H*W elements in last two dims

}  // namespace hedseg
