#pragma once

#include <torch/torch.h>

namespace hedseg {

/// Soft Dice loss 1 - (2 sum(p g) + eps) / (sum p + sum g + eps).
torch::Tensor dice_loss(const torch::Tensor& pred, const torch::Tensor& gt, double eps = 1.0);

/// Smooth-L1 (Huber with beta) summed over the last dimension.
torch::Tensor smooth_l1(const torch::Tensor& pred, const torch::Tensor& target, double beta = 1.0);

/// Raw head outputs for one image (or a batch flattened along dim 0).
struct HeadOutputs {
  torch::Tensor rpn_logits;   // [A] objectness logits of sampled anchors
  torch::Tensor rpn_deltas;   // [A, 4]
  torch::Tensor cls_logits;   // [R, C]
  torch::Tensor box_deltas;   // [R, C, 4]
  torch::Tensor mask_logits;  // [P, C, M, M], one row per positive RoI
};

struct LossTargets {
  torch::Tensor rpn_labels;   // [A] int64: 1 positive, 0 negative, -1 ignore
  torch::Tensor rpn_deltas;   // [A, 4]
  torch::Tensor roi_labels;   // [R] int64 class ids, 0 = background
  torch::Tensor roi_deltas;   // [R, 4] targets for the RoI's class
  torch::Tensor mask_labels;  // [P] int64 class id of each positive RoI
  torch::Tensor mask_targets; // [P, M, M] binary
};

/// Scalar values of the three loss terms. total is computed as
/// l_cls + l_box + l_mask.
struct LossBreakdown {
  double l_cls = 0.0;
  double l_box = 0.0;
  double l_mask = 0.0;
  double total = 0.0;

  static LossBreakdown from_terms(double cls, double box, double mask) { return {cls, box, mask, cls + box + mask}; }
};

struct LossTerms {
  torch::Tensor l_cls;
  torch::Tensor l_box;
  torch::Tensor l_mask;
  torch::Tensor total;

  LossBreakdown values() const;
};

struct LossOptions {
  double dice_eps = 1.0;
  double smooth_l1_beta = 1.0;
};

/// L = L_cls + L_box + L_mask with unit weights.
///   L_cls: binary cross entropy over sampled anchors (mean) + softmax cross
///          entropy over sampled RoIs (mean);
///   L_box: smooth-L1 over positive anchors and positive RoIs (mean per box);
///   L_mask: Dice loss on the ground-truth class channel, averaged over
///           positive RoIs.
/// Empty sample sets contribute zero.
LossTerms multitask_loss(const HeadOutputs& out, const LossTargets& targets, const LossOptions& options = {});

}  // namespace hedseg
