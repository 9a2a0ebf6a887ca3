#include "hedseg/detector_loss.hpp"

#include "hedseg/error.hpp"

namespace F = torch::nn::functional;

namespace hedseg {

torch::Tensor dice_loss(const torch::Tensor& pred, const torch::Tensor& gt, double eps) {
  if (pred.sizes() != gt.sizes()) throw Error("shape_mismatch", "dice_loss: shape mismatch");
  if (!(eps > 0.0)) throw Error("invalid_argument", "dice_loss: eps must be positive");
  const auto g = gt.to(pred.dtype());
  const auto inter = (pred * g).sum();
  return 1.0 - (2.0 * inter + eps) / (pred.sum() + g.sum() + eps);
}

torch::Tensor smooth_l1(const torch::Tensor& pred, const torch::Tensor& target, double beta) {
  const auto diff = (pred - target).abs();
  const auto loss = torch::where(diff < beta, 0.5 * diff * diff / beta, diff - 0.5 * beta);
  return loss.sum(-1);
}

LossBreakdown LossTerms::values() const {
  return LossBreakdown::from_terms(l_cls.item<double>(), l_box.item<double>(), l_mask.item<double>());
}

LossTerms multitask_loss(const HeadOutputs& out, const LossTargets& t, const LossOptions& options) {
  const auto opts = out.cls_logits.defined() ? out.cls_logits.options() : out.rpn_logits.options();
  auto zero = [&] { return torch::zeros({}, opts); };

  // Classification: RPN objectness + head class.
  auto rpn_cls = zero();
  auto rpn_box = zero();
  if (out.rpn_logits.defined() && out.rpn_logits.numel() > 0) {
    const auto sampled = t.rpn_labels >= 0;
    if (sampled.any().item<bool>()) {
      const auto logits = out.rpn_logits.index({sampled});
      const auto labels = t.rpn_labels.index({sampled}).to(logits.dtype());
      rpn_cls = F::binary_cross_entropy_with_logits(logits, labels);
    }
    const auto pos = t.rpn_labels == 1;
    if (pos.any().item<bool>()) {
      rpn_box = smooth_l1(out.rpn_deltas.index({pos}), t.rpn_deltas.index({pos}).to(out.rpn_deltas.dtype()),
                          options.smooth_l1_beta)
                    .mean();
    }
  }

  auto head_cls = zero();
  auto head_box = zero();
  if (out.cls_logits.defined() && out.cls_logits.size(0) > 0) {
    head_cls = F::cross_entropy(out.cls_logits, t.roi_labels);
    const auto pos_idx = torch::nonzero(t.roi_labels > 0).squeeze(1);
    if (pos_idx.numel() > 0) {
      const auto cls = t.roi_labels.index_select(0, pos_idx);
      const auto deltas = out.box_deltas.index_select(0, pos_idx);
      const auto picked = deltas.index({torch::arange(pos_idx.numel()), cls});  // [P, 4]
      head_box = smooth_l1(picked, t.roi_deltas.index_select(0, pos_idx).to(picked.dtype()), options.smooth_l1_beta).mean();
    }
  }

  auto mask = zero();
  if (out.mask_logits.defined() && out.mask_logits.size(0) > 0) {
    const auto p = out.mask_logits.size(0);
    const auto probs = torch::sigmoid(out.mask_logits.index({torch::arange(p), t.mask_labels}));  // [P, M, M]
    const auto g = t.mask_targets.to(probs.dtype());
    const auto inter = (probs * g).sum({1, 2});
    const auto per_roi = 1.0 - (2.0 * inter + options.dice_eps) / (probs.sum({1, 2}) + g.sum({1, 2}) + options.dice_eps);
    mask = per_roi.mean();
  }

  LossTerms terms;
  terms.l_cls = rpn_cls + head_cls;
  terms.l_box = rpn_box + head_box;
  terms.l_mask = mask;
  terms.total = terms.l_cls + terms.l_box + terms.l_mask;
  return terms;
}

}  // namespace hedseg
