#include "hedseg/anchors.hpp"

#include <cmath>

#include "hedseg/error.hpp"

namespace hedseg {

std::size_t anchor_count(int rows, int cols, std::span<const AnchorLevel> levels, std::size_t num_ratios) {
  std::size_t n = 0;
  for (const auto& lvl : levels) {
    n += static_cast<std::size_t>(rows / lvl.stride) * static_cast<std::size_t>(cols / lvl.stride) * num_ratios *
         lvl.scales.size();
  }
  return n;
}

std::vector<Box> generate_anchors(int rows, int cols, std::span<const AnchorLevel> levels,
                                  std::span<const double> ratios) {
  for (const auto& lvl : levels) {
    if (lvl.stride <= 0) throw Error("invalid_argument", "anchor stride must be positive");
    if (rows % lvl.stride != 0 || cols % lvl.stride != 0) {
      throw Error("invalid_argument", "image size must be divisible by every anchor stride");
    }
  }
  for (double r : ratios) {
    if (!(r > 0.0)) throw Error("invalid_argument", "anchor ratios must be positive");
  }
  std::vector<Box> anchors;
  anchors.reserve(anchor_count(rows, cols, levels, ratios.size()));
  for (const auto& lvl : levels) {
    const int fh = rows / lvl.stride, fw = cols / lvl.stride;
    for (int y = 0; y < fh; ++y) {
      for (int x = 0; x < fw; ++x) {
        const double cx = (x + 0.5) * lvl.stride, cy = (y + 0.5) * lvl.stride;
        for (double scale : lvl.scales) {
          for (double ratio : ratios) {
            const double w = scale * std::sqrt(ratio), h = scale / std::sqrt(ratio);
            anchors.push_back({cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h});
          }
        }
      }
    }
  }
  return anchors;
}

AnchorMatch match_anchors(std::span<const Box> anchors, std::span<const Box> gt_boxes, double pos_iou, double neg_iou) {
  if (!(neg_iou < pos_iou)) throw Error("invalid_argument", "match_anchors: neg_iou must be below pos_iou");
  const std::size_t n = anchors.size();
  AnchorMatch m;
  m.labels.assign(n, AnchorLabel::Negative);
  m.matched_gt.assign(n, -1);
  m.targets.assign(n, BoxDeltas{0, 0, 0, 0});
  if (gt_boxes.empty()) return m;

  std::vector<double> best_for_gt(gt_boxes.size(), -1.0);
  std::vector<std::size_t> best_anchor_for_gt(gt_boxes.size(), 0);
  for (std::size_t a = 0; a < n; ++a) {
    double best = -1.0;
    int best_g = -1;
    for (std::size_t g = 0; g < gt_boxes.size(); ++g) {
      const double v = iou(anchors[a], gt_boxes[g]);
      if (v > best) {
        best = v;
        best_g = static_cast<int>(g);
      }
      if (v > best_for_gt[g]) {
        best_for_gt[g] = v;
        best_anchor_for_gt[g] = a;
      }
    }
    if (best >= pos_iou) {
      m.labels[a] = AnchorLabel::Positive;
      m.matched_gt[a] = best_g;
    } else if (best >= neg_iou) {
      m.labels[a] = AnchorLabel::Ignore;
    }
  }
  for (std::size_t g = 0; g < gt_boxes.size(); ++g) {
    if (best_for_gt[g] <= 0.0) continue;
    const std::size_t a = best_anchor_for_gt[g];
    if (m.labels[a] != AnchorLabel::Positive) {
      m.labels[a] = AnchorLabel::Positive;
      m.matched_gt[a] = static_cast<int>(g);
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    if (m.labels[a] == AnchorLabel::Positive) m.targets[a] = encode_deltas(gt_boxes[m.matched_gt[a]], anchors[a]);
  }
  return m;
}

}  // namespace hedseg
