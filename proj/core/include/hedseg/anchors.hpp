#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hedseg/boxes.hpp"

namespace hedseg {

struct AnchorLevel {
  int stride = 16;
  std::vector<double> scales;  // anchor side length in pixels for ratio 1
};

/// Anchors for every feature cell of every level. Order: level, row, column,
/// scale, ratio. Ratio is width/height; each anchor is centered on its cell
/// center ((c + 0.5) * stride, (r + 0.5) * stride).
std::vector<Box> generate_anchors(int rows, int cols, std::span<const AnchorLevel> levels,
                                  std::span<const double> ratios);

/// Closed-form anchor count.
std::size_t anchor_count(int rows, int cols, std::span<const AnchorLevel> levels, std::size_t num_ratios);

enum class AnchorLabel : std::int8_t { Ignore = -1, Negative = 0, Positive = 1 };

struct AnchorMatch {
  std::vector<AnchorLabel> labels;
  std::vector<int> matched_gt;  // -1 when unmatched
  std::vector<BoxDeltas> targets;  // encode_deltas(gt, anchor) for positives, zeros otherwise
};

/// Positive if IoU >= pos_iou or the anchor is the best match of some gt box;
/// negative if max IoU < neg_iou; ignored otherwise.
AnchorMatch match_anchors(std::span<const Box> anchors, std::span<const Box> gt_boxes, double pos_iou, double neg_iou);

}  // namespace hedseg
