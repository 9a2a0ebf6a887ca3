#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "hedseg/grid.hpp"

namespace hedseg {

/// Axis-aligned box in pixel coordinates, half-open: covers [x1, x2) x [y1, y2).
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept { return valid() ? width() * height() : 0.0; }
  double cx() const noexcept { return 0.5 * (x1 + x2); }
  double cy() const noexcept { return 0.5 * (y1 + y2); }
  bool valid() const noexcept { return x2 > x1 && y2 > y1; }

  bool operator==(const Box&) const = default;
};

using BoxDeltas = std::array<double, 4>;  // (dx, dy, dw, dh)

inline constexpr int kBackgroundClass = 0;
inline constexpr int kLiverClass = 1;

struct InstanceDetection {
  Box box;
  int class_id = kLiverClass;
  double score = 0.0;
  Mask mask;  // full-image, binary
};

double iou(const Box& a, const Box& b);

/// Center offsets relative to the anchor size and log size ratios.
BoxDeltas encode_deltas(const Box& gt, const Box& anchor);
/// Inverse of encode_deltas. dw/dh are clamped to log(1000/16) to avoid overflow.
Box decode_deltas(const BoxDeltas& deltas, const Box& anchor);

/// Greedy suppression; returns kept indices in descending score order
/// (ties broken by lower index).
std::vector<std::size_t> nms(std::span<const Box> boxes, std::span<const double> scores, double iou_threshold);

Box clip_box(const Box& box, double rows, double cols);

/// Tight half-open bounding box of the foreground, or nullopt for an empty mask.
std::optional<Box> tight_box(const Mask& mask);

}  // namespace hedseg
