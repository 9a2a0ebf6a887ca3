#include "hedseg/boxes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hedseg/error.hpp"

namespace hedseg {
namespace {

const double kMaxLogRatio = std::log(1000.0 / 16.0);

}  // namespace

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

BoxDeltas encode_deltas(const Box& gt, const Box& anchor) {
  if (!anchor.valid()) throw Error("invalid_argument", "encode_deltas: degenerate anchor");
  if (!gt.valid()) throw Error("invalid_argument", "encode_deltas: degenerate box");
  return {(gt.cx() - anchor.cx()) / anchor.width(), (gt.cy() - anchor.cy()) / anchor.height(),
          std::log(gt.width() / anchor.width()), std::log(gt.height() / anchor.height())};
}

Box decode_deltas(const BoxDeltas& d, const Box& anchor) {
  if (!anchor.valid()) throw Error("invalid_argument", "decode_deltas: degenerate anchor");
  const double cx = anchor.cx() + d[0] * anchor.width();
  const double cy = anchor.cy() + d[1] * anchor.height();
  const double w = anchor.width() * std::exp(std::min(d[2], kMaxLogRatio));
  const double h = anchor.height() * std::exp(std::min(d[3], kMaxLogRatio));
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

std::vector<std::size_t> nms(std::span<const Box> boxes, std::span<const double> scores, double iou_threshold) {
  if (boxes.size() != scores.size()) throw Error("invalid_argument", "nms: boxes and scores differ in length");
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::size_t> keep;
  std::vector<bool> suppressed(boxes.size(), false);
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (suppressed[i]) continue;
    keep.push_back(i);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (!suppressed[j] && iou(boxes[i], boxes[j]) > iou_threshold) suppressed[j] = true;
    }
  }
  return keep;
}

Box clip_box(const Box& b, double rows, double cols) {
  return {std::clamp(b.x1, 0.0, cols), std::clamp(b.y1, 0.0, rows), std::clamp(b.x2, 0.0, cols),
          std::clamp(b.y2, 0.0, rows)};
}

std::optional<Box> tight_box(const Mask& mask) {
  int r0 = mask.rows(), c0 = mask.cols(), r1 = -1, c1 = -1;
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < mask.cols(); ++c) {
      if (!mask(r, c)) continue;
      r0 = std::min(r0, r);
      r1 = std::max(r1, r);
      c0 = std::min(c0, c);
      c1 = std::max(c1, c);
    }
  }
  if (r1 < 0) return std::nullopt;
  return Box{static_cast<double>(c0), static_cast<double>(r0), static_cast<double>(c1 + 1), static_cast<double>(r1 + 1)};
}

}  // namespace hedseg
