#include "hedseg/postprocess.hpp"

#include <algorithm>
#include <vector>

#include "hedseg/boxes.hpp"

namespace hedseg {
namespace {

// Labels the component containing `seed` (pixels with value == target) and
// returns its pixel indices. `visited` is shared across calls.
std::vector<std::size_t> flood(const Mask& m, std::size_t seed, std::uint8_t target, bool eight_connected,
                               std::vector<bool>& visited) {
  const int rows = m.rows(), cols = m.cols();
  std::vector<std::size_t> component{seed};
  visited[seed] = true;
  for (std::size_t head = 0; head < component.size(); ++head) {
    const int r = static_cast<int>(component[head] / cols), c = static_cast<int>(component[head] % cols);
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        if ((dr == 0 && dc == 0) || (!eight_connected && dr != 0 && dc != 0)) continue;
        const int rr = r + dr, cc = c + dc;
        if (!m.in_bounds(rr, cc)) continue;
        const std::size_t idx = static_cast<std::size_t>(rr) * cols + cc;
        if (visited[idx] || (m[idx] != 0) != (target != 0)) continue;
        visited[idx] = true;
        component.push_back(idx);
      }
    }
  }
  return component;
}

}  // namespace

Mask largest_component(const Mask& mask) {
  std::vector<bool> visited(mask.size(), false);
  std::vector<std::size_t> best;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i] || visited[i]) continue;
    auto comp = flood(mask, i, 1, true, visited);
    if (comp.size() > best.size()) best = std::move(comp);
  }
  Mask out(mask.rows(), mask.cols(), 0);
  for (auto idx : best) out[idx] = 1;
  return out;
}

Mask fill_holes(const Mask& mask) {
  const int rows = mask.rows(), cols = mask.cols();
  std::vector<bool> visited(mask.size(), false);
  const auto seed_from = [&](int r, int c) {
    const std::size_t idx = static_cast<std::size_t>(r) * cols + c;
    if (!mask[idx] && !visited[idx]) flood(mask, idx, 0, false, visited);
  };
  for (int c = 0; c < cols; ++c) {
    seed_from(0, c);
    seed_from(rows - 1, c);
  }
  for (int r = 0; r < rows; ++r) {
    seed_from(r, 0);
    seed_from(r, cols - 1);
  }
  Mask out(rows, cols, 0);
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = (mask[i] || !visited[i]) ? 1 : 0;
  return out;
}

FinalMask refine(const std::vector<InstanceDetection>& detections, int rows, int cols, const RefineOptions& options) {
  const InstanceDetection* best = nullptr;
  for (const auto& d : detections) {
    if (d.class_id != kLiverClass) continue;
    if (!best || d.score > best->score) best = &d;
  }
  if (!best) return {Mask(rows, cols, 0), 0.0};
  Mask m = best->mask;
  if (options.keep_largest_component) m = largest_component(m);
  if (options.fill_holes) m = fill_holes(m);
  return {std::move(m), best->score};
}

}  // namespace hedseg
