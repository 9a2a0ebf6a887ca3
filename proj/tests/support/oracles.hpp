#pragma once

// Straightforward reference implementations used to check the library.
// They favour obviousness over speed and share no code with core/.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <vector>

#include "hedseg/boxes.hpp"
#include "hedseg/grid.hpp"
#include "hedseg/rng.hpp"

namespace oracle {

using hedseg::Box;
using hedseg::Image;
using hedseg::Mask;

inline Mask random_mask(int rows, int cols, double p, hedseg::Rng& rng) {
  Mask m(rows, cols, 0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform() < p ? 1 : 0;
  return m;
}

inline double dice(const Mask& p, const Mask& g) {
  long both = 0, np = 0, ng = 0;
  for (int r = 0; r < p.rows(); ++r) {
    for (int c = 0; c < p.cols(); ++c) {
      const bool a = p(r, c) != 0, b = g(r, c) != 0;
      both += a && b;
      np += a;
      ng += b;
    }
  }
  if (np + ng == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(np + ng);
}

/// IoU of integer half-open boxes by counting covered unit cells.
inline double iou_pixels(const Box& a, const Box& b) {
  const int x0 = static_cast<int>(std::min(a.x1, b.x1)), x1 = static_cast<int>(std::max(a.x2, b.x2));
  const int y0 = static_cast<int>(std::min(a.y1, b.y1)), y1 = static_cast<int>(std::max(a.y2, b.y2));
  long inter = 0, uni = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const bool in_a = x >= a.x1 && x < a.x2 && y >= a.y1 && y < a.y2;
      const bool in_b = x >= b.x1 && x < b.x2 && y >= b.y1 && y < b.y2;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double iou_analytic(const Box& a, const Box& b) {
  const double w = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double h = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = w * h;
  const double uni = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
  return uni <= 0 ? 0.0 : inter / uni;
}

/// Quadratic greedy NMS: repeatedly take the best remaining box (lowest index
/// on ties) and drop everything overlapping it by more than the threshold.
inline std::vector<std::size_t> nms(const std::vector<Box>& boxes, const std::vector<double>& scores, double thr) {
  std::vector<bool> alive(boxes.size(), true);
  std::vector<std::size_t> keep;
  while (true) {
    std::size_t best = boxes.size();
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (alive[i] && (best == boxes.size() || scores[i] > scores[best])) best = i;
    }
    if (best == boxes.size()) break;
    keep.push_back(best);
    alive[best] = false;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (alive[i] && iou_analytic(boxes[best], boxes[i]) > thr) alive[i] = false;
    }
  }
  return keep;
}

/// Bilinear value of a single-channel map at continuous (y, x), cell centers
/// at integer coordinates; zero beyond one cell outside, clamped otherwise.
inline double bilinear(const std::vector<double>& f, int h, int w, double y, double x) {
  if (y < -1.0 || y > h || x < -1.0 || x > w) return 0.0;
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double fy = y - y0, fx = x - x0;
  const auto at = [&](int yy, int xx) { return f[static_cast<std::size_t>(yy) * w + xx]; };
  return (1 - fy) * (1 - fx) * at(y0, x0) + (1 - fy) * fx * at(y0, x1) + fy * (1 - fx) * at(y1, x0) + fy * fx * at(y1, x1);
}

/// RoIAlign for one channel: output cell (i, j) is the mean of s x s bilinear
/// samples spread evenly inside the bin; the box is shifted by half a cell so
/// cell centers sit at integer coordinates.
inline std::vector<double> roi_align(const std::vector<double>& f, int h, int w, const Box& box, int out, int s,
                                     double scale) {
  std::vector<double> result(static_cast<std::size_t>(out) * out, 0.0);
  const double bx = box.x1 * scale - 0.5, by = box.y1 * scale - 0.5;
  const double bw = (box.x2 - box.x1) * scale, bh = (box.y2 - box.y1) * scale;
  for (int i = 0; i < out; ++i) {
    for (int j = 0; j < out; ++j) {
      double acc = 0.0;
      for (int a = 0; a < s; ++a) {
        for (int b = 0; b < s; ++b) {
          const double y = by + bh * (i + (a + 0.5) / s) / out;
          const double x = bx + bw * (j + (b + 0.5) / s) / out;
          acc += bilinear(f, h, w, y, x);
        }
      }
      result[static_cast<std::size_t>(i) * out + j] = acc / (s * s);
    }
  }
  return result;
}

/// Labels 8-connected foreground components by breadth-first flood fill;
/// returns the mask of the biggest (earliest seed on ties).
inline Mask largest_component(const Mask& m) {
  const int rows = m.rows(), cols = m.cols();
  std::vector<int> label(static_cast<std::size_t>(rows) * cols, -1);
  std::vector<long> sizes;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!m(r, c) || label[r * cols + c] >= 0) continue;
      const int id = static_cast<int>(sizes.size());
      sizes.push_back(0);
      std::deque<std::pair<int, int>> q{{r, c}};
      label[r * cols + c] = id;
      while (!q.empty()) {
        auto [y, x] = q.front();
        q.pop_front();
        ++sizes[id];
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = y + dy, nx = x + dx;
            if (ny < 0 || nx < 0 || ny >= rows || nx >= cols) continue;
            if (m(ny, nx) && label[ny * cols + nx] < 0) {
              label[ny * cols + nx] = id;
              q.emplace_back(ny, nx);
            }
          }
        }
      }
    }
  }
  Mask out(rows, cols, 0);
  if (sizes.empty()) return out;
  const int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  for (int i = 0; i < rows * cols; ++i) out[i] = label[i] == best ? 1 : 0;
  return out;
}

/// Background pixels not 4-connected to the border become foreground.
inline Mask fill_holes(const Mask& m) {
  const int rows = m.rows(), cols = m.cols();
  Mask outside(rows, cols, 0);
  std::deque<std::pair<int, int>> q;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if ((r == 0 || c == 0 || r == rows - 1 || c == cols - 1) && !m(r, c)) {
        outside(r, c) = 1;
        q.emplace_back(r, c);
      }
    }
  }
  const int dy[4] = {-1, 1, 0, 0}, dx[4] = {0, 0, -1, 1};
  while (!q.empty()) {
    auto [y, x] = q.front();
    q.pop_front();
    for (int k = 0; k < 4; ++k) {
      const int ny = y + dy[k], nx = x + dx[k];
      if (ny < 0 || nx < 0 || ny >= rows || nx >= cols) continue;
      if (!m(ny, nx) && !outside(ny, nx)) {
        outside(ny, nx) = 1;
        q.emplace_back(ny, nx);
      }
    }
  }
  Mask out(rows, cols, 0);
  for (int i = 0; i < rows * cols; ++i) out[i] = outside[i] ? 0 : 1;
  return out;
}

/// Central finite differences of a scalar function of a flat vector.
inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

}  // namespace oracle
