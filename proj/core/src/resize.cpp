#include "hedseg/resize.hpp"

#include <algorithm>
#include <cmath>

#include "hedseg/error.hpp"

namespace hedseg {

Image resize_bilinear(const Image& img, int rows, int cols) {
  if (rows == img.rows() && cols == img.cols()) return img;
  if (img.empty()) throw Error("invalid_argument", "cannot resize an empty image");
  Image out(rows, cols);
  const double sy = static_cast<double>(img.rows()) / rows, sx = static_cast<double>(img.cols()) / cols;
  for (int r = 0; r < rows; ++r) {
    const double y = std::clamp((r + 0.5) * sy - 0.5, 0.0, img.rows() - 1.0);
    const int y0 = static_cast<int>(y), y1 = std::min(y0 + 1, img.rows() - 1);
    const double wy = y - y0;
    for (int c = 0; c < cols; ++c) {
      const double x = std::clamp((c + 0.5) * sx - 0.5, 0.0, img.cols() - 1.0);
      const int x0 = static_cast<int>(x), x1 = std::min(x0 + 1, img.cols() - 1);
      const double wx = x - x0;
      const double top = (1 - wx) * img(y0, x0) + wx * img(y0, x1);
      const double bottom = (1 - wx) * img(y1, x0) + wx * img(y1, x1);
      out(r, c) = static_cast<float>((1 - wy) * top + wy * bottom);
    }
  }
  return out;
}

Mask resize_nearest(const Mask& mask, int rows, int cols) {
  if (rows == mask.rows() && cols == mask.cols()) return mask;
  Mask out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const int y = std::min(static_cast<int>((r + 0.5) * mask.rows() / rows), mask.rows() - 1);
    for (int c = 0; c < cols; ++c) {
      const int x = std::min(static_cast<int>((c + 0.5) * mask.cols() / cols), mask.cols() - 1);
      out(r, c) = mask(y, x);
    }
  }
  return out;
}

Letterbox Letterbox::fit(int src_rows, int src_cols, int size) {
  if (src_rows <= 0 || src_cols <= 0 || size <= 0) throw Error("invalid_argument", "letterbox: invalid sizes");
  Letterbox lb;
  lb.src_rows = src_rows;
  lb.src_cols = src_cols;
  lb.size = size;
  lb.scale = static_cast<double>(size) / std::max(src_rows, src_cols);
  lb.content_rows = std::clamp(static_cast<int>(std::lround(src_rows * lb.scale)), 1, size);
  lb.content_cols = std::clamp(static_cast<int>(std::lround(src_cols * lb.scale)), 1, size);
  return lb;
}

Image Letterbox::apply(const Image& img) const {
  const Image scaled = resize_bilinear(img, content_rows, content_cols);
  if (content_rows == size && content_cols == size) return scaled;
  Image out(size, size, 0.0f);
  for (int r = 0; r < content_rows; ++r) {
    for (int c = 0; c < content_cols; ++c) out(r, c) = scaled(r, c);
  }
  return out;
}

Mask Letterbox::apply(const Mask& mask) const {
  const Mask scaled = resize_nearest(mask, content_rows, content_cols);
  if (content_rows == size && content_cols == size) return scaled;
  Mask out(size, size, 0);
  for (int r = 0; r < content_rows; ++r) {
    for (int c = 0; c < content_cols; ++c) out(r, c) = scaled(r, c);
  }
  return out;
}

}  // namespace hedseg
