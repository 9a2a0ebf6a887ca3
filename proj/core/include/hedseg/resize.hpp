#pragma once

#include "hedseg/grid.hpp"

namespace hedseg {

/// Bilinear resize with pixel-center alignment (half-pixel offsets).
Image resize_bilinear(const Image& img, int rows, int cols);
Mask resize_nearest(const Mask& mask, int rows, int cols);

/// Aspect-preserving scale into a size x size canvas, content at the
/// top-left, zero padding at the bottom/right.
struct Letterbox {
  int src_rows = 0;
  int src_cols = 0;
  int size = 0;
  double scale = 1.0;
  int content_rows = 0;
  int content_cols = 0;

  static Letterbox fit(int src_rows, int src_cols, int size);
  Image apply(const Image& img) const;
  Mask apply(const Mask& mask) const;
};

}  // namespace hedseg
