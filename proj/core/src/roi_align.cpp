#include "hedseg/roi_align.hpp"

#include <algorithm>
#include <cmath>

#include "hedseg/error.hpp"

namespace hedseg {
namespace {

float bilinear(const FeatureMap& f, int c, double y, double x) {
  if (y < -1.0 || y > f.rows || x < -1.0 || x > f.cols) return 0.0f;
  y = std::max(y, 0.0);
  x = std::max(x, 0.0);
  int y0 = static_cast<int>(y), x0 = static_cast<int>(x);
  int y1, x1;
  if (y0 >= f.rows - 1) {
    y0 = y1 = f.rows - 1;
    y = y0;
  } else {
    y1 = y0 + 1;
  }
  if (x0 >= f.cols - 1) {
    x0 = x1 = f.cols - 1;
    x = x0;
  } else {
    x1 = x0 + 1;
  }
  const double ly = y - y0, lx = x - x0;
  const double v = (1 - ly) * (1 - lx) * f.at(c, y0, x0) + (1 - ly) * lx * f.at(c, y0, x1) +
                   ly * (1 - lx) * f.at(c, y1, x0) + ly * lx * f.at(c, y1, x1);
  return static_cast<float>(v);
}

}  // namespace

FeatureMap roi_align(const FeatureMap& feature, const Box& box, int output_size, int samples_per_bin,
                     double spatial_scale) {
  if (!box.valid()) throw Error("invalid_argument", "roi_align: zero-area box");
  if (output_size < 1 || samples_per_bin < 1) throw Error("invalid_argument", "roi_align: invalid output size");
  const double x1 = box.x1 * spatial_scale - 0.5, y1 = box.y1 * spatial_scale - 0.5;
  const double bin_w = box.width() * spatial_scale / output_size;
  const double bin_h = box.height() * spatial_scale / output_size;
  FeatureMap out(feature.channels, output_size, output_size);
  const double inv = 1.0 / (samples_per_bin * samples_per_bin);
  for (int c = 0; c < feature.channels; ++c) {
    for (int py = 0; py < output_size; ++py) {
      for (int px = 0; px < output_size; ++px) {
        double acc = 0.0;
        for (int iy = 0; iy < samples_per_bin; ++iy) {
          const double y = y1 + py * bin_h + (iy + 0.5) * bin_h / samples_per_bin;
          for (int ix = 0; ix < samples_per_bin; ++ix) {
            const double x = x1 + px * bin_w + (ix + 0.5) * bin_w / samples_per_bin;
            acc += bilinear(feature, c, y, x);
          }
        }
        out.at(c, py, px) = static_cast<float>(acc * inv);
      }
    }
  }
  return out;
}

}  // namespace hedseg
