#pragma once

#include <vector>

#include "hedseg/boxes.hpp"

namespace hedseg {

/// C x H x W feature map, row-major per channel.
struct FeatureMap {
  int channels = 0;
  int rows = 0;
  int cols = 0;
  std::vector<float> data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w, float fill = 0.0f) : channels(c), rows(h), cols(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  float& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * rows + y) * cols + x]; }
  float at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * rows + y) * cols + x]; }
};

/// RoIAlign without coordinate rounding. The box (image coordinates) is
/// scaled by `spatial_scale`; feature cell (y, x) is centered at (y + 0.5,
/// x + 0.5). Each of the output_size^2 bins averages samples_per_bin^2
/// bilinear samples placed at regular sub-bin centers. Samples farther than
/// one cell outside the map contribute zero; others are clamped to the border.
/// Returns C x output_size x output_size.
FeatureMap roi_align(const FeatureMap& feature, const Box& box, int output_size, int samples_per_bin,
                     double spatial_scale = 1.0);

}  // namespace hedseg
