#pragma once

#include <optional>

#include "hedseg/grid.hpp"
#include "hedseg/ingest.hpp"

namespace hedseg {

struct TileGrid {
  int rows = 8;
  int cols = 8;
};

struct CtEnhanceConfig {
  double clahe_clip_limit = 2.0;  // relative to the uniform bin height
  TileGrid clahe_tiles{8, 8};
  double sigmoid_gain = 10.0;
  std::optional<double> sigmoid_center;  // nullopt = input mean

  void validate() const;
};

struct MrEnhanceConfig {
  double blur_sigma = 2.0;
  double amount = 1.0;

  void validate() const;
};

inline constexpr int kClaheBins = 256;

/// Contrast-limited adaptive histogram equalization.
///
/// The image is split into `tiles` (tile r spans rows [r*H/R, (r+1)*H/R)).
/// Each tile gets a 256-bin histogram; counts above clip_limit * N / 256 are
/// clipped and the excess is spread evenly over all bins. The tile mapping is
/// the normalized cumulative histogram, evaluated at the pixel's bin. Pixels
/// blend the mappings of the (up to) four nearest tile centers bilinearly.
/// A tile whose pixels all fall in one bin keeps the identity mapping, so
/// flat regions pass through unchanged.
Image clahe(const Image& pixels, double clip_limit, TileGrid tiles);

/// Gaussian blur with reflected borders (d c b a | a b c d | d c b a) and the
/// kernel truncated at radius round(4 sigma).
Image gaussian_blur(const Image& pixels, double sigma);
std::vector<double> gaussian_kernel(double sigma);

/// clamp(in + amount * (in - blur(in, sigma)), 0, 1). amount == 0 returns a copy.
Image unsharp(const Image& pixels, double sigma, double amount);

/// CLAHE, then a logistic curve around the center, then a clamped shift that
/// restores the input mean.
Slice enhance_ct(const Slice& slice, const CtEnhanceConfig& cfg);
Slice enhance_mr(const Slice& slice, const MrEnhanceConfig& cfg);

double mean(const Image& img);

}  // namespace hedseg
