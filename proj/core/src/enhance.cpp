#include "hedseg/enhance.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "hedseg/error.hpp"

namespace hedseg {
namespace {

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

int bin_of(float v) {
  const int b = static_cast<int>(std::floor(static_cast<double>(v) * kClaheBins));
  return std::clamp(b, 0, kClaheBins - 1);
}

struct TileMapping {
  bool identity = false;
  std::array<double, kClaheBins> lut{};

  double apply(float v) const { return identity ? static_cast<double>(v) : lut[bin_of(v)]; }
};

std::vector<int> tile_starts(int extent, int tiles) {
  std::vector<int> starts(tiles + 1);
  for (int t = 0; t <= tiles; ++t) starts[t] = static_cast<int>(static_cast<long>(t) * extent / tiles);
  return starts;
}

// Neighbouring tile indices and the weight of the second one for coordinate x.
struct Blend {
  int a = 0;
  int b = 0;
  double w = 0.0;
};

Blend blend_for(double x, const std::vector<double>& centers) {
  const int n = static_cast<int>(centers.size());
  if (x <= centers.front()) return {0, 0, 0.0};
  if (x >= centers.back()) return {n - 1, n - 1, 0.0};
  int a = 0;
  while (a + 1 < n && centers[a + 1] <= x) ++a;
  const int b = std::min(a + 1, n - 1);
  return {a, b, (x - centers[a]) / (centers[b] - centers[a])};
}

}  // namespace

void CtEnhanceConfig::validate() const {
  if (!(clahe_clip_limit > 0.0)) throw Error("invalid_config", "CLAHE clip limit must be positive");
  if (clahe_tiles.rows < 1 || clahe_tiles.cols < 1) throw Error("invalid_config", "CLAHE tiles must be >= 1x1");
  if (!(sigmoid_gain > 0.0)) throw Error("invalid_config", "sigmoid gain must be positive");
  if (sigmoid_center && !(*sigmoid_center >= 0.0 && *sigmoid_center <= 1.0)) {
    throw Error("invalid_config", "sigmoid center must lie in [0,1]");
  }
}

void MrEnhanceConfig::validate() const {
  if (!(blur_sigma > 0.0)) throw Error("invalid_config", "blur sigma must be positive");
  if (!(amount >= 0.0)) throw Error("invalid_config", "unsharp amount must be non-negative");
}

double mean(const Image& img) {
  if (img.empty()) return 0.0;
  double s = 0.0;
  for (float v : img.values()) s += v;
  return s / static_cast<double>(img.size());
}

Image clahe(const Image& pixels, double clip_limit, TileGrid tiles) {
  if (!(clip_limit > 0.0)) throw Error("invalid_argument", "clahe: clip_limit must be positive");
  if (tiles.rows < 1 || tiles.cols < 1) throw Error("invalid_argument", "clahe: tiles must be >= 1x1");
  if (tiles.rows > pixels.rows() || tiles.cols > pixels.cols()) {
    throw Error("invalid_argument", "clahe: tile grid larger than image");
  }
  const auto row_starts = tile_starts(pixels.rows(), tiles.rows);
  const auto col_starts = tile_starts(pixels.cols(), tiles.cols);

  std::vector<TileMapping> maps(static_cast<std::size_t>(tiles.rows) * tiles.cols);
  for (int tr = 0; tr < tiles.rows; ++tr) {
    for (int tc = 0; tc < tiles.cols; ++tc) {
      std::array<double, kClaheBins> hist{};
      int first_bin = -1;
      bool single_bin = true;
      for (int r = row_starts[tr]; r < row_starts[tr + 1]; ++r) {
        for (int c = col_starts[tc]; c < col_starts[tc + 1]; ++c) {
          const int b = bin_of(pixels(r, c));
          hist[b] += 1.0;
          if (first_bin < 0) first_bin = b;
          single_bin = single_bin && b == first_bin;
        }
      }
      auto& map = maps[static_cast<std::size_t>(tr) * tiles.cols + tc];
      if (single_bin) {
        map.identity = true;
        continue;
      }
      const double n = static_cast<double>(row_starts[tr + 1] - row_starts[tr]) * (col_starts[tc + 1] - col_starts[tc]);
      const double limit = std::max(1.0, clip_limit * n / kClaheBins);
      double excess = 0.0;
      for (auto& h : hist) {
        if (h > limit) {
          excess += h - limit;
          h = limit;
        }
      }
      const double share = excess / kClaheBins;
      double cdf = 0.0;
      for (int b = 0; b < kClaheBins; ++b) {
        cdf += hist[b] + share;
        map.lut[b] = std::min(1.0, cdf / n);
      }
    }
  }

  std::vector<double> row_centers(tiles.rows), col_centers(tiles.cols);
  for (int t = 0; t < tiles.rows; ++t) row_centers[t] = (row_starts[t] + row_starts[t + 1] - 1) / 2.0;
  for (int t = 0; t < tiles.cols; ++t) col_centers[t] = (col_starts[t] + col_starts[t + 1] - 1) / 2.0;

  Image out(pixels.rows(), pixels.cols());
  for (int r = 0; r < pixels.rows(); ++r) {
    const Blend by = blend_for(r, row_centers);
    for (int c = 0; c < pixels.cols(); ++c) {
      const Blend bx = blend_for(c, col_centers);
      const float v = pixels(r, c);
      const auto map_at = [&](int tr, int tc) { return maps[static_cast<std::size_t>(tr) * tiles.cols + tc].apply(v); };
      const double top = (1.0 - bx.w) * map_at(by.a, bx.a) + bx.w * map_at(by.a, bx.b);
      const double bottom = (1.0 - bx.w) * map_at(by.b, bx.a) + bx.w * map_at(by.b, bx.b);
      out(r, c) = static_cast<float>(std::clamp((1.0 - by.w) * top + by.w * bottom, 0.0, 1.0));
    }
  }
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw Error("invalid_argument", "gaussian sigma must be positive");
  const int radius = static_cast<int>(4.0 * sigma + 0.5);
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& w : k) w /= sum;
  return k;
}

Image gaussian_blur(const Image& pixels, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  const int rows = pixels.rows(), cols = pixels.cols();
  std::vector<double> tmp(pixels.size());
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += k[i + radius] * pixels(r, reflect_index(c + i, cols));
      tmp[static_cast<std::size_t>(r) * cols + c] = s;
    }
  }
  Image out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        s += k[i + radius] * tmp[static_cast<std::size_t>(reflect_index(r + i, rows)) * cols + c];
      }
      out(r, c) = static_cast<float>(s);
    }
  }
  return out;
}

Image unsharp(const Image& pixels, double sigma, double amount) {
  if (!(amount >= 0.0)) throw Error("invalid_argument", "unsharp amount must be non-negative");
  if (amount == 0.0) return pixels;
  const Image blurred = gaussian_blur(pixels, sigma);
  Image out(pixels.rows(), pixels.cols());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double v = pixels[i] + amount * (static_cast<double>(pixels[i]) - blurred[i]);
    out[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return out;
}

Slice enhance_ct(const Slice& slice, const CtEnhanceConfig& cfg) {
  if (slice.modality != Modality::CT) throw Error("wrong_modality", "enhance_ct requires a CT slice");
  cfg.validate();
  const double target_mean = mean(slice.pixels);
  const double center = cfg.sigmoid_center.value_or(target_mean);

  const Image equalized = clahe(slice.pixels, cfg.clahe_clip_limit, cfg.clahe_tiles);
  std::vector<double> s(equalized.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = 1.0 / (1.0 + std::exp(-cfg.sigmoid_gain * (equalized[i] - center)));
  }

  // mean(clamp(s + t, 0, 1)) is continuous and nondecreasing in t; bisect for the input mean.
  const auto shifted_mean = [&](double t) {
    double acc = 0.0;
    for (double v : s) acc += std::clamp(v + t, 0.0, 1.0);
    return s.empty() ? 0.0 : acc / static_cast<double>(s.size());
  };
  double lo = -1.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (shifted_mean(mid) < target_mean ? lo : hi) = mid;
  }
  const double shift = 0.5 * (lo + hi);

  Slice out = slice;
  for (std::size_t i = 0; i < s.size(); ++i) out.pixels[i] = static_cast<float>(std::clamp(s[i] + shift, 0.0, 1.0));
  return out;
}

Slice enhance_mr(const Slice& slice, const MrEnhanceConfig& cfg) {
  if (!is_mr(slice.modality)) throw Error("wrong_modality", "enhance_mr requires an MR slice");
  cfg.validate();
  Slice out = slice;
  out.pixels = unsharp(slice.pixels, cfg.blur_sigma, cfg.amount);
  return out;
}

}  // namespace hedseg
