#include "hedseg/augment.hpp"

#include <algorithm>
#include <cmath>

#include "hedseg/enhance.hpp"
#include "hedseg/error.hpp"
#include "hedseg/rng.hpp"

namespace hedseg {
namespace {

template <typename T>
Grid<T> mirror_columns(const Grid<T>& g) {
  Grid<T> out(g.rows(), g.cols());
  for (int r = 0; r < g.rows(); ++r) {
    for (int c = 0; c < g.cols(); ++c) out(r, c) = g(r, g.cols() - 1 - c);
  }
  return out;
}

}  // namespace

void ElasticParams::validate() const {
  if (!(alpha >= 0.0)) throw Error("invalid_argument", "elastic alpha must be non-negative");
  if (!(sigma > 0.0)) throw Error("invalid_argument", "elastic sigma must be positive");
}

void AugmentPolicy::validate() const {
  if (!(sharpen_amount.lo <= sharpen_amount.hi) || sharpen_amount.lo < 0.0) {
    throw Error("invalid_config", "sharpen amount range must be a nonempty interval of non-negative values");
  }
  if (!(elastic_alpha.lo <= elastic_alpha.hi)) throw Error("invalid_config", "elastic alpha range is empty");
  if (elastic_alpha.lo < elastic_alpha_bounds.lo || elastic_alpha.hi > elastic_alpha_bounds.hi) {
    throw Error("invalid_config", "elastic alpha range outside configured bounds");
  }
  if (!(elastic_sigma > 0.0)) throw Error("invalid_config", "elastic sigma must be positive");
  if (!(sharpen_sigma > 0.0)) throw Error("invalid_config", "sharpen sigma must be positive");
}

Slice hflip(const Slice& sample) {
  Slice out = sample;
  out.pixels = mirror_columns(sample.pixels);
  if (sample.mask) out.mask = mirror_columns(*sample.mask);
  return out;
}

Slice sharpen(const Slice& sample, double amount, double sigma) {
  if (amount < 0.0) throw Error("invalid_argument", "sharpen amount must be non-negative");
  Slice out = sample;
  out.pixels = unsharp(sample.pixels, sigma, amount);
  return out;
}

double reflect_coordinate(double x, int n) {
  if (n <= 1) return 0.0;
  const double period = 2.0 * (n - 1);
  x = std::fmod(x, period);
  if (x < 0.0) x += period;
  if (x > n - 1) x = period - x;
  return x;
}

Displacement elastic_displacement(int rows, int cols, const ElasticParams& params) {
  params.validate();
  Rng rng(params.seed);
  Image dy(rows, cols), dx(rows, cols);
  for (auto& v : dy.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (auto& v : dx.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  Displacement d{gaussian_blur(dy, params.sigma), gaussian_blur(dx, params.sigma)};
  const auto alpha = static_cast<float>(params.alpha);
  for (auto& v : d.dy.values()) v *= alpha;
  for (auto& v : d.dx.values()) v *= alpha;
  return d;
}

Slice elastic_deform(const Slice& sample, const ElasticParams& params) {
  params.validate();
  const int rows = sample.pixels.rows(), cols = sample.pixels.cols();
  const Displacement d = elastic_displacement(rows, cols, params);
  Slice out = sample;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double y = reflect_coordinate(r + static_cast<double>(d.dy(r, c)), rows);
      const double x = reflect_coordinate(c + static_cast<double>(d.dx(r, c)), cols);
      const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
      const int y1 = std::min(y0 + 1, rows - 1), x1 = std::min(x0 + 1, cols - 1);
      const double wy = y - y0, wx = x - x0;
      const auto& src = sample.pixels;
      const double top = (1.0 - wx) * src(y0, x0) + wx * src(y0, x1);
      const double bottom = (1.0 - wx) * src(y1, x0) + wx * src(y1, x1);
      out.pixels(r, c) = static_cast<float>((1.0 - wy) * top + wy * bottom);
      if (sample.mask) {
        const int yn = std::clamp(static_cast<int>(std::lround(y)), 0, rows - 1);
        const int xn = std::clamp(static_cast<int>(std::lround(x)), 0, cols - 1);
        (*out.mask)(r, c) = (*sample.mask)(yn, xn);
      }
    }
  }
  return out;
}

std::vector<Slice> apply_policy(const Slice& sample, const AugmentPolicy& policy, const std::string& sample_id) {
  policy.validate();
  Rng rng(derive_seed(policy.global_seed, sample_id));
  std::vector<Slice> out{sample};
  if (policy.enable_flip) out.push_back(hflip(sample));
  if (policy.enable_sharpen) {
    const double amount = rng.uniform(policy.sharpen_amount.lo, policy.sharpen_amount.hi);
    out.push_back(sharpen(sample, amount, policy.sharpen_sigma));
  }
  if (policy.enable_elastic) {
    ElasticParams p;
    p.alpha = rng.uniform(policy.elastic_alpha.lo, policy.elastic_alpha.hi);
    p.sigma = policy.elastic_sigma;
    p.seed = rng.next_u64();
    out.push_back(elastic_deform(sample, p));
  }
  return out;
}

}  // namespace hedseg
