#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hedseg/grid.hpp"
#include "hedseg/ingest.hpp"

namespace hedseg {

struct ElasticParams {
  double alpha = 1.0;  // displacement scale, pixels
  double sigma = 0.4;  // smoothing of the random field, pixels
  std::uint64_t seed = 0;

  void validate() const;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct AugmentPolicy {
  bool enable_flip = true;
  bool enable_sharpen = true;
  bool enable_elastic = true;
  Interval sharpen_amount{0.5, 1.5};
  double sharpen_sigma = 1.0;
  Interval elastic_alpha{0.5, 3.5};
  double elastic_sigma = 0.4;
  Interval elastic_alpha_bounds{0.0, 10.0};
  std::uint64_t global_seed = 0;

  void validate() const;
};

/// Per-pixel displacement field (dy, dx) as used by elastic_deform.
struct Displacement {
  Image dy;
  Image dx;
};

Slice hflip(const Slice& sample);
Slice sharpen(const Slice& sample, double amount, double sigma = 1.0);

/// Uniform[-1,1] fields from `seed`, Gaussian-smoothed with sigma, scaled by alpha.
Displacement elastic_displacement(int rows, int cols, const ElasticParams& params);

/// Image: bilinear sample at (r + dy, c + dx); mask: nearest neighbour at the
/// same location. Coordinates outside the frame are mirrored back inside.
Slice elastic_deform(const Slice& sample, const ElasticParams& params);

/// Mirror a continuous coordinate into [0, n-1].
double reflect_coordinate(double x, int n);

/// Original followed by the enabled variants (flip, sharpen, elastic), each
/// reproducible from (policy.global_seed, sample_id).
std::vector<Slice> apply_policy(const Slice& sample, const AugmentPolicy& policy, const std::string& sample_id);

}  // namespace hedseg
