#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hedseg/augment.hpp"
#include "hedseg/grid.hpp"
#include "hedseg/manifest.hpp"
#include "hedseg/modality.hpp"

namespace hedseg {

/// Rotated ellipse; `a` is the semi-axis along the rotated x axis.
struct Ellipse {
  double cy = 0.0;
  double cx = 0.0;
  double a = 1.0;
  double b = 1.0;
  double theta = 0.0;  // radians

  /// Interior predicate (boundary included) at a point in pixel coordinates.
  bool contains(double y, double x) const;
};

/// Rasterizes the interior predicate at pixel centers (r + 0.5, c + 0.5).
Mask rasterize(const Ellipse& e, int rows, int cols);

struct PhantomSpec {
  int count = 200;  // slices
  int image_size = 128;
  int slices_per_patient = 10;
  Interval liver_semi_major{0.22, 0.32};  // fraction of the image size
  Interval liver_eccentricity{0.3, 0.8};
  int distractors_min = 2;
  int distractors_max = 4;
  double noise = 0.03;  // Gaussian sigma, intensity units
  Modality modality = Modality::CT;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Phantom {
  std::string patient;
  int index = 0;
  Image image;
  Mask mask;
  Ellipse liver;
  std::vector<Ellipse> distractors;
};

/// Body ellipse, distractor blobs, then the liver ellipse drawn on top with a
/// smooth intensity ramp, plus Gaussian noise. Slice k of the dataset belongs
/// to patient "P<k / slices_per_patient + 1>" (zero padded to three digits).
std::vector<Phantom> generate_phantoms(const PhantomSpec& spec);

/// Writes slices/<patient>/<index>.png (16-bit), masks/<patient>/<index>.png
/// and manifest.txt under `dir`; returns the manifest.
Manifest write_phantoms(const PhantomSpec& spec, const std::filesystem::path& dir);

}  // namespace hedseg
