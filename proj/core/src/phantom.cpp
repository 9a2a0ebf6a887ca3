#include "hedseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "hedseg/error.hpp"
#include "hedseg/ingest.hpp"
#include "hedseg/rng.hpp"

namespace fs = std::filesystem;

namespace hedseg {
namespace {

std::string patient_name(int k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "P%03d", k + 1);
  return buf;
}

// Normalized radial coordinate; <= 1 inside.
double radial(const Ellipse& e, double y, double x) {
  const double dy = y - e.cy, dx = x - e.cx;
  const double c = std::cos(e.theta), s = std::sin(e.theta);
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  return (u * u) / (e.a * e.a) + (v * v) / (e.b * e.b);
}

}  // namespace

bool Ellipse::contains(double y, double x) const { return radial(*this, y, x) <= 1.0; }

Mask rasterize(const Ellipse& e, int rows, int cols) {
  Mask m(rows, cols, 0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = e.contains(r + 0.5, c + 0.5) ? 1 : 0;
  }
  return m;
}

void PhantomSpec::validate() const {
  if (count < 0) throw Error("invalid_config", "phantom count must be >= 0");
  if (image_size < 16) throw Error("invalid_config", "phantom image size must be >= 16");
  if (slices_per_patient < 1) throw Error("invalid_config", "slices per patient must be >= 1");
  if (!(liver_semi_major.lo > 0.0 && liver_semi_major.lo <= liver_semi_major.hi && liver_semi_major.hi < 0.45)) {
    throw Error("invalid_config", "liver semi-major range must lie in (0, 0.45)");
  }
  if (!(liver_eccentricity.lo >= 0.0 && liver_eccentricity.lo <= liver_eccentricity.hi && liver_eccentricity.hi < 1.0)) {
    throw Error("invalid_config", "liver eccentricity range must lie in [0, 1)");
  }
  if (distractors_min < 0 || distractors_max < distractors_min) throw Error("invalid_config", "invalid distractor count range");
  if (!(noise >= 0.0)) throw Error("invalid_config", "phantom noise must be >= 0");
}

std::vector<Phantom> generate_phantoms(const PhantomSpec& spec) {
  spec.validate();
  const int n = spec.image_size;
  const double size = n;
  std::vector<Phantom> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  for (int k = 0; k < spec.count; ++k) {
    Phantom p;
    p.patient = patient_name(k / spec.slices_per_patient);
    p.index = k % spec.slices_per_patient;
    Rng rng(derive_seed(spec.seed, p.patient + "/" + std::to_string(p.index)));

    // Body: large ellipse around the center.
    const Ellipse body{size * rng.uniform(0.47, 0.53), size * rng.uniform(0.47, 0.53), size * rng.uniform(0.42, 0.47),
                       size * rng.uniform(0.36, 0.42), rng.uniform(-0.15, 0.15)};
    const double body_level = rng.uniform(0.25, 0.35);

    const double a = size * rng.uniform(spec.liver_semi_major.lo, spec.liver_semi_major.hi);
    const double ecc = rng.uniform(spec.liver_eccentricity.lo, spec.liver_eccentricity.hi);
    const double b = a * std::sqrt(1.0 - ecc * ecc);
    const double margin = a + 2.0;
    p.liver = Ellipse{rng.uniform(margin, size - margin), rng.uniform(margin, size - margin), a, b,
                      rng.uniform(0.0, std::numbers::pi)};
    const double liver_level = rng.uniform(0.55, 0.7);
    const double ramp = rng.uniform(-0.08, 0.08);  // shading across the liver

    const int nd = spec.distractors_min + static_cast<int>(rng.below(spec.distractors_max - spec.distractors_min + 1));
    std::vector<double> levels;
    for (int d = 0; d < nd; ++d) {
      const double da = size * rng.uniform(0.05, 0.12);
      p.distractors.push_back(Ellipse{size * rng.uniform(0.15, 0.85), size * rng.uniform(0.15, 0.85), da,
                                      da * rng.uniform(0.5, 1.0), rng.uniform(0.0, std::numbers::pi)});
      levels.push_back(rng.uniform(0.4, 0.95));
    }

    p.image = Image(n, n, 0.0f);
    p.mask = rasterize(p.liver, n, n);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        const double y = r + 0.5, x = c + 0.5;
        double v = 0.03;
        if (body.contains(y, x)) v = body_level;
        for (std::size_t d = 0; d < p.distractors.size(); ++d) {
          if (p.distractors[d].contains(y, x)) v = levels[d];
        }
        if (p.mask(r, c)) v = liver_level + ramp * (x - p.liver.cx) / p.liver.a;
        v += spec.noise * rng.normal();
        p.image(r, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

Manifest write_phantoms(const PhantomSpec& spec, const fs::path& dir) {
  const auto phantoms = generate_phantoms(spec);
  fs::create_directories(dir);
  Manifest manifest;
  for (const auto& p : phantoms) {
    ManifestRecord rec;
    rec.patient = p.patient;
    rec.index = p.index;
    rec.modality = spec.modality;
    rec.image = "slices/" + rec.stem() + ".png";
    rec.mask = "masks/" + rec.stem() + ".png";
    Slice s{p.patient, p.index, spec.modality, p.image, p.mask};
    export_png(s, dir / rec.image);
    export_mask_png(p.mask, dir / rec.mask);
    manifest.records.push_back(std::move(rec));
  }
  manifest.write(dir / "manifest.txt");
  return manifest;
}

}  // namespace hedseg
