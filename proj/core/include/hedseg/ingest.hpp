#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hedseg/grid.hpp"
#include "hedseg/modality.hpp"

namespace hedseg {

using RawGrid = Grid<std::int32_t>;

struct PixelSpacing {
  double row_mm = 1.0;
  double col_mm = 1.0;
};

/// One series of one patient, slices ordered by acquisition position.
/// CT intensities are Hounsfield units (rescale slope/intercept applied).
struct RawVolume {
  std::string patient_id;
  std::string series_uid;
  Modality modality = Modality::CT;
  std::vector<RawGrid> slices;
  std::vector<double> positions;  // along the slice normal, strictly increasing
  PixelSpacing pixel_spacing;
  double slice_thickness = 0.0;
};

struct Slice {
  std::string patient_id;
  int slice_index = 0;
  Modality modality = Modality::CT;
  Image pixels;
  std::optional<Mask> mask;

  /// Throws if pixels leave [0,1] or the mask is malformed.
  void validate() const;
};

struct DatasetSplit {
  std::set<std::string> train_patients;
  std::set<std::string> val_patients;
  /// Held-out patients (neither train nor val). Empty when counts cover everything.
  std::set<std::string> test_patients;

  std::string split_of(const std::string& patient) const;
};

struct SplitCounts {
  int train = 0;
  int val = 0;
  /// -1: every remaining patient goes to test.
  int test = -1;
};

/// CT uses center/width in HU; MR uses intensity percentiles (fractions).
struct WindowSpec {
  double center = 40.0;
  double width = 400.0;
  double low_percentile = 0.01;
  double high_percentile = 0.99;

  void validate(Modality modality) const;
};

/// Reads every DICOM file in `dir` (one series). A directory of numbered PNGs
/// (0.png, 1.png, ...) is accepted as a pre-exported series when a modality
/// hint is given; their 16-bit values are taken as raw intensities.
RawVolume load_volume(const std::filesystem::path& dir, std::optional<Modality> modality_hint = std::nullopt);

struct Normalized {
  Image pixels;
  std::optional<std::string> warning;
};

/// CT: clamp to the window and map affinely to [0,1].
/// MR: map [p_low, p_high] percentiles (linear interpolation between order
/// statistics) to [0,1] with clamping; a constant slice yields zeros plus a warning.
Normalized normalize(const RawGrid& raw, Modality modality, const WindowSpec& window);

/// Linear-interpolated percentile of `values` at fraction q in [0,1].
double percentile(std::vector<double> values, double q);

/// Patient-level partition, deterministic in `seed`.
DatasetSplit split_patients(std::vector<std::string> patient_ids, const SplitCounts& counts, std::uint64_t seed);

void export_png(const Slice& slice, const std::filesystem::path& path);
void export_mask_png(const Mask& mask, const std::filesystem::path& path);
Image import_png(const std::filesystem::path& path);
Mask import_mask_png(const std::filesystem::path& path);

}  // namespace hedseg
