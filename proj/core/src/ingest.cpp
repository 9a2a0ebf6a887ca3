#include "hedseg/ingest.hpp"

#include <gdcmImageReader.h>
#include <gdcmStringFilter.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <numeric>
#include <regex>

#include "hedseg/error.hpp"
#include "hedseg/log.hpp"
#include "hedseg/png_io.hpp"
#include "hedseg/rng.hpp"

namespace fs = std::filesystem;

namespace hedseg {
namespace {

const gdcm::Tag kPatientId(0x0010, 0x0020);
const gdcm::Tag kModality(0x0008, 0x0060);
const gdcm::Tag kSeriesUid(0x0020, 0x000e);
const gdcm::Tag kSeriesDescription(0x0008, 0x103e);
const gdcm::Tag kImagePosition(0x0020, 0x0032);
const gdcm::Tag kImageOrientation(0x0020, 0x0037);
const gdcm::Tag kPixelSpacing(0x0028, 0x0030);
const gdcm::Tag kSliceThickness(0x0018, 0x0050);

struct DicomSlice {
  std::string patient_id;
  std::string series_uid;
  std::string modality;
  std::string description;
  double position = 0.0;
  PixelSpacing spacing;
  double thickness = 0.0;
  RawGrid pixels;
};

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c) && c != '\0'; };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<double> parse_ds(const std::string& s) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = s.find('\\', start);
    const std::string part = trim(s.substr(start, end == std::string::npos ? std::string::npos : end - start));
    if (!part.empty()) out.push_back(std::stod(part));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

template <typename T>
void copy_pixels(const std::vector<char>& buf, double slope, double intercept, RawGrid& out) {
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    T v;
    std::memcpy(&v, buf.data() + i * sizeof(T), sizeof(T));
    out[i] = static_cast<std::int32_t>(std::lround(static_cast<double>(v) * slope + intercept));
  }
}

std::optional<DicomSlice> read_dicom_slice(const fs::path& file) {
  gdcm::ImageReader reader;
  reader.SetFileName(file.c_str());
  if (!reader.Read()) return std::nullopt;

  const gdcm::DataSet& ds = reader.GetFile().GetDataSet();
  gdcm::StringFilter sf;
  sf.SetFile(reader.GetFile());
  const auto get = [&](const gdcm::Tag& t) -> std::string {
    return ds.FindDataElement(t) ? trim(sf.ToString(t)) : std::string();
  };

  DicomSlice s;
  s.patient_id = get(kPatientId);
  s.series_uid = get(kSeriesUid);
  s.modality = get(kModality);
  s.description = get(kSeriesDescription);

  const auto position = parse_ds(get(kImagePosition));
  const auto spacing = parse_ds(get(kPixelSpacing));
  if (position.size() != 3 || spacing.size() != 2) {
    throw Error("missing_metadata", "missing spatial metadata (ImagePositionPatient/PixelSpacing) in '" +
                                        file.string() + "'");
  }
  std::array<double, 6> orientation{1, 0, 0, 0, 1, 0};
  if (const auto o = parse_ds(get(kImageOrientation)); o.size() == 6) std::copy(o.begin(), o.end(), orientation.begin());
  const std::array<double, 3> normal{orientation[1] * orientation[5] - orientation[2] * orientation[4],
                                     orientation[2] * orientation[3] - orientation[0] * orientation[5],
                                     orientation[0] * orientation[4] - orientation[1] * orientation[3]};
  s.position = position[0] * normal[0] + position[1] * normal[1] + position[2] * normal[2];
  s.spacing = {spacing[0], spacing[1]};
  if (const auto t = parse_ds(get(kSliceThickness)); !t.empty()) s.thickness = t[0];

  const gdcm::Image& image = reader.GetImage();
  if (image.GetNumberOfDimensions() < 2) throw Error("unsupported", "not a 2-D image: '" + file.string() + "'");
  const auto& pf = image.GetPixelFormat();
  if (pf.GetSamplesPerPixel() != 1) throw Error("unsupported", "only single-sample pixels are supported");
  const int cols = static_cast<int>(image.GetDimension(0));
  const int rows = static_cast<int>(image.GetDimension(1));
  std::vector<char> buf(image.GetBufferLength());
  if (!image.GetBuffer(buf.data())) throw Error("io", "cannot decode pixel data in '" + file.string() + "'");

  s.pixels = RawGrid(rows, cols);
  const double slope = image.GetSlope();
  const double intercept = image.GetIntercept();
  switch (pf.GetScalarType()) {
    case gdcm::PixelFormat::UINT8: copy_pixels<std::uint8_t>(buf, slope, intercept, s.pixels); break;
    case gdcm::PixelFormat::INT8: copy_pixels<std::int8_t>(buf, slope, intercept, s.pixels); break;
    case gdcm::PixelFormat::UINT16: copy_pixels<std::uint16_t>(buf, slope, intercept, s.pixels); break;
    case gdcm::PixelFormat::INT16: copy_pixels<std::int16_t>(buf, slope, intercept, s.pixels); break;
    case gdcm::PixelFormat::UINT32: copy_pixels<std::uint32_t>(buf, slope, intercept, s.pixels); break;
    case gdcm::PixelFormat::INT32: copy_pixels<std::int32_t>(buf, slope, intercept, s.pixels); break;
    default: throw Error("unsupported", "unsupported pixel type in '" + file.string() + "'");
  }
  return s;
}

Modality resolve_modality(const DicomSlice& s, std::optional<Modality> hint) {
  if (s.modality == "CT") {
    if (hint && *hint != Modality::CT) throw Error("modality_conflict", "series is CT but an MR modality was requested");
    return Modality::CT;
  }
  if (s.modality == "MR") {
    if (hint) {
      if (*hint == Modality::CT) throw Error("modality_conflict", "series is MR but CT was requested");
      return *hint;
    }
    std::string d = s.description;
    std::transform(d.begin(), d.end(), d.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (d.find("T2") != std::string::npos) return Modality::MrT2;
    if (d.find("T1") != std::string::npos) return Modality::MrT1In;
    throw Error("modality_unknown", "cannot tell MR weighting from metadata; pass a modality hint");
  }
  if (hint) return *hint;
  throw Error("modality_unknown", "unsupported modality '" + s.modality + "'");
}

RawVolume load_png_series(const std::vector<fs::path>& files, const fs::path& dir, Modality modality) {
  RawVolume vol;
  vol.patient_id = dir.filename().string();
  vol.series_uid = dir.string();
  vol.modality = modality;
  std::vector<std::pair<int, fs::path>> numbered;
  static const std::regex number(R"(^(\d+)\.png$)");
  for (const auto& f : files) {
    std::smatch m;
    const std::string name = f.filename().string();
    if (std::regex_match(name, m, number)) numbered.emplace_back(std::stoi(m[1]), f);
  }
  std::sort(numbered.begin(), numbered.end());
  for (const auto& [idx, f] : numbered) {
    vol.slices.push_back(png::read_gray_integer(f));
    vol.positions.push_back(idx);
    if (vol.slices.back().rows() != vol.slices.front().rows() || vol.slices.back().cols() != vol.slices.front().cols()) {
      throw Error("inconsistent_dimensions", "inconsistent dimensions in series '" + dir.string() + "'");
    }
  }
  return vol;
}

}  // namespace

void Slice::validate() const {
  for (float v : pixels.values()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw Error("invalid_slice", "pixel outside [0,1] in slice " + patient_id);
  }
  if (mask) {
    require_same_shape(pixels, *mask, "slice mask");
    for (auto v : mask->values()) {
      if (v > 1) throw Error("invalid_slice", "mask value outside {0,1} in slice " + patient_id);
    }
  }
}

std::string DatasetSplit::split_of(const std::string& patient) const {
  if (train_patients.contains(patient)) return "train";
  if (val_patients.contains(patient)) return "val";
  if (test_patients.contains(patient)) return "test";
  return "";
}

void WindowSpec::validate(Modality modality) const {
  if (modality == Modality::CT) {
    if (!(width > 0.0)) throw Error("invalid_window", "CT window width must be positive");
  } else if (!(low_percentile >= 0.0 && low_percentile < high_percentile && high_percentile <= 1.0)) {
    throw Error("invalid_window", "MR percentiles must satisfy 0 <= low < high <= 1");
  }
}

RawVolume load_volume(const fs::path& dir, std::optional<Modality> modality_hint) {
  if (!fs::is_directory(dir)) throw Error("no_series", "no series found: '" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error("no_series", "no series found in '" + dir.string() + "'");

  const bool all_png = std::all_of(files.begin(), files.end(), [](const fs::path& p) { return p.extension() == ".png"; });
  if (all_png) {
    if (!modality_hint) throw Error("modality_unknown", "a modality hint is required for PNG series");
    return load_png_series(files, dir, *modality_hint);
  }

  std::vector<DicomSlice> slices;
  for (const auto& f : files) {
    auto s = read_dicom_slice(f);
    if (!s) {
      log::debug("skipping non-DICOM file " + f.string());
      continue;
    }
    slices.push_back(std::move(*s));
  }
  if (slices.empty()) throw Error("no_series", "no series found in '" + dir.string() + "'");

  const auto& first = slices.front();
  for (const auto& s : slices) {
    if (s.series_uid != first.series_uid || s.patient_id != first.patient_id) {
      throw Error("mixed_series", "mixed series identifiers in '" + dir.string() + "'");
    }
    if (s.pixels.rows() != first.pixels.rows() || s.pixels.cols() != first.pixels.cols()) {
      throw Error("inconsistent_dimensions", "inconsistent dimensions in series '" + dir.string() + "'");
    }
  }
  std::stable_sort(slices.begin(), slices.end(), [](const DicomSlice& a, const DicomSlice& b) { return a.position < b.position; });
  for (std::size_t i = 1; i < slices.size(); ++i) {
    if (!(slices[i].position > slices[i - 1].position)) {
      throw Error("duplicate_position", "two slices share acquisition position in '" + dir.string() + "'");
    }
  }

  RawVolume vol;
  vol.patient_id = first.patient_id.empty() ? dir.filename().string() : first.patient_id;
  vol.series_uid = first.series_uid;
  vol.modality = resolve_modality(first, modality_hint);
  vol.pixel_spacing = first.spacing;
  vol.slice_thickness = first.thickness;
  if (vol.slice_thickness <= 0.0 && slices.size() > 1) vol.slice_thickness = slices[1].position - slices[0].position;
  for (auto& s : slices) {
    vol.positions.push_back(s.position);
    vol.slices.push_back(std::move(s.pixels));
  }
  return vol;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error("invalid_argument", "percentile of empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

Normalized normalize(const RawGrid& raw, Modality modality, const WindowSpec& window) {
  window.validate(modality);
  Normalized out{Image(raw.rows(), raw.cols()), std::nullopt};
  double lo = 0.0, hi = 0.0;
  if (modality == Modality::CT) {
    lo = window.center - window.width / 2.0;
    hi = window.center + window.width / 2.0;
  } else {
    std::vector<double> v(raw.values().begin(), raw.values().end());
    if (v.empty()) return out;
    std::sort(v.begin(), v.end());
    lo = percentile(v, window.low_percentile);
    hi = percentile(std::move(v), window.high_percentile);
    if (!(hi > lo)) {
      out.warning = "constant MR slice: percentile range is empty, output set to zero";
      return out;
    }
  }
  const double scale = 1.0 / (hi - lo);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double x = (static_cast<double>(raw[i]) - lo) * scale;
    out.pixels[i] = static_cast<float>(std::clamp(x, 0.0, 1.0));
  }
  return out;
}

DatasetSplit split_patients(std::vector<std::string> patient_ids, const SplitCounts& counts, std::uint64_t seed) {
  std::sort(patient_ids.begin(), patient_ids.end());
  if (std::adjacent_find(patient_ids.begin(), patient_ids.end()) != patient_ids.end()) {
    throw Error("invalid_split", "duplicate patient identifiers");
  }
  const long n = static_cast<long>(patient_ids.size());
  if (counts.train < 0 || counts.val < 0) throw Error("invalid_split", "split counts must be non-negative");
  const long fixed = static_cast<long>(counts.train) + counts.val + std::max(counts.test, 0);
  if (fixed > n) {
    throw Error("invalid_split", "requested " + std::to_string(fixed) + " patients but only " + std::to_string(n) +
                                     " are available");
  }
  // Fisher-Yates with our own generator so the split is stable across platforms.
  Rng rng(mix64(seed ^ 0x5eed5711ULL));
  for (long i = n - 1; i > 0; --i) {
    const auto j = static_cast<long>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(patient_ids[i], patient_ids[j]);
  }
  DatasetSplit split;
  long k = 0;
  for (; k < counts.train; ++k) split.train_patients.insert(patient_ids[k]);
  for (; k < counts.train + counts.val; ++k) split.val_patients.insert(patient_ids[k]);
  const long test_end = counts.test < 0 ? n : k + counts.test;
  for (; k < test_end; ++k) split.test_patients.insert(patient_ids[k]);
  return split;
}

void export_png(const Slice& slice, const fs::path& path) {
  slice.validate();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  png::write_gray16(path, slice.pixels);
}

void export_mask_png(const Mask& mask, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  png::write_mask(path, mask);
}

Image import_png(const fs::path& path) { return png::read_gray(path); }
Mask import_mask_png(const fs::path& path) { return png::read_mask(path); }

}  // namespace hedseg
