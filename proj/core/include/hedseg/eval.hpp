#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hedseg/grid.hpp"
#include "hedseg/manifest.hpp"
#include "hedseg/modality.hpp"
#include "hedseg/png_io.hpp"

namespace hedseg {

/// 2|P n G| / (|P| + |G|); 1.0 when both masks are empty.
double dice_coefficient(const Mask& pred, const Mask& gt);

struct SliceScore {
  std::string slice_id;  // "<patient>/<index>"
  std::string patient;
  Modality modality = Modality::CT;
  double dice = 0.0;
};

struct ReportRow {
  std::string method;
  Modality modality = Modality::CT;
  int n = 0;
  double mean = 0.0;
  double std = 0.0;
};

struct PatientScore {
  std::string patient;
  double mean = 0.0;
  int n = 0;
};

struct EvalReport {
  std::string method;
  std::vector<ReportRow> rows;  // one per modality present
  std::vector<PatientScore> per_patient;
  std::vector<SliceScore> per_slice;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Unweighted mean and population (or sample, n-1) standard deviation.
MeanStd mean_std(const std::vector<double>& values, bool population = true);

EvalReport build_report(std::string method, std::vector<SliceScore> scores, bool population_std = true);

struct EvalOptions {
  std::string method = "HED-Mask R-CNN";
  std::optional<std::string> split;  // only records of this split
  bool population_std = true;
};

/// Scores `<pred_dir>/<patient>/<index>.png` against every original,
/// mask-bearing record of the manifest. Missing predictions count as empty.
EvalReport evaluate(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_manifest,
                    const EvalOptions& options = {});

/// "0.94±0.03"
std::string format_mean_std(double mean, double std, int decimals = 2);

void write_metrics_csv(const EvalReport& report, const std::filesystem::path& path);
EvalReport read_metrics_csv(const std::filesystem::path& path, bool population_std = true);
std::string format_report_markdown(const EvalReport& report);
/// Writes metrics.csv and report.md into `out_dir`.
void write_report(const EvalReport& report, const std::filesystem::path& out_dir);

struct ComparisonRow {
  Modality modality = Modality::CT;
  int n = 0;
  MeanStd a;
  MeanStd b;
  double delta = 0.0;  // b.mean - a.mean
};

struct Comparison {
  std::string method_a;
  std::string method_b;
  std::vector<ComparisonRow> rows;
  std::vector<std::string> notes;
};

/// Side-by-side rows with delta; both reports must cover the same slices.
Comparison compare(const EvalReport& a, const EvalReport& b);
std::string format_comparison_markdown(const Comparison& cmp);

/// Foreground pixels with a 4-neighbour outside the mask or the frame.
Mask contour(const Mask& mask);

inline constexpr std::uint8_t kGtColor[3] = {0, 255, 0};
inline constexpr std::uint8_t kPredColor[3] = {255, 0, 0};
inline constexpr std::uint8_t kBothColor[3] = {255, 255, 0};

/// Grayscale base with the ground-truth contour in green, the prediction
/// contour in red, and coincident contour pixels in yellow.
png::Rgb8 render_overlay(const Image& base, const Mask& pred, const Mask& gt);
/// Writes render_overlay as PNG with the legend in a tEXt chunk.
void overlay(const Image& base, const Mask& pred, const Mask& gt, const std::filesystem::path& path);

}  // namespace hedseg
