#include "hedseg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "hedseg/error.hpp"
#include "hedseg/log.hpp"

namespace fs = std::filesystem;

namespace hedseg {

double dice_coefficient(const Mask& pred, const Mask& gt) {
  require_same_shape(pred, gt, "dice_coefficient");
  std::size_t p = 0, g = 0, both = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool a = pred[i] != 0, b = gt[i] != 0;
    p += a;
    g += b;
    both += a && b;
  }
  if (p + g == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
}

MeanStd mean_std(const std::vector<double>& values, bool population) {
  if (values.empty()) return {};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double denom = population ? static_cast<double>(values.size()) : static_cast<double>(values.size()) - 1.0;
  return {mean, denom > 0.0 ? std::sqrt(ss / denom) : 0.0};
}

EvalReport build_report(std::string method, std::vector<SliceScore> scores, bool population_std) {
  EvalReport report;
  report.method = std::move(method);
  std::map<Modality, std::vector<double>> by_modality;
  std::map<std::string, std::vector<double>> by_patient;
  for (const auto& s : scores) {
    by_modality[s.modality].push_back(s.dice);
    by_patient[s.patient].push_back(s.dice);
  }
  for (const auto& [modality, values] : by_modality) {
    const auto ms = mean_std(values, population_std);
    report.rows.push_back({report.method, modality, static_cast<int>(values.size()), ms.mean, ms.std});
  }
  for (const auto& [patient, values] : by_patient) {
    report.per_patient.push_back({patient, mean_std(values).mean, static_cast<int>(values.size())});
  }
  report.per_slice = std::move(scores);
  return report;
}

EvalReport evaluate(const fs::path& pred_dir, const fs::path& gt_manifest, const EvalOptions& options) {
  const Manifest manifest = Manifest::read(gt_manifest);
  const fs::path root = gt_manifest.parent_path();
  std::vector<SliceScore> scores;
  for (const auto* rec : manifest.select(options.split, true)) {
    if (!rec->has_mask()) continue;
    const Mask gt = png::read_mask(root / rec->mask);
    const fs::path pred_path = pred_dir / (rec->stem() + ".png");
    Mask pred(gt.rows(), gt.cols(), 0);
    if (fs::exists(pred_path)) {
      pred = png::read_mask(pred_path);
    } else {
      log::warn("no prediction for " + rec->sample_id() + "; scoring as empty");
    }
    scores.push_back({rec->sample_id(), rec->patient, rec->modality, dice_coefficient(pred, gt)});
  }
  return build_report(options.method, std::move(scores), options.population_std);
}

std::string format_mean_std(double mean, double std, int decimals) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(decimals) << mean << "±" << std;
  return os.str();
}

void write_metrics_csv(const EvalReport& report, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write '" + path.string() + "'");
  out << "slice,patient,modality,method,dice\n";
  out << std::setprecision(17);
  for (const auto& s : report.per_slice) {
    out << s.slice_id << ',' << s.patient << ',' << to_string(s.modality) << ',' << report.method << ',' << s.dice
        << '\n';
  }
}

EvalReport read_metrics_csv(const fs::path& path, bool population_std) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot read '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  std::vector<SliceScore> scores;
  std::string method;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 5) throw Error("io", "malformed metrics row: " + line);
    method = f[3];
    scores.push_back({f[0], f[1], parse_modality(f[2]), std::stod(f[4])});
  }
  return build_report(method, std::move(scores), population_std);
}

std::string format_report_markdown(const EvalReport& report) {
  std::ostringstream os;
  os << "# Liver segmentation: " << report.method << "\n\n";
  os << "| Method | Modality | N | Dice |\n|---|---|---|---|\n";
  for (const auto& r : report.rows) {
    os << "| " << r.method << " | " << to_string(r.modality) << " | " << r.n << " | " << format_mean_std(r.mean, r.std)
       << " |\n";
  }
  os << "\nN = number of slices\n\n## Per patient\n\n| Patient | N | Mean Dice |\n|---|---|---|\n";
  for (const auto& p : report.per_patient) {
    os << "| " << p.patient << " | " << p.n << " | " << std::fixed << std::setprecision(4) << p.mean << " |\n";
  }
  return os.str();
}

void write_report(const EvalReport& report, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  write_metrics_csv(report, out_dir / "metrics.csv");
  std::ofstream md(out_dir / "report.md");
  if (!md) throw Error("io", "cannot write report.md in '" + out_dir.string() + "'");
  md << format_report_markdown(report);
}

Comparison compare(const EvalReport& a, const EvalReport& b) {
  std::set<std::string> sa, sb;
  for (const auto& s : a.per_slice) sa.insert(s.slice_id);
  for (const auto& s : b.per_slice) sb.insert(s.slice_id);
  if (sa != sb) throw Error("mismatched_slices", "compared reports cover different slice sets");
  Comparison cmp{a.method, b.method, {}, {}};
  for (const auto& ra : a.rows) {
    const auto rb = std::find_if(b.rows.begin(), b.rows.end(), [&](const ReportRow& r) { return r.modality == ra.modality; });
    if (rb == b.rows.end()) continue;
    cmp.rows.push_back({ra.modality, ra.n, {ra.mean, ra.std}, {rb->mean, rb->std}, rb->mean - ra.mean});
  }
  return cmp;
}

std::string format_comparison_markdown(const Comparison& cmp) {
  std::ostringstream os;
  os << "# Comparison: " << cmp.method_a << " vs " << cmp.method_b << "\n\n";
  os << "| Modality | N | " << cmp.method_a << " Dice | " << cmp.method_b << " Dice | Delta |\n";
  os << "|---|---|---|---|---|\n";
  for (const auto& r : cmp.rows) {
    std::ostringstream delta;
    delta << std::showpos << std::fixed << std::setprecision(2) << r.delta;
    os << "| " << to_string(r.modality) << " | " << r.n << " | " << format_mean_std(r.a.mean, r.a.std) << " | "
       << format_mean_std(r.b.mean, r.b.std) << " | " << delta.str() << " |\n";
  }
  if (!cmp.notes.empty()) {
    os << "\n";
    for (const auto& n : cmp.notes) os << "- " << n << "\n";
  }
  return os.str();
}

Mask contour(const Mask& mask) {
  Mask out(mask.rows(), mask.cols(), 0);
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < mask.cols(); ++c) {
      if (!mask(r, c)) continue;
      const bool edge = !mask.in_bounds(r - 1, c) || !mask(r - 1, c) || !mask.in_bounds(r + 1, c) || !mask(r + 1, c) ||
                        !mask.in_bounds(r, c - 1) || !mask(r, c - 1) || !mask.in_bounds(r, c + 1) || !mask(r, c + 1);
      out(r, c) = edge ? 1 : 0;
    }
  }
  return out;
}

png::Rgb8 render_overlay(const Image& base, const Mask& pred, const Mask& gt) {
  require_same_shape(base, pred, "overlay");
  require_same_shape(base, gt, "overlay");
  const Mask pc = contour(pred), gc = contour(gt);
  png::Rgb8 img{base.rows(), base.cols(), std::vector<std::uint8_t>(base.size() * 3)};
  for (int r = 0; r < base.rows(); ++r) {
    for (int c = 0; c < base.cols(); ++c) {
      std::uint8_t* px = img.px(r, c);
      const std::uint8_t* color = nullptr;
      if (pc(r, c) && gc(r, c)) {
        color = kBothColor;
      } else if (pc(r, c)) {
        color = kPredColor;
      } else if (gc(r, c)) {
        color = kGtColor;
      }
      if (color) {
        std::copy(color, color + 3, px);
      } else {
        const auto g = static_cast<std::uint8_t>(std::lround(std::clamp(static_cast<double>(base(r, c)), 0.0, 1.0) * 255.0));
        px[0] = px[1] = px[2] = g;
      }
    }
  }
  return img;
}

void overlay(const Image& base, const Mask& pred, const Mask& gt, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  png::write_rgb8(path, render_overlay(base, pred, gt),
                  {{"Legend", "green: ground truth contour; red: predicted contour; yellow: coincident"}});
}

}  // namespace hedseg
