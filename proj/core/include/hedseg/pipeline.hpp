#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hedseg/config.hpp"
#include "hedseg/eval.hpp"

namespace hedseg {

enum class Stage { Convert, Enhance, TrainHed, Edges, Fuse, TrainSeg, Infer, Postprocess, Eval };

const std::vector<Stage>& all_stages();
std::string to_string(Stage s);
Stage parse_stage(const std::string& s);
/// Stages whose outputs `s` reads, given whether edge fusion is on.
std::vector<Stage> prerequisites(Stage s, bool fusion);

/// run.manifest: config hash, seed and per-stage completion (stage -> config
/// hash it completed under).
struct RunState {
  std::string name;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> completed;

  static RunState read(const std::filesystem::path& run_dir);
  void write(const std::filesystem::path& run_dir) const;
  bool done(Stage s) const { return completed.contains(to_string(s)); }
};

struct PipelineOptions {
  /// Skip stages already completed under the same configuration hash.
  bool skip_completed = false;
};

/// Runs `stages` in pipeline order inside `run_dir`, writing config.txt and
/// run.manifest. Throws Error("missing_stage", "missing stage: <name>") when a
/// prerequisite has not completed.
void run_pipeline(const RunConfig& cfg, const std::filesystem::path& run_dir, std::vector<Stage> stages,
                  const PipelineOptions& options = {});

// Well-known paths inside a run directory.
namespace layout {
inline constexpr const char* kConfig = "config.txt";
inline constexpr const char* kRunManifest = "run.manifest";
inline constexpr const char* kSlices = "slices.txt";
inline constexpr const char* kEnhanced = "enhanced.txt";
inline constexpr const char* kEdges = "edges.txt";
inline constexpr const char* kFused = "fused.txt";
inline constexpr const char* kDetections = "detections.txt";
inline constexpr const char* kHedCheckpoint = "checkpoints/hed.pt";
inline constexpr const char* kSegBest = "checkpoints/seg_best.pt";
inline constexpr const char* kHedLoss = "logs/hed_loss.csv";
inline constexpr const char* kSegLoss = "logs/seg_loss.csv";
inline constexpr const char* kPreds = "preds";
inline constexpr const char* kReport = "report";
}  // namespace layout

/// One line of detections.txt.
struct DetectionRecord {
  std::string slice_id;
  int class_id = 0;
  double score = 0.0;
  Box box;
  std::string mask;  // relative to the run directory

  std::string format() const;
  static DetectionRecord parse(const std::string& line);
};

std::vector<DetectionRecord> read_detections(const std::filesystem::path& path);

struct AblationResult {
  EvalReport baseline;
  EvalReport fused;
  Comparison comparison;
};

/// Runs the pipeline twice under `dir` (baseline/: no edge fusion, fused/:
/// full pipeline) with the same data, split and seeds, and writes
/// dir/comparison.md. Variants already completed under the same config are
/// reused.
AblationResult run_ablation(const RunConfig& cfg, const std::filesystem::path& dir);

/// Reference values for the annotation in the ablation report.
std::vector<std::string> reference_notes();

}  // namespace hedseg
