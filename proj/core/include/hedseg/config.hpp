#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "hedseg/augment.hpp"
#include "hedseg/enhance.hpp"
#include "hedseg/hed.hpp"
#include "hedseg/ingest.hpp"
#include "hedseg/kv.hpp"
#include "hedseg/maskrcnn.hpp"
#include "hedseg/phantom.hpp"
#include "hedseg/postprocess.hpp"

namespace hedseg {

enum class Profile { Full, Toy };

/// Everything a run needs. Serialized as one flat key = value file with
/// dotted keys ("hed.iterations = 300"); see RunConfig::to_document.
struct RunConfig {
  std::string name = "run";
  std::uint64_t seed = 0;
  Profile profile = Profile::Full;

  // Input data. source is a directory of per-patient DICOM series, a
  // manifest file, or the literal "phantoms" (generated from `phantoms`).
  std::string data_source;
  std::string data_masks;  // DICOM only: <root>/<patient>/<index>.png
  std::string data_modality = "auto";
  SplitCounts split{14, 3, -1};
  WindowSpec window;
  PhantomSpec phantoms;

  std::string enhance_modality = "auto";  // auto | ct | mr
  CtEnhanceConfig ct;
  MrEnhanceConfig mr;

  bool augment_enabled = true;
  AugmentPolicy augment;

  HedConfig hed;
  int hed_iterations = 2000;
  int hed_batch = 4;
  double hed_learning_rate = 1e-4;
  int hed_checkpoint_every = 0;
  std::string hed_checkpoint;  // empty: checkpoints/hed.pt in the run dir

  bool fusion = true;  // false: enhanced image goes straight to the detector

  DetectorConfig detector;
  int seg_epochs = 10;
  int seg_images_per_batch = 2;
  double seg_learning_rate = 1e-4;
  double seg_grad_clip = 5.0;
  std::string seg_checkpoint;  // empty: checkpoints/seg_best.pt in the run dir

  RefineOptions post;

  std::string eval_method = "HED-Mask R-CNN";
  std::string eval_split = "auto";  // auto = test if any, else val, else all
  bool eval_population_std = true;
  bool eval_overlays = true;

  /// Full-scale defaults or the reduced CPU profile.
  static RunConfig defaults(Profile profile = Profile::Full);

  kv::Document to_document() const;
  /// Keys absent from `doc` keep the defaults of the profile named in `doc`.
  static RunConfig from_document(const kv::Document& doc);
  static RunConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  void validate() const;
  /// Stable 16-hex-digit hash of the canonical serialization.
  std::string hash() const;
};

std::string to_string(Profile p);
Profile parse_profile(const std::string& s);

}  // namespace hedseg
