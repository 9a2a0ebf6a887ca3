#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hedseg/modality.hpp"

namespace hedseg {

/// One slice (or augmented sample) in a line-delimited key=value manifest:
///
///   patient=P003 index=12 modality=CT image=slices/P003/12.png mask=masks/P003/12.png split=train
///
/// Paths are relative to the manifest's directory. Values are percent-escaped
/// for space, '%', '=' and newline.
struct ManifestRecord {
  std::string patient;
  int index = 0;
  Modality modality = Modality::CT;
  std::string image;
  std::string mask;   // empty when the slice has no ground truth
  std::string split;  // "train", "val", "test" or empty
  int variant = 0;    // 0 = original slice, k > 0 = k-th augmented variant
  std::map<std::string, std::string> extra;

  /// "<patient>/<index>" for originals, "<patient>/<index>~<variant>" otherwise.
  std::string sample_id() const;
  /// Relative path stem "<patient>/<index>" or "<patient>/<index>_a<variant>".
  std::string stem() const;
  bool has_mask() const { return !mask.empty(); }
};

struct Manifest {
  std::vector<ManifestRecord> records;

  static Manifest read(const std::filesystem::path& path);
  void write(const std::filesystem::path& path) const;

  std::vector<const ManifestRecord*> select(std::optional<std::string> split, bool originals_only) const;
};

/// Percent-escaping used for manifest values.
std::string escape(const std::string& v);
std::string unescape(const std::string& v);

std::string format_record(const ManifestRecord& rec);
ManifestRecord parse_record(const std::string& line);

}  // namespace hedseg
