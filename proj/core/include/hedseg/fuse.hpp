#pragma once

#include <string>

#include "hedseg/grid.hpp"
#include "hedseg/ingest.hpp"

namespace hedseg {

/// Detector input: enhanced image multiplied by the edge map. The three
/// channels are identical, so a single plane is stored.
struct FusedSample {
  Image plane;
  std::string source_id;
  std::string edge_id;

  static constexpr int kChannels = 3;
};

/// Pixelwise product, no renormalization.
FusedSample fuse(const Slice& enhanced, const Image& edge);

/// Baseline variant: the enhanced image replicated without an edge map.
FusedSample replicate(const Slice& enhanced);

}  // namespace hedseg
