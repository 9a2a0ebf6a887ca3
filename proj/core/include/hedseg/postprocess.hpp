#pragma once

#include <vector>

#include "hedseg/grid.hpp"

namespace hedseg {

struct InstanceDetection;

struct FinalMask {
  Mask mask;
  double score = 0.0;  // score of the detection it came from; 0 when empty
  bool empty() const { return count_foreground(mask) == 0; }
};

struct RefineOptions {
  bool keep_largest_component = true;
  bool fill_holes = true;
};

/// Keeps the largest 8-connected foreground component (first in raster order on ties).
Mask largest_component(const Mask& mask);

/// Fills background regions that are not 4-connected to the frame border.
Mask fill_holes(const Mask& mask);

/// Highest-score liver detection, then largest component, then hole filling.
/// `rows`/`cols` size the empty mask returned when there are no detections.
FinalMask refine(const std::vector<InstanceDetection>& detections, int rows, int cols,
                 const RefineOptions& options = {});

}  // namespace hedseg
