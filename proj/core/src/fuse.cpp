#include "hedseg/fuse.hpp"

#include "hedseg/error.hpp"

namespace hedseg {

FusedSample fuse(const Slice& enhanced, const Image& edge) {
  require_same_shape(enhanced.pixels, edge, "fuse");
  FusedSample out{Image(edge.rows(), edge.cols()), enhanced.patient_id + "/" + std::to_string(enhanced.slice_index), {}};
  for (std::size_t i = 0; i < edge.size(); ++i) out.plane[i] = enhanced.pixels[i] * edge[i];
  return out;
}

FusedSample replicate(const Slice& enhanced) {
  return {enhanced.pixels, enhanced.patient_id + "/" + std::to_string(enhanced.slice_index), {}};
}

}  // namespace hedseg
