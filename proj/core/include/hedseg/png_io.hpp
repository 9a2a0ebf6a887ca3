#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hedseg/grid.hpp"

namespace hedseg::png {

/// Interleaved 8-bit RGB raster.
struct Rgb8 {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> data;  // rows*cols*3

  std::uint8_t* px(int r, int c) { return &data[(static_cast<std::size_t>(r) * cols + c) * 3]; }
  const std::uint8_t* px(int r, int c) const { return &data[(static_cast<std::size_t>(r) * cols + c) * 3]; }
};

/// 16-bit grayscale; values are quantized as round(v * 65535).
void write_gray16(const std::filesystem::path& path, const Image& img);
/// 16-bit RGB with three identical channels.
void write_gray16_as_rgb(const std::filesystem::path& path, const Image& img);
/// Reads 8/16-bit gray, gray+alpha, RGB or RGBA; returns the first channel scaled to [0,1].
Image read_gray(const std::filesystem::path& path);

/// Raw integer samples of the first channel (8- or 16-bit).
Grid<std::int32_t> read_gray_integer(const std::filesystem::path& path);

/// 8-bit {0,255}.
void write_mask(const std::filesystem::path& path, const Mask& mask);
/// Any 8/16-bit PNG; pixels above half range become 1.
Mask read_mask(const std::filesystem::path& path);

void write_rgb8(const std::filesystem::path& path, const Rgb8& img,
                const std::map<std::string, std::string>& text = {});
Rgb8 read_rgb8(const std::filesystem::path& path);
std::map<std::string, std::string> read_text_chunks(const std::filesystem::path& path);

}  // namespace hedseg::png
