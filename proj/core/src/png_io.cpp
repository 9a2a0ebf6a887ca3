#include "hedseg/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include "hedseg/error.hpp"

namespace hedseg::png {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct RawPng {
  int width = 0;
  int height = 0;
  int bit_depth = 8;  // 8 or 16
  int channels = 1;
  std::vector<std::uint8_t> bytes;  // big-endian samples for 16-bit
  std::map<std::string, std::string> text;
};

// libpng reports errors through longjmp; keep only trivially destructible
// state live across setjmp and translate failures into exceptions afterwards.
void write_raw(const std::filesystem::path& path, const RawPng& img) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error("io", "cannot open '" + path.string() + "' for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("io", "libpng initialization failed");
  }

  std::vector<png_text> text_entries;
  text_entries.reserve(img.text.size());
  for (const auto& [k, v] : img.text) {
    png_text t{};
    t.compression = PNG_TEXT_COMPRESSION_NONE;
    t.key = const_cast<char*>(k.c_str());
    t.text = const_cast<char*>(v.c_str());
    t.text_length = v.size();
    text_entries.push_back(t);
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels * (img.bit_depth / 8);
  for (int r = 0; r < img.height; ++r) {
    rows[r] = const_cast<png_bytep>(img.bytes.data() + stride * r);
  }

  int color_type = PNG_COLOR_TYPE_GRAY;
  if (img.channels == 3) color_type = PNG_COLOR_TYPE_RGB;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("io", "failed to write PNG '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), img.bit_depth,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (!text_entries.empty()) png_set_text(png, info, text_entries.data(), static_cast<int>(text_entries.size()));
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

RawPng read_raw(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw Error("io", "cannot open '" + path.string() + "'");

  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw Error("io", "'" + path.string() + "' is not a PNG file");
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("io", "libpng initialization failed");
  }

  RawPng out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("io", "failed to read PNG '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.bit_depth = png_get_bit_depth(png, info);
  out.channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.bytes.resize(stride * out.height);
  rows.resize(out.height);
  for (int r = 0; r < out.height; ++r) rows[r] = out.bytes.data() + stride * r;
  png_read_image(png, rows.data());
  png_read_end(png, info);

  png_textp text = nullptr;
  int num_text = 0;
  if (png_get_text(png, info, &text, &num_text) > 0) {
    for (int i = 0; i < num_text; ++i) out.text[text[i].key] = std::string(text[i].text, text[i].text_length);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

std::uint16_t quantize16(float v) {
  const double x = std::clamp(static_cast<double>(v), 0.0, 1.0);
  return static_cast<std::uint16_t>(std::lround(x * 65535.0));
}

void put16(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v >> 8);
  p[1] = static_cast<std::uint8_t>(v & 0xff);
}

double sample_at(const RawPng& raw, std::size_t pixel, int channel) {
  const std::size_t i = pixel * raw.channels + channel;
  if (raw.bit_depth == 16) {
    return static_cast<double>((raw.bytes[2 * i] << 8) | raw.bytes[2 * i + 1]) / 65535.0;
  }
  return static_cast<double>(raw.bytes[i]) / 255.0;
}

}  // namespace

void write_gray16(const std::filesystem::path& path, const Image& img) {
  RawPng raw{img.cols(), img.rows(), 16, 1, {}, {}};
  raw.bytes.resize(img.size() * 2);
  for (std::size_t i = 0; i < img.size(); ++i) put16(&raw.bytes[2 * i], quantize16(img[i]));
  write_raw(path, raw);
}

void write_gray16_as_rgb(const std::filesystem::path& path, const Image& img) {
  RawPng raw{img.cols(), img.rows(), 16, 3, {}, {}};
  raw.bytes.resize(img.size() * 6);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const auto q = quantize16(img[i]);
    for (int c = 0; c < 3; ++c) put16(&raw.bytes[6 * i + 2 * c], q);
  }
  write_raw(path, raw);
}

Image read_gray(const std::filesystem::path& path) {
  const RawPng raw = read_raw(path);
  Image img(raw.height, raw.width);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<float>(sample_at(raw, i, 0));
  return img;
}

Grid<std::int32_t> read_gray_integer(const std::filesystem::path& path) {
  const RawPng raw = read_raw(path);
  Grid<std::int32_t> g(raw.height, raw.width);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const std::size_t s = i * raw.channels;
    g[i] = raw.bit_depth == 16 ? ((raw.bytes[2 * s] << 8) | raw.bytes[2 * s + 1]) : raw.bytes[s];
  }
  return g;
}

void write_mask(const std::filesystem::path& path, const Mask& mask) {
  RawPng raw{mask.cols(), mask.rows(), 8, 1, {}, {}};
  raw.bytes.resize(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) raw.bytes[i] = mask[i] ? 255 : 0;
  write_raw(path, raw);
}

Mask read_mask(const std::filesystem::path& path) {
  const RawPng raw = read_raw(path);
  Mask m(raw.height, raw.width);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = sample_at(raw, i, 0) > 0.5 ? 1 : 0;
  return m;
}

void write_rgb8(const std::filesystem::path& path, const Rgb8& img, const std::map<std::string, std::string>& text) {
  if (img.data.size() != static_cast<std::size_t>(img.rows) * img.cols * 3) {
    throw Error("invalid_argument", "RGB buffer size does not match dimensions");
  }
  RawPng raw{img.cols, img.rows, 8, 3, img.data, text};
  write_raw(path, raw);
}

Rgb8 read_rgb8(const std::filesystem::path& path) {
  const RawPng raw = read_raw(path);
  Rgb8 out{raw.height, raw.width, {}};
  out.data.resize(static_cast<std::size_t>(raw.height) * raw.width * 3);
  const std::size_t n = static_cast<std::size_t>(raw.height) * raw.width;
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const int src = raw.channels >= 3 ? c : 0;
      out.data[3 * i + c] = static_cast<std::uint8_t>(std::lround(sample_at(raw, i, src) * 255.0));
    }
  }
  return out;
}

std::map<std::string, std::string> read_text_chunks(const std::filesystem::path& path) { return read_raw(path).text; }

}  // namespace hedseg::png
