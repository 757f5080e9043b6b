#pragma once

#include <sglc/error.hpp>
#include <sglc/image.hpp>

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <vector>

namespace sglc {

/// Decoded raster plus the maximum sample value of its file encoding.
struct RasterFile {
  ImageBuffer image;
  std::uint32_t max_value;
};

/// Round-half-up quantization of a [0, 1] sample to [0, max_value].
inline std::uint32_t quantize_sample(double v, std::uint32_t max_value) noexcept {
  const double scaled = std::floor(std::clamp(v, 0.0, 1.0) * max_value + 0.5);
  return static_cast<std::uint32_t>(std::min<double>(scaled, max_value));
}

namespace detail {

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// ---- PNM (P5 grayscale, P6 RGB) -------------------------------------------

class PnmHeaderReader {
 public:
  PnmHeaderReader(const std::vector<unsigned char>& bytes, const std::string& name)
      : bytes_(bytes), name_(name) {}

  std::uint32_t next_uint() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) fail("expected a number");
    std::uint64_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > 0xFFFFFFFFu) fail("header value out of range");
    }
    return static_cast<std::uint32_t>(v);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) fail("missing separator before raster");
    return pos_ + 1;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("corrupt PNM file '" + name_ + "': " + what);
  }

  std::size_t pos_ = 2;

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char>& bytes_;
  std::string name_;
};

inline RasterFile decode_pnm(const std::vector<unsigned char>& bytes, const std::string& name) {
  const std::size_t channels = bytes[1] == '6' ? 3 : 1;
  PnmHeaderReader reader(bytes, name);
  const std::uint32_t width = reader.next_uint();
  const std::uint32_t height = reader.next_uint();
  const std::uint32_t max_value = reader.next_uint();
  if (width == 0 || height == 0) reader.fail("zero dimension");
  if (max_value == 0 || max_value > 65535) reader.fail("maxval out of range");
  const std::size_t offset = reader.raster_offset();
  const std::size_t bytes_per_sample = max_value < 256 ? 1 : 2;
  const std::size_t count = std::size_t{width} * height * channels;
  if (bytes.size() < offset + count * bytes_per_sample) reader.fail("truncated raster");

  std::vector<double> data(count);
  const unsigned char* p = bytes.data() + offset;
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t v = bytes_per_sample == 1 ? p[i] : (std::uint32_t{p[2 * i]} << 8) | p[2 * i + 1];
    if (v > max_value) reader.fail("sample exceeds maxval");
    data[i] = static_cast<double>(v) / max_value;
  }
  return {ImageBuffer(height, width, channels, std::move(data)), max_value};
}

inline std::vector<unsigned char> encode_pnm(const ImageBuffer& img, std::uint32_t max_value) {
  std::string header = std::string(img.channels() == 3 ? "P6" : "P5") + "\n" + std::to_string(img.width()) +
                       " " + std::to_string(img.height()) + "\n" + std::to_string(max_value) + "\n";
  std::vector<unsigned char> bytes(header.begin(), header.end());
  const bool wide = max_value >= 256;
  bytes.reserve(bytes.size() + img.size() * (wide ? 2 : 1));
  for (double v : img.samples()) {
    const std::uint32_t q = quantize_sample(v, max_value);
    if (wide) bytes.push_back(static_cast<unsigned char>(q >> 8));
    bytes.push_back(static_cast<unsigned char>(q & 0xFF));
  }
  return bytes;
}

// ---- PNG via libpng ---------------------------------------------------------

struct PngMemoryReader {
  const std::vector<unsigned char>* bytes;
  std::size_t pos;
};

inline void png_read_from_memory(png_structp png, png_bytep out, png_size_t length) {
  auto* src = static_cast<PngMemoryReader*>(png_get_io_ptr(png));
  if (src->pos + length > src->bytes->size()) png_error(png, "unexpected end of data");
  std::copy_n(src->bytes->data() + src->pos, length, out);
  src->pos += length;
}

inline void png_error_handler(png_structp png, png_const_charp message) {
  auto* slot = static_cast<std::string*>(png_get_error_ptr(png));
  if (slot) *slot = message;
  png_longjmp(png, 1);
}

inline void png_warning_handler(png_structp, png_const_charp) {}

// Everything mutated between setjmp and a possible longjmp lives here, behind
// a pointer, so its state is well defined when libpng reports an error.
struct PngReadState {
  PngMemoryReader reader;
  std::vector<unsigned char> raster;
  std::vector<png_bytep> rows;
  std::string error;
};

inline RasterFile decode_png(const std::vector<unsigned char>& bytes, const std::string& name) {
  auto state = std::make_unique<PngReadState>();
  state->reader = {&bytes, 0};
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &state->error, png_error_handler, png_warning_handler);
  if (!png) throw FormatError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw FormatError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("corrupt PNG file '" + name + "': " + state->error);
  }

  png_set_read_fn(png, &state->reader, png_read_from_memory);
  png_read_info(png, info);
  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_GRAY_ALPHA || color_type == PNG_COLOR_TYPE_RGB_ALPHA) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("unsupported channel count in '" + name + "': alpha channels are not supported");
  }
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);

  const std::size_t width = png_get_image_width(png, info);
  const std::size_t height = png_get_image_height(png, info);
  const std::size_t channels = png_get_channels(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("unsupported channel count " + std::to_string(channels) + " in '" + name + "'");
  }
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  state->raster.resize(row_bytes * height);
  state->rows.resize(height);
  for (std::size_t y = 0; y < height; ++y) state->rows[y] = state->raster.data() + y * row_bytes;
  png_read_image(png, state->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::uint32_t max_value = depth == 16 ? 65535u : 255u;
  const auto& raster = state->raster;
  std::vector<double> data(width * height * channels);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::uint32_t v =
        depth == 16 ? (std::uint32_t{raster[2 * i]} << 8) | raster[2 * i + 1] : std::uint32_t{raster[i]};
    data[i] = static_cast<double>(v) / max_value;
  }
  return {ImageBuffer(height, width, channels, std::move(data)), max_value};
}

inline void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

inline void png_flush_noop(png_structp) {}

inline std::vector<unsigned char> encode_png(const ImageBuffer& img, std::uint32_t max_value) {
  if (max_value != 255 && max_value != 65535) {
    throw InvalidArgument("PNG supports max value 255 or 65535, got " + std::to_string(max_value));
  }
  const int depth = max_value == 255 ? 8 : 16;
  const std::size_t bps = depth / 8;
  const std::size_t row_bytes = img.width() * img.channels() * bps;
  std::vector<unsigned char> raster(row_bytes * img.height());
  auto samples = img.samples();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::uint32_t q = quantize_sample(samples[i], max_value);
    if (depth == 16) {
      raster[2 * i] = static_cast<unsigned char>(q >> 8);
      raster[2 * i + 1] = static_cast<unsigned char>(q & 0xFF);
    } else {
      raster[i] = static_cast<unsigned char>(q);
    }
  }
  std::vector<png_bytep> rows(img.height());
  for (std::size_t y = 0; y < img.height(); ++y) rows[y] = raster.data() + y * row_bytes;

  std::string error;
  std::vector<unsigned char> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_error_handler, png_warning_handler);
  if (!png) throw FormatError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw FormatError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("PNG encoding failed: " + error);
  }
  png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), depth,
               img.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

inline bool has_png_signature(const std::vector<unsigned char>& bytes) {
  return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

inline std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (char& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext;
}

}  // namespace detail

/// True for extensions the reader recognises (.png, .ppm, .pgm, .pnm).
inline bool is_image_path(const std::filesystem::path& path) {
  const std::string ext = detail::lower_extension(path);
  return ext == ".png" || ext == ".ppm" || ext == ".pgm" || ext == ".pnm";
}

/// Reads a PNG (8/16-bit, gray/RGB/palette) or binary PNM (P5/P6). The format
/// is detected from the file signature, not the extension.
inline RasterFile load_raster(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  const std::string name = path.string();
  if (detail::has_png_signature(bytes)) return detail::decode_png(bytes, name);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) {
    return detail::decode_pnm(bytes, name);
  }
  throw FormatError("unsupported image format: '" + name + "'");
}

inline ImageBuffer read_image(const std::filesystem::path& path) { return load_raster(path).image; }

/// Writes img quantized to [0, max_value]. The container follows the extension:
/// .png (max_value 255 or 65535), or .ppm/.pgm/.pnm (P6 for RGB, P5 for gray,
/// any max_value in [1, 65535]).
inline void write_image(const ImageBuffer& img, const std::filesystem::path& path, std::uint32_t max_value = 255) {
  if (max_value == 0 || max_value > 65535) {
    throw InvalidArgument("max value must be in [1, 65535], got " + std::to_string(max_value));
  }
  const std::string ext = detail::lower_extension(path);
  if (ext == ".png") {
    detail::write_file_bytes(path, detail::encode_png(img, max_value));
  } else if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") {
    detail::write_file_bytes(path, detail::encode_pnm(img, max_value));
  } else {
    throw FormatError("unsupported output format: '" + path.string() + "'");
  }
}

}  // namespace sglc
