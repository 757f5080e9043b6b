#pragma once

#include <sglc/error.hpp>
#include <sglc/image.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace sglc {

// Raw tensor exchange format:
//   "SGLC" | u32 height | u32 width | u32 channels | height*width*channels f32
// All integers and floats little-endian, samples row-major and
// channel-interleaved. No padding, no trailer.
inline constexpr std::size_t kTensorHeaderBytes = 16;
inline constexpr unsigned char kTensorMagic[4] = {'S', 'G', 'L', 'C'};

inline std::size_t tensor_file_size(std::size_t height, std::size_t width, std::size_t channels) {
  return kTensorHeaderBytes + height * width * channels * 4;
}

namespace detail {

inline unsigned char* put_u32(unsigned char* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) *p++ = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  return p;
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

}  // namespace detail

/// Samples are narrowed to float32.
inline std::vector<unsigned char> encode_tensor(const ImageBuffer& img) {
  std::vector<unsigned char> out(tensor_file_size(img.height(), img.width(), img.channels()));
  unsigned char* p = std::copy_n(kTensorMagic, 4, out.data());
  p = detail::put_u32(p, static_cast<std::uint32_t>(img.height()));
  p = detail::put_u32(p, static_cast<std::uint32_t>(img.width()));
  p = detail::put_u32(p, static_cast<std::uint32_t>(img.channels()));
  for (double v : img.samples()) p = detail::put_u32(p, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

inline ImageBuffer decode_tensor(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < kTensorHeaderBytes) throw FormatError("tensor: truncated header");
  if (!std::equal(kTensorMagic, kTensorMagic + 4, bytes.begin())) throw FormatError("tensor: bad magic");
  const std::uint32_t h = detail::get_u32(bytes.data() + 4);
  const std::uint32_t w = detail::get_u32(bytes.data() + 8);
  const std::uint32_t c = detail::get_u32(bytes.data() + 12);
  if (h == 0 || w == 0 || (c != 1 && c != 3)) {
    throw FormatError("tensor: invalid shape " + std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c));
  }
  if (bytes.size() != tensor_file_size(h, w, c)) {
    throw FormatError("tensor: expected " + std::to_string(tensor_file_size(h, w, c)) + " bytes, got " +
                      std::to_string(bytes.size()));
  }
  std::vector<double> data(std::size_t{h} * w * c);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const float f = std::bit_cast<float>(detail::get_u32(bytes.data() + kTensorHeaderBytes + 4 * i));
    if (!std::isfinite(f)) throw FormatError("tensor: non-finite sample at index " + std::to_string(i));
    data[i] = f;
  }
  return ImageBuffer(h, w, c, std::move(data));
}

inline void write_tensor(const ImageBuffer& img, const std::filesystem::path& path) {
  const auto bytes = encode_tensor(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline ImageBuffer read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_tensor(bytes);
}

}  // namespace sglc
