#pragma once

#include <sglc/error.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sglc {

/**
 * Dense H x W x C raster of double samples, row-major and channel-interleaved.
 *
 * Sample (y, x, c) lives at index (y * W + x) * C + c. The nominal sample range
 * is [0, 1]; quantization only happens at file I/O. Channel count is 1 or 3.
 */
class ImageBuffer {
 public:
  ImageBuffer(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0)
      : height_(height), width_(width), channels_(channels) {
    check_shape();
    data_.assign(height * width * channels, fill);
  }

  ImageBuffer(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> data)
      : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    check_shape();
    if (data_.size() != height * width * channels) {
      throw ShapeMismatch("image data length " + std::to_string(data_.size()) + " does not match " +
                          std::to_string(height) + "x" + std::to_string(width) + "x" +
                          std::to_string(channels));
    }
    if (!all_finite()) throw InvalidArgument("image data contains non-finite samples");
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t pixel_count() const noexcept { return height_ * width_; }

  std::size_t index(std::size_t y, std::size_t x, std::size_t c = 0) const noexcept {
    return (y * width_ + x) * channels_ + c;
  }

  double& at(std::size_t y, std::size_t x, std::size_t c = 0) noexcept { return data_[index(y, x, c)]; }
  double at(std::size_t y, std::size_t x, std::size_t c = 0) const noexcept {
    return data_[index(y, x, c)];
  }

  std::span<double> samples() noexcept { return data_; }
  std::span<const double> samples() const noexcept { return data_; }

  // All channels of pixel (y, x).
  std::span<double> pixel(std::size_t y, std::size_t x) noexcept {
    return {data_.data() + index(y, x), channels_};
  }
  std::span<const double> pixel(std::size_t y, std::size_t x) const noexcept {
    return {data_.data() + index(y, x), channels_};
  }

  bool same_shape(const ImageBuffer& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  std::string shape_string() const {
    return std::to_string(height_) + "x" + std::to_string(width_) + "x" + std::to_string(channels_);
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  void check_shape() const {
    if (height_ == 0 || width_ == 0) throw InvalidArgument("image dimensions must be positive");
    if (channels_ != 1 && channels_ != 3) {
      throw InvalidArgument("unsupported channel count " + std::to_string(channels_));
    }
  }

  std::size_t height_;
  std::size_t width_;
  std::size_t channels_;
  std::vector<double> data_;
};

inline void require_same_shape(const ImageBuffer& a, const ImageBuffer& b, std::string_view what) {
  if (!a.same_shape(b)) {
    throw ShapeMismatch(std::string(what) + ": shape " + a.shape_string() + " vs " + b.shape_string());
  }
}

inline double max_abs_diff(const ImageBuffer& a, const ImageBuffer& b) {
  require_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  auto sa = a.samples();
  auto sb = b.samples();
  for (std::size_t i = 0; i < sa.size(); ++i) worst = std::max(worst, std::abs(sa[i] - sb[i]));
  return worst;
}

inline void clamp_unit(ImageBuffer& img) noexcept {
  for (double& v : img.samples()) v = std::clamp(v, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Geometry

/// Padding and stride bookkeeping for grid patching with patch side G.
struct GridGeometry {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t padded_height = 0;
  std::size_t padded_width = 0;
  std::size_t patch_side = 0;
  std::size_t rows = 0;  // vertical divisions n_h
  std::size_t cols = 0;  // horizontal divisions n_w

  std::size_t patch_count() const noexcept { return rows * cols; }

  static GridGeometry make(std::size_t height, std::size_t width, std::size_t patch_side) {
    if (patch_side == 0) throw InvalidArgument("patch side must be at least 1");
    if (height == 0 || width == 0) throw InvalidArgument("image dimensions must be positive");
    GridGeometry g;
    g.height = height;
    g.width = width;
    g.patch_side = patch_side;
    g.padded_height = round_up(height, patch_side);
    g.padded_width = round_up(width, patch_side);
    g.rows = g.padded_height / patch_side;
    g.cols = g.padded_width / patch_side;
    return g;
  }

  static GridGeometry make(const ImageBuffer& img, std::size_t patch_side) {
    return make(img.height(), img.width(), patch_side);
  }

  // n unchanged when divisible, otherwise (floor(n / g) + 1) * g.
  static constexpr std::size_t round_up(std::size_t n, std::size_t g) noexcept {
    return n % g == 0 ? n : (n / g + 1) * g;
  }

  friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

// ---------------------------------------------------------------------------
// Padding and cropping

enum class PadMode { reflect, zero, edge };

inline std::string_view to_string(PadMode mode) {
  switch (mode) {
    case PadMode::reflect: return "reflect";
    case PadMode::zero: return "zero";
    case PadMode::edge: return "edge";
  }
  return "reflect";
}

inline PadMode parse_pad_mode(std::string_view s) {
  if (s == "reflect") return PadMode::reflect;
  if (s == "zero") return PadMode::zero;
  if (s == "edge") return PadMode::edge;
  throw InvalidArgument("unknown padding mode '" + std::string(s) + "'");
}

namespace detail {

// Mirror an out-of-range coordinate back into [0, n) without repeating the
// edge sample. Offsets beyond one reflection keep folding with period 2(n-1).
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) noexcept {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<std::ptrdiff_t>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}

inline std::size_t clamp_index(std::ptrdiff_t i, std::size_t n) noexcept {
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1));
}

}  // namespace detail

/// Extends img by the given margins. Samples inside the original extent are
/// copied bit-exactly.
inline ImageBuffer pad_margins(const ImageBuffer& img, std::size_t top, std::size_t bottom,
                               std::size_t left, std::size_t right, PadMode mode) {
  const std::size_t h = img.height(), w = img.width(), c = img.channels();
  ImageBuffer out(h + top + bottom, w + left + right, c);
  for (std::size_t y = 0; y < out.height(); ++y) {
    const auto sy = static_cast<std::ptrdiff_t>(y) - static_cast<std::ptrdiff_t>(top);
    const bool y_inside = sy >= 0 && sy < static_cast<std::ptrdiff_t>(h);
    for (std::size_t x = 0; x < out.width(); ++x) {
      const auto sx = static_cast<std::ptrdiff_t>(x) - static_cast<std::ptrdiff_t>(left);
      const bool inside = y_inside && sx >= 0 && sx < static_cast<std::ptrdiff_t>(w);
      std::size_t yy = 0, xx = 0;
      if (inside) {
        yy = static_cast<std::size_t>(sy);
        xx = static_cast<std::size_t>(sx);
      } else if (mode == PadMode::zero) {
        continue;
      } else if (mode == PadMode::reflect) {
        yy = detail::reflect_index(sy, h);
        xx = detail::reflect_index(sx, w);
      } else {
        yy = detail::clamp_index(sy, h);
        xx = detail::clamp_index(sx, w);
      }
      auto src = img.pixel(yy, xx);
      std::copy(src.begin(), src.end(), out.pixel(y, x).begin());
    }
  }
  return out;
}

/// Pads at the bottom/right up to geometry.padded_* so that a top-left crop
/// restores the original.
inline ImageBuffer pad(const ImageBuffer& img, const GridGeometry& geometry, PadMode mode) {
  if (img.height() != geometry.height || img.width() != geometry.width) {
    throw ShapeMismatch("pad: image " + img.shape_string() + " does not match geometry " +
                        std::to_string(geometry.height) + "x" + std::to_string(geometry.width));
  }
  if (geometry.patch_side == 0) throw InvalidArgument("pad: patch side must be at least 1");
  if (mode == PadMode::reflect && geometry.patch_side > 2 * std::min(img.height(), img.width())) {
    throw InvalidArgument("pad: reflect padding undefined for patch side " +
                          std::to_string(geometry.patch_side) + " on a " + img.shape_string() + " image");
  }
  return pad_margins(img, 0, geometry.padded_height - img.height(), 0, geometry.padded_width - img.width(),
                     mode);
}

inline ImageBuffer pad_reflect(const ImageBuffer& img, const GridGeometry& geometry) {
  return pad(img, geometry, PadMode::reflect);
}

/// Copies the h x w region whose top-left corner is (y, x).
inline ImageBuffer extract(const ImageBuffer& img, std::size_t y, std::size_t x, std::size_t h,
                           std::size_t w) {
  if (y + h > img.height() || x + w > img.width()) {
    throw InvalidArgument("extract: region " + std::to_string(h) + "x" + std::to_string(w) + " at (" +
                          std::to_string(y) + "," + std::to_string(x) + ") exceeds " + img.shape_string());
  }
  const std::size_t c = img.channels();
  ImageBuffer out(h, w, c);
  for (std::size_t r = 0; r < h; ++r) {
    auto src = img.samples().subspan(img.index(y + r, x), w * c);
    std::copy(src.begin(), src.end(), out.samples().begin() + static_cast<std::ptrdiff_t>(out.index(r, 0)));
  }
  return out;
}

/// Top-left h x w region.
inline ImageBuffer crop(const ImageBuffer& img, std::size_t h, std::size_t w) {
  if (h > img.height() || w > img.width()) {
    throw InvalidArgument("crop: target " + std::to_string(h) + "x" + std::to_string(w) +
                          " larger than source " + img.shape_string());
  }
  if (h == img.height() && w == img.width()) return img;
  return extract(img, 0, 0, h, w);
}

// ---------------------------------------------------------------------------
// Dihedral group D4

/**
 * Element of the symmetry group of the square.
 *
 * Applying it mirrors left-right first (when `mirrored`), then rotates
 * counter-clockwise by `rotation` quarter turns. Odd rotations swap H and W.
 */
struct DihedralTransform {
  int rotation = 0;
  bool mirrored = false;

  static constexpr DihedralTransform identity() noexcept { return {}; }

  constexpr DihedralTransform inverse() const noexcept {
    // Reflections are involutions; pure rotations invert by turning back.
    if (mirrored) return *this;
    return {(4 - rotation) % 4, false};
  }

  friend constexpr bool operator==(DihedralTransform, DihedralTransform) = default;
};

/// Transform equal to applying `second` after `first`.
constexpr DihedralTransform compose(DihedralTransform second, DihedralTransform first) noexcept {
  // R^a M^p R^b M^q = R^(a + (p ? -b : b)) M^(p xor q)
  const int b = second.mirrored ? (4 - first.rotation) % 4 : first.rotation;
  return {(second.rotation + b) % 4, second.mirrored != first.mirrored};
}

inline constexpr std::array<DihedralTransform, 8> all_dihedral_transforms() noexcept {
  return {{{0, false}, {1, false}, {2, false}, {3, false}, {0, true}, {1, true}, {2, true}, {3, true}}};
}

inline std::vector<DihedralTransform> d4_transforms() {
  const auto all = all_dihedral_transforms();
  return {all.begin(), all.end()};
}

// Names are "r<k>" for rotations and "m<k>" for mirror-then-rotate.
inline std::string to_string(DihedralTransform t) {
  return std::string(t.mirrored ? "m" : "r") + std::to_string(t.rotation);
}

inline DihedralTransform parse_dihedral(std::string_view s) {
  if (s.size() == 2 && (s[0] == 'r' || s[0] == 'm') && s[1] >= '0' && s[1] <= '3') {
    return {s[1] - '0', s[0] == 'm'};
  }
  throw InvalidArgument("unknown dihedral transform '" + std::string(s) + "'");
}

inline ImageBuffer apply_dihedral(const ImageBuffer& img, DihedralTransform t) {
  const std::size_t h = img.height(), w = img.width(), c = img.channels();
  const int r = ((t.rotation % 4) + 4) % 4;
  if (r == 0 && !t.mirrored) return img;
  const bool swap = r % 2 == 1;
  ImageBuffer out(swap ? w : h, swap ? h : w, c);
  for (std::size_t i = 0; i < out.height(); ++i) {
    for (std::size_t j = 0; j < out.width(); ++j) {
      // Source coordinate in the (possibly mirrored) input.
      std::size_t y = 0, x = 0;
      switch (r) {
        case 0: y = i; x = j; break;
        case 1: y = j; x = w - 1 - i; break;
        case 2: y = h - 1 - i; x = w - 1 - j; break;
        default: y = h - 1 - j; x = i; break;
      }
      if (t.mirrored) x = w - 1 - x;
      auto src = img.pixel(y, x);
      std::copy(src.begin(), src.end(), out.pixel(i, j).begin());
    }
  }
  return out;
}

}  // namespace sglc
