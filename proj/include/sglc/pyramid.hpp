#pragma once

#include <sglc/error.hpp>
#include <sglc/image.hpp>

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sglc {

/**
 * Laplacian pyramid with exact reconstruction.
 *
 * levels[l] for l < depth - 1 is the band G_l - up(G_{l+1}); the last level is
 * the low-pass residual G_{depth-1}. G_{l+1} = down(blur(G_l)) with a 5-tap
 * binomial kernel and mirror boundary; level l has ceil(H / 2^l) rows.
 */
struct LaplacianPyramid {
  std::vector<ImageBuffer> levels;

  std::size_t depth() const noexcept { return levels.size(); }
  const ImageBuffer& residual() const { return levels.back(); }
};

/// Deepest pyramid an h x w image supports: floor(log2(min(h, w))) + 1.
inline std::size_t max_pyramid_depth(std::size_t height, std::size_t width) {
  std::size_t m = std::min(height, width), d = 1;
  while (m >= 2) {
    m /= 2;
    ++d;
  }
  return d;
}

namespace detail {

inline constexpr std::array<double, 5> kBinomial = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

// 1-D line operators and their transposes. `in` and `out` never alias.
struct LineOps {
  static void blur(std::span<const double> in, std::span<double> out) {
    const std::size_t n = in.size();
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int t = -2; t <= 2; ++t) acc += kBinomial[t + 2] * in[reflect_index(static_cast<std::ptrdiff_t>(i) + t, n)];
      out[i] = acc;
    }
  }
  static void blur_t(std::span<const double> in, std::span<double> out) {
    const std::size_t n = in.size();
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (int t = -2; t <= 2; ++t) out[reflect_index(static_cast<std::ptrdiff_t>(i) + t, n)] += kBinomial[t + 2] * in[i];
    }
  }
  // n -> ceil(n / 2), keeps even samples.
  static void down(std::span<const double> in, std::span<double> out) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[2 * i];
  }
  static void down_t(std::span<const double> in, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < in.size(); ++i) out[2 * i] = in[i];
  }
  // m -> n: zero-insert to length n, then blur with gain 2.
  static void up(std::span<const double> in, std::span<double> out) {
    std::vector<double> z(out.size(), 0.0);
    for (std::size_t i = 0; i < in.size(); ++i) z[2 * i] = 2.0 * in[i];
    blur(z, out);
  }
  static void up_t(std::span<const double> in, std::span<double> out) {
    std::vector<double> b(in.size());
    blur_t(in, b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 2.0 * b[2 * i];
  }
};

using LineFn = void (*)(std::span<const double>, std::span<double>);

// Applies fn to every line along one axis (0 = columns, 1 = rows).
inline ImageBuffer map_axis(const ImageBuffer& img, int axis, std::size_t out_len, LineFn fn) {
  const std::size_t h = img.height(), w = img.width(), c = img.channels();
  ImageBuffer out(axis == 0 ? out_len : h, axis == 0 ? w : out_len, c);
  const std::size_t in_len = axis == 0 ? h : w;
  const std::size_t lines = axis == 0 ? w : h;
  std::vector<double> src(in_len), dst(out_len);
  for (std::size_t l = 0; l < lines; ++l) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t i = 0; i < in_len; ++i) src[i] = axis == 0 ? img.at(i, l, ch) : img.at(l, i, ch);
      fn(src, dst);
      for (std::size_t i = 0; i < out_len; ++i) (axis == 0 ? out.at(i, l, ch) : out.at(l, i, ch)) = dst[i];
    }
  }
  return out;
}

inline ImageBuffer reduce(const ImageBuffer& img) {
  ImageBuffer b = map_axis(map_axis(img, 0, img.height(), LineOps::blur), 1, img.width(), LineOps::blur);
  return map_axis(map_axis(b, 0, (img.height() + 1) / 2, LineOps::down), 1, (img.width() + 1) / 2, LineOps::down);
}

inline ImageBuffer reduce_t(const ImageBuffer& img, std::size_t h, std::size_t w) {
  ImageBuffer d = map_axis(map_axis(img, 0, h, LineOps::down_t), 1, w, LineOps::down_t);
  return map_axis(map_axis(d, 0, h, LineOps::blur_t), 1, w, LineOps::blur_t);
}

inline ImageBuffer expand(const ImageBuffer& img, std::size_t h, std::size_t w) {
  return map_axis(map_axis(img, 0, h, LineOps::up), 1, w, LineOps::up);
}

inline ImageBuffer expand_t(const ImageBuffer& img, std::size_t h, std::size_t w) {
  return map_axis(map_axis(img, 0, h, LineOps::up_t), 1, w, LineOps::up_t);
}

inline void add_scaled(ImageBuffer& dst, const ImageBuffer& src, double scale) {
  auto d = dst.samples();
  auto s = src.samples();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += scale * s[i];
}

}  // namespace detail

inline LaplacianPyramid build_pyramid(const ImageBuffer& img, std::size_t depth) {
  if (depth == 0) throw InvalidArgument("pyramid depth must be at least 1");
  if (depth > max_pyramid_depth(img.height(), img.width())) {
    throw InvalidArgument("image " + img.shape_string() + " too small for a depth-" + std::to_string(depth) +
                          " pyramid");
  }
  LaplacianPyramid pyr;
  ImageBuffer g = img;
  for (std::size_t l = 0; l + 1 < depth; ++l) {
    ImageBuffer next = detail::reduce(g);
    ImageBuffer band = g;
    detail::add_scaled(band, detail::expand(next, g.height(), g.width()), -1.0);
    pyr.levels.push_back(std::move(band));
    g = std::move(next);
  }
  pyr.levels.push_back(std::move(g));
  return pyr;
}

inline ImageBuffer collapse(const LaplacianPyramid& pyr) {
  if (pyr.levels.empty()) throw InvalidArgument("collapse: empty pyramid");
  ImageBuffer g = pyr.levels.back();
  for (std::size_t l = pyr.levels.size() - 1; l-- > 0;) {
    ImageBuffer up = detail::expand(g, pyr.levels[l].height(), pyr.levels[l].width());
    detail::add_scaled(up, pyr.levels[l], 1.0);
    g = std::move(up);
  }
  return g;
}

/// Adjoint of the (linear) pyramid construction: maps one cotangent image per
/// level back to image space, so that <build(x), y> = <x, adjoint(y)>.
inline ImageBuffer pyramid_adjoint(const LaplacianPyramid& cotangent) {
  const auto& lv = cotangent.levels;
  if (lv.empty()) throw InvalidArgument("pyramid_adjoint: empty pyramid");
  // acc holds the gradient with respect to G_{l+1} while walking upwards.
  ImageBuffer acc = lv.back();
  for (std::size_t l = lv.size() - 1; l-- > 0;) {
    const std::size_t h = lv[l].height(), w = lv[l].width();
    detail::add_scaled(acc, detail::expand_t(lv[l], acc.height(), acc.width()), -1.0);
    ImageBuffer g = detail::reduce_t(acc, h, w);
    detail::add_scaled(g, lv[l], 1.0);
    acc = std::move(g);
  }
  return acc;
}

}  // namespace sglc
