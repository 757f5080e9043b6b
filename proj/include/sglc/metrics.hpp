#pragma once

#include <sglc/error.hpp>
#include <sglc/image.hpp>

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace sglc {

inline double mse(const ImageBuffer& ref, const ImageBuffer& test) {
  require_same_shape(ref, test, "mse");
  auto a = ref.samples();
  auto b = test.samples();
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

/// 10 log10(peak^2 / MSE) in dB; +infinity for identical images.
inline double psnr(const ImageBuffer& ref, const ImageBuffer& test, double peak = 1.0) {
  const double m = mse(ref, test);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / m);
}

inline constexpr std::size_t kSsimWindow = 11;

/// Normalized 11-tap Gaussian, sigma 1.5.
inline std::array<double, kSsimWindow> ssim_gaussian() {
  std::array<double, kSsimWindow> g{};
  double sum = 0.0;
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    const double x = static_cast<double>(i) - 5.0;
    g[i] = std::exp(-(x * x) / (2.0 * 1.5 * 1.5));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

namespace detail {

// Valid-mode separable Gaussian filter of one channel plane.
inline std::vector<double> gaussian_valid(const std::vector<double>& plane, std::size_t h, std::size_t w,
                                          const std::array<double, kSsimWindow>& g) {
  const std::size_t oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
  std::vector<double> rows(h * ow), out(oh * ow);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kSsimWindow; ++k) acc += g[k] * plane[y * w + x + k];
      rows[y * ow + x] = acc;
    }
  }
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kSsimWindow; ++k) acc += g[k] * rows[(y + k) * ow + x];
      out[y * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace detail

/**
 * Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), peak 1,
 * C1 = 0.01^2 and C2 = 0.03^2, averaged over valid window positions and then
 * over channels.
 */
inline double ssim(const ImageBuffer& ref, const ImageBuffer& test) {
  require_same_shape(ref, test, "ssim");
  const std::size_t h = ref.height(), w = ref.width(), c = ref.channels();
  if (h < kSsimWindow || w < kSsimWindow) {
    throw InvalidArgument("ssim: image " + ref.shape_string() + " smaller than the 11x11 window");
  }
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const auto g = ssim_gaussian();
  double total = 0.0;
  std::vector<double> x(h * w), y(h * w), xx(h * w), yy(h * w), xy(h * w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t p = 0; p < h * w; ++p) {
      x[p] = ref.samples()[p * c + ch];
      y[p] = test.samples()[p * c + ch];
      xx[p] = x[p] * x[p];
      yy[p] = y[p] * y[p];
      xy[p] = x[p] * y[p];
    }
    const auto mx = detail::gaussian_valid(x, h, w, g);
    const auto my = detail::gaussian_valid(y, h, w, g);
    const auto exx = detail::gaussian_valid(xx, h, w, g);
    const auto eyy = detail::gaussian_valid(yy, h, w, g);
    const auto exy = detail::gaussian_valid(xy, h, w, g);
    double sum = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double sx = exx[i] - mx[i] * mx[i];
      const double sy = eyy[i] - my[i] * my[i];
      const double sxy = exy[i] - mx[i] * my[i];
      sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * sxy + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (sx + sy + c2));
    }
    total += sum / static_cast<double>(mx.size());
  }
  return total / static_cast<double>(c);
}

}  // namespace sglc
