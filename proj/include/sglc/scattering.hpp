#pragma once

#include <sglc/error.hpp>
#include <sglc/image.hpp>
#include <sglc/processor.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

namespace sglc {

/// Parameters of the single-scattering haze model I = t * J + (1 - t) * A with
/// t = exp(-beta * depth). Atmospheric light is spatially constant.
struct ScatteringParams {
  double beta = 1.0;
  std::array<double, 3> atmospheric_light{1.0, 1.0, 1.0};
  ImageBuffer depth{1, 1, 1};  // H x W x 1, non-negative
};

inline ImageBuffer transmission_map(const ScatteringParams& params) {
  if (!(params.beta > 0.0) || !std::isfinite(params.beta)) throw InvalidArgument("beta must be positive");
  ImageBuffer t(params.depth.height(), params.depth.width(), 1);
  auto d = params.depth.samples();
  auto out = t.samples();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] < 0.0) throw InvalidArgument("depth map must be non-negative");
    out[i] = std::exp(-params.beta * d[i]);
  }
  return t;
}

inline ImageBuffer synthesize_haze(const ImageBuffer& clean, const ScatteringParams& params) {
  if (params.depth.height() != clean.height() || params.depth.width() != clean.width() ||
      params.depth.channels() != 1) {
    throw ShapeMismatch("synthesize_haze: depth map " + params.depth.shape_string() + " does not match image " +
                        clean.shape_string());
  }
  for (std::size_t c = 0; c < clean.channels(); ++c) {
    const double a = params.atmospheric_light[c];
    if (!(a > 0.0 && a <= 1.0)) throw InvalidArgument("atmospheric light must lie in (0, 1]");
  }
  const ImageBuffer t = transmission_map(params);
  ImageBuffer hazy(clean.height(), clean.width(), clean.channels());
  for (std::size_t y = 0; y < clean.height(); ++y) {
    for (std::size_t x = 0; x < clean.width(); ++x) {
      const double tx = t.at(y, x);
      for (std::size_t c = 0; c < clean.channels(); ++c) {
        const double a = params.atmospheric_light[c];
        hazy.at(y, x, c) = std::clamp(tx * clean.at(y, x, c) + (1.0 - tx) * a, 0.0, 1.0);
      }
    }
  }
  return hazy;
}

/// Inverts the haze model for a known atmospheric light and transmission:
/// J = (I - A) / max(t, t_floor) + A, clamped to [0, 1].
inline ImageBuffer recover_radiance(const ImageBuffer& hazy, const std::array<double, 3>& atmospheric_light,
                                    const ImageBuffer& transmission, double t_floor) {
  if (transmission.height() != hazy.height() || transmission.width() != hazy.width() ||
      transmission.channels() != 1) {
    throw ShapeMismatch("recover_radiance: transmission " + transmission.shape_string() + " vs image " +
                        hazy.shape_string());
  }
  ImageBuffer out(hazy.height(), hazy.width(), hazy.channels());
  for (std::size_t y = 0; y < hazy.height(); ++y) {
    for (std::size_t x = 0; x < hazy.width(); ++x) {
      const double t = std::max(transmission.at(y, x), t_floor);
      for (std::size_t c = 0; c < hazy.channels(); ++c) {
        const double a = atmospheric_light[c];
        out.at(y, x, c) = std::clamp((hazy.at(y, x, c) - a) / t + a, 0.0, 1.0);
      }
    }
  }
  return out;
}

/// Square minimum filter of side `kernel` (odd), window clipped at borders.
inline ImageBuffer min_filter(const ImageBuffer& single, std::size_t kernel) {
  if (single.channels() != 1) throw InvalidArgument("min_filter expects one channel");
  const std::size_t h = single.height(), w = single.width(), r = kernel / 2;
  ImageBuffer rows(h, w, 1), out(h, w, 1);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t x0 = x >= r ? x - r : 0, x1 = std::min(w - 1, x + r);
      double m = single.at(y, x0);
      for (std::size_t k = x0 + 1; k <= x1; ++k) m = std::min(m, single.at(y, k));
      rows.at(y, x) = m;
    }
  }
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t y0 = y >= r ? y - r : 0, y1 = std::min(h - 1, y + r);
    for (std::size_t x = 0; x < w; ++x) {
      double m = rows.at(y0, x);
      for (std::size_t k = y0 + 1; k <= y1; ++k) m = std::min(m, rows.at(k, x));
      out.at(y, x) = m;
    }
  }
  return out;
}

/// Per-pixel minimum over channels, then a kernel x kernel minimum filter.
inline ImageBuffer dark_channel(const ImageBuffer& img, std::size_t kernel) {
  ImageBuffer mins(img.height(), img.width(), 1);
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      auto p = img.pixel(y, x);
      mins.at(y, x) = *std::min_element(p.begin(), p.end());
    }
  }
  return min_filter(mins, kernel);
}

struct DarkChannelOptions {
  double omega = 0.95;
  double t_floor = 0.1;
  std::size_t kernel = 15;
  double top_fraction = 0.001;  // share of brightest dark-channel pixels for A
};

struct DehazeResult {
  ImageBuffer image;
  std::array<double, 3> atmospheric_light{0.0, 0.0, 0.0};
  bool degenerate = false;  // A could not be estimated; image returned unchanged
};

/**
 * Classical dark-channel-prior dehazing of one patch.
 *
 * Candidates for the atmospheric light are the brightest `top_fraction` of
 * dark-channel pixels (at least one, ties broken by raster order); the
 * candidate with the largest channel sum supplies A. Transmission is
 * 1 - omega * dark_channel(I / A).
 */
inline DehazeResult dark_channel_dehaze(const ImageBuffer& patch, const DarkChannelOptions& opts = {}) {
  if (opts.kernel == 0 || opts.kernel % 2 == 0) throw InvalidArgument("dark channel kernel must be odd");
  if (!(opts.omega > 0.0 && opts.omega <= 1.0)) throw InvalidArgument("omega must lie in (0, 1]");
  if (!(opts.t_floor > 0.0 && opts.t_floor <= 1.0)) throw InvalidArgument("t_floor must lie in (0, 1]");

  const ImageBuffer dark = dark_channel(patch, opts.kernel);
  const std::size_t n = patch.pixel_count();
  const auto count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(opts.top_fraction * static_cast<double>(n))), 1, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto d = dark.samples();
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(),
                    [&](std::size_t a, std::size_t b) { return d[a] > d[b] || (d[a] == d[b] && a < b); });

  const std::size_t channels = patch.channels();
  auto samples = patch.samples();
  std::size_t best = order[0];
  double best_sum = -1.0;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t p = order[i];
    double sum = 0.0;
    for (std::size_t c = 0; c < channels; ++c) sum += samples[p * channels + c];
    if (sum > best_sum) {
      best_sum = sum;
      best = p;
    }
  }
  DehazeResult result{patch, {0.0, 0.0, 0.0}, false};
  for (std::size_t c = 0; c < channels; ++c) result.atmospheric_light[c] = samples[best * channels + c];
  for (std::size_t c = channels; c < 3; ++c) result.atmospheric_light[c] = result.atmospheric_light[0];
  for (std::size_t c = 0; c < channels; ++c) {
    if (result.atmospheric_light[c] <= 1e-6) {
      result.degenerate = true;
      return result;
    }
  }

  ImageBuffer normalized = patch;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t c = 0; c < channels; ++c) normalized.samples()[p * channels + c] /= result.atmospheric_light[c];
  }
  ImageBuffer t = dark_channel(normalized, opts.kernel);
  for (double& v : t.samples()) v = 1.0 - opts.omega * v;
  result.image = recover_radiance(patch, result.atmospheric_light, t, opts.t_floor);
  return result;
}

/// Patch processor wrapping dark_channel_dehaze. Degenerate patches pass
/// through unchanged and are counted.
class DarkChannelProcessor final : public PatchProcessor {
 public:
  explicit DarkChannelProcessor(DarkChannelOptions opts = {}) : opts_(opts) {}

  ImageBuffer process(const ImageBuffer& patch) const override {
    DehazeResult r = dark_channel_dehaze(patch, opts_);
    if (r.degenerate) degenerate_.fetch_add(1, std::memory_order_relaxed);
    return std::move(r.image);
  }
  std::string name() const override { return "dcp"; }

  std::size_t degenerate_count() const noexcept { return degenerate_.load(); }
  const DarkChannelOptions& options() const noexcept { return opts_; }

 private:
  DarkChannelOptions opts_;
  mutable std::atomic<std::size_t> degenerate_{0};
};

}  // namespace sglc
