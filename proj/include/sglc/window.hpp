#pragma once

#include <sglc/error.hpp>
#include <sglc/image.hpp>
#include <sglc/parallel.hpp>
#include <sglc/processor.hpp>

#include <algorithm>
#include <cstddef>
#include <exception>
#include <optional>
#include <string>
#include <vector>

namespace sglc {

/**
 * Piecewise-quadratic taper sampled at pixel centres u = (i + 0.5) / G.
 *
 *   w(u) = 8u^2               for u < 1/4
 *   w(u) = 1 - 8(u - 1/2)^2   for 1/4 <= u <= 3/4
 *   w(u) = 8(1 - u)^2         for u > 3/4
 *
 * The profile is symmetric, strictly positive, rises on the first quarter and
 * satisfies w[i] + w[i + G/2] = 1, so half-stride windows sum to a constant.
 */
inline std::vector<double> spline_profile(std::size_t side) {
  if (side < 4 || side % 4 != 0) {
    throw InvalidArgument("spline window side must be a positive multiple of 4, got " + std::to_string(side));
  }
  std::vector<double> w(side);
  for (std::size_t i = 0; i < side; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(side);
    if (u < 0.25) {
      w[i] = 8.0 * u * u;
    } else if (u > 0.75) {
      w[i] = 8.0 * (1.0 - u) * (1.0 - u);
    } else {
      w[i] = 1.0 - 8.0 * (u - 0.5) * (u - 0.5);
    }
  }
  return w;
}

enum class BlendWeights { spline, uniform };

struct WindowOrigin {
  std::size_t y = 0;
  std::size_t x = 0;
  friend bool operator==(const WindowOrigin&, const WindowOrigin&) = default;
};

/// Tiling of a canvas by equally sized square windows at a fixed stride.
struct WindowPlan {
  std::size_t window_side = 0;
  std::size_t stride = 0;
  std::size_t canvas_height = 0;
  std::size_t canvas_width = 0;
  std::vector<WindowOrigin> origins;  // row-major, ascending
  std::vector<double> weights;        // window_side^2, row-major

  double weight(std::size_t i, std::size_t j) const noexcept { return weights[i * window_side + j]; }
};

inline WindowPlan make_window_plan(std::size_t canvas_height, std::size_t canvas_width, std::size_t side,
                                   std::size_t stride, BlendWeights blend) {
  if (side == 0 || stride == 0 || stride > side) {
    throw InvalidArgument("window plan needs 0 < stride <= side, got side " + std::to_string(side) + ", stride " +
                          std::to_string(stride));
  }
  if (canvas_height < side || canvas_width < side || (canvas_height - side) % stride != 0 ||
      (canvas_width - side) % stride != 0) {
    throw InvalidArgument("canvas " + std::to_string(canvas_height) + "x" + std::to_string(canvas_width) +
                          " cannot be tiled by " + std::to_string(side) + "-pixel windows at stride " +
                          std::to_string(stride));
  }
  WindowPlan plan;
  plan.window_side = side;
  plan.stride = stride;
  plan.canvas_height = canvas_height;
  plan.canvas_width = canvas_width;
  for (std::size_t y = 0; y + side <= canvas_height; y += stride) {
    for (std::size_t x = 0; x + side <= canvas_width; x += stride) plan.origins.push_back({y, x});
  }
  plan.weights.assign(side * side, 1.0);
  if (blend == BlendWeights::spline) {
    const auto profile = spline_profile(side);
    for (std::size_t i = 0; i < side; ++i) {
      for (std::size_t j = 0; j < side; ++j) plan.weights[i * side + j] = profile[i] * profile[j];
    }
  }
  return plan;
}

struct WindowPatch {
  WindowOrigin origin;
  ImageBuffer image;
};

inline std::vector<WindowPatch> window_split(const ImageBuffer& canvas, const WindowPlan& plan) {
  if (canvas.height() != plan.canvas_height || canvas.width() != plan.canvas_width) {
    throw ShapeMismatch("window_split: canvas " + canvas.shape_string() + " does not match plan");
  }
  std::vector<WindowPatch> out;
  out.reserve(plan.origins.size());
  for (const auto& o : plan.origins) {
    if (o.y + plan.window_side > canvas.height() || o.x + plan.window_side > canvas.width()) {
      throw InvalidArgument("window origin (" + std::to_string(o.y) + "," + std::to_string(o.x) + ") out of bounds");
    }
    out.push_back({o, extract(canvas, o.y, o.x, plan.window_side, plan.window_side)});
  }
  return out;
}

/**
 * Weighted accumulation of window predictions onto a canvas.
 *
 * Results depend on the order of add() calls only through floating-point
 * rounding; callers add in ascending window index to stay bit-reproducible.
 */
class BlendAccumulator {
 public:
  BlendAccumulator(const WindowPlan& plan, std::size_t channels)
      : plan_(plan),
        channels_(channels),
        numerator_(plan.canvas_height * plan.canvas_width * channels, 0.0),
        denominator_(plan.canvas_height * plan.canvas_width, 0.0),
        count_(plan.canvas_height * plan.canvas_width, 0) {}

  void add(WindowOrigin origin, const ImageBuffer& prediction) {
    const std::size_t side = plan_.window_side;
    if (prediction.height() != side || prediction.width() != side || prediction.channels() != channels_) {
      throw ShapeMismatch("blend: prediction " + prediction.shape_string() + " does not match window side " +
                          std::to_string(side));
    }
    if (origin.y + side > plan_.canvas_height || origin.x + side > plan_.canvas_width) {
      throw InvalidArgument("blend: window origin (" + std::to_string(origin.y) + "," + std::to_string(origin.x) +
                            ") out of bounds");
    }
    for (std::size_t i = 0; i < side; ++i) {
      for (std::size_t j = 0; j < side; ++j) {
        const double w = plan_.weight(i, j);
        const std::size_t p = (origin.y + i) * plan_.canvas_width + origin.x + j;
        auto src = prediction.pixel(i, j);
        double* num = &numerator_[p * channels_];
        // A pixel seen once keeps the raw prediction; weighting starts with the second window.
        if (count_[p] == 0) {
          for (std::size_t c = 0; c < channels_; ++c) num[c] = src[c];
        } else {
          if (count_[p] == 1) {
            for (std::size_t c = 0; c < channels_; ++c) num[c] *= denominator_[p];
          }
          for (std::size_t c = 0; c < channels_; ++c) num[c] += w * src[c];
        }
        denominator_[p] += w;
        if (count_[p] < 2) ++count_[p];
      }
    }
  }

  ImageBuffer finish() const {
    ImageBuffer out(plan_.canvas_height, plan_.canvas_width, channels_);
    auto dst = out.samples();
    for (std::size_t p = 0; p < denominator_.size(); ++p) {
      if (!(denominator_[p] > 0.0)) {
        throw InvalidArgument("blend: pixel (" + std::to_string(p / plan_.canvas_width) + "," +
                              std::to_string(p % plan_.canvas_width) + ") is not covered by any window");
      }
      for (std::size_t c = 0; c < channels_; ++c) {
        const double v = numerator_[p * channels_ + c];
        dst[p * channels_ + c] = count_[p] == 1 ? v : v / denominator_[p];
      }
    }
    return out;
  }

 private:
  const WindowPlan& plan_;
  std::size_t channels_;
  std::vector<double> numerator_;
  std::vector<double> denominator_;
  std::vector<unsigned char> count_;  // saturates at 2
};

/// Normalized weighted average of overlapping window predictions.
inline ImageBuffer mops_merge(const std::vector<WindowPatch>& predictions, const WindowPlan& plan) {
  if (predictions.empty()) throw InvalidArgument("mops_merge: no predictions");
  BlendAccumulator acc(plan, predictions.front().image.channels());
  for (const auto& p : predictions) acc.add(p.origin, p.image);
  return acc.finish();
}

/// Number of windows covering each canvas pixel, stored as count / 255 so an
/// 8-bit PNG of the result holds the raw counts.
inline ImageBuffer coverage_map(const WindowPlan& plan) {
  ImageBuffer out(plan.canvas_height, plan.canvas_width, 1);
  for (const auto& o : plan.origins) {
    for (std::size_t i = 0; i < plan.window_side; ++i) {
      for (std::size_t j = 0; j < plan.window_side; ++j) out.at(o.y + i, o.x + j) += 1.0 / 255.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Local stage

struct LocalStageOptions {
  bool mops = true;
  // Spline is the smoother; uniform gives overlap without spline weighting.
  BlendWeights blend = BlendWeights::spline;
  std::vector<DihedralTransform> transforms = d4_transforms();
  std::size_t workers = 1;
  PadMode pad_mode = PadMode::reflect;
};

/// Where the image sits inside the padded canvas and how that canvas is tiled.
struct LocalLayout {
  WindowPlan plan;
  std::size_t top = 0;
  std::size_t left = 0;
};

/**
 * Without MOPS the canvas is padded bottom/right to a multiple of the window
 * side and tiled without overlap. With MOPS the stride is half a window and
 * the image gets a half-window margin on every side, so every image pixel is
 * covered by four windows and no image pixel lies on a canvas edge.
 */
inline LocalLayout local_layout(std::size_t height, std::size_t width, std::size_t side,
                                const LocalStageOptions& opts) {
  if (!opts.mops) {
    const GridGeometry g = GridGeometry::make(height, width, side);
    return {make_window_plan(g.padded_height, g.padded_width, side, side, BlendWeights::uniform), 0, 0};
  }
  if (side < 2 || side % 2 != 0) throw InvalidArgument("overlapping windows need an even side");
  const std::size_t stride = side / 2;
  const std::size_t canvas_h = stride + GridGeometry::round_up(height, stride) + stride;
  const std::size_t canvas_w = stride + GridGeometry::round_up(width, stride) + stride;
  return {make_window_plan(canvas_h, canvas_w, side, stride, opts.blend), stride, stride};
}

namespace detail {

inline ImageBuffer predict_window(const PatchProcessor& proc, const ImageBuffer& window,
                                  const std::vector<DihedralTransform>& transforms) {
  if (transforms.size() == 1 && transforms.front() == DihedralTransform::identity()) {
    return invoke_processor(proc, window);
  }
  ImageBuffer sum(window.height(), window.width(), window.channels());
  for (const auto& t : transforms) {
    const ImageBuffer pred = apply_dihedral(invoke_processor(proc, apply_dihedral(window, t)), t.inverse());
    auto dst = sum.samples();
    auto src = pred.samples();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  const double n = static_cast<double>(transforms.size());
  for (double& v : sum.samples()) v /= n;
  return sum;
}

}  // namespace detail

/// Local stage: tile into windows, process each (with test-time augmentation
/// under MOPS), blend, crop back to the input extent.
inline ImageBuffer lfe_stage(const ImageBuffer& img, std::size_t window_side, const PatchProcessor& proc,
                             const LocalStageOptions& opts = {}) {
  if (opts.mops) {
    if (opts.transforms.empty()) throw InvalidArgument("lfe: transform set is empty");
    if (std::find(opts.transforms.begin(), opts.transforms.end(), DihedralTransform::identity()) ==
        opts.transforms.end()) {
      throw InvalidArgument("lfe: transform set must include the identity");
    }
  }
  if (opts.pad_mode == PadMode::reflect && window_side > 2 * std::min(img.height(), img.width())) {
    throw InvalidArgument("lfe: reflect padding undefined for window side " + std::to_string(window_side) +
                          " on a " + img.shape_string() + " image");
  }
  const LocalLayout layout = local_layout(img.height(), img.width(), window_side, opts);
  const WindowPlan& plan = layout.plan;
  const ImageBuffer canvas =
      pad_margins(img, layout.top, plan.canvas_height - layout.top - img.height(), layout.left,
                  plan.canvas_width - layout.left - img.width(), opts.pad_mode);
  const std::vector<DihedralTransform> transforms =
      opts.mops ? opts.transforms : std::vector<DihedralTransform>{DihedralTransform::identity()};

  // Windows are predicted in bounded batches and blended in ascending order.
  BlendAccumulator acc(plan, img.channels());
  const std::size_t workers = std::max<std::size_t>(opts.workers, 1);
  const std::size_t batch = 2 * workers;
  std::vector<std::optional<ImageBuffer>> predictions(batch);
  for (std::size_t begin = 0; begin < plan.origins.size(); begin += batch) {
    const std::size_t n = std::min(batch, plan.origins.size() - begin);
    parallel_for(n, workers, [&](std::size_t i) {
      const WindowOrigin o = plan.origins[begin + i];
      try {
        predictions[i] = detail::predict_window(
            proc, extract(canvas, o.y, o.x, window_side, window_side), transforms);
      } catch (...) {
        throw ProcessorError("lfe", "window at (" + std::to_string(o.y) + "," + std::to_string(o.x) + ")",
                             std::current_exception());
      }
    });
    for (std::size_t i = 0; i < n; ++i) {
      acc.add(plan.origins[begin + i], *predictions[i]);
      predictions[i].reset();
    }
  }
  return extract(acc.finish(), layout.top, layout.left, img.height(), img.width());
}

}  // namespace sglc
