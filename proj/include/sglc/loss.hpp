#pragma once

#include <sglc/error.hpp>
#include <sglc/image.hpp>
#include <sglc/pyramid.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace sglc {

struct LossOptions {
  double epsilon = 1e-3;
  std::size_t pyramid_depth = 5;  // reduced automatically for small images
  bool include_residual = true;   // count the low-pass level in the pyramid term
  bool mean_reduction = false;    // divide both terms by the sample count
};

struct LossValue {
  double total = 0.0;
  double pixel_term = 0.0;
  double pyramid_term = 0.0;
  double epsilon = 0.0;
};

namespace detail {

inline void check_loss_inputs(const ImageBuffer& target, const ImageBuffer& pred, const LossOptions& opts) {
  require_same_shape(target, pred, "sglc_loss");
  if (!(opts.epsilon > 0.0)) throw InvalidArgument("loss epsilon must be positive");
  if (opts.pyramid_depth == 0) throw InvalidArgument("pyramid depth must be at least 1");
}

inline ImageBuffer difference(const ImageBuffer& pred, const ImageBuffer& target) {
  ImageBuffer d = pred;
  add_scaled(d, target, -1.0);
  return d;
}

inline double sum_squares(const ImageBuffer& img) {
  double s = 0.0;
  for (double v : img.samples()) s += v * v;
  return s;
}

inline std::size_t effective_depth(const ImageBuffer& img, const LossOptions& opts) {
  return std::min(opts.pyramid_depth, max_pyramid_depth(img.height(), img.width()));
}

}  // namespace detail

/**
 * Charbonnier-style composite loss
 *
 *   total = sqrt(|pred - target|^2 + |P(pred) - P(target)|^2 + eps^2)
 *
 * where P is the Laplacian pyramid and |.|^2 sums squares over every sample
 * of every level. The pyramid is linear, so P(pred) - P(target) = P(pred - target).
 */
inline LossValue sglc_loss(const ImageBuffer& target, const ImageBuffer& pred, const LossOptions& opts = {}) {
  detail::check_loss_inputs(target, pred, opts);
  const ImageBuffer diff = detail::difference(pred, target);
  const LaplacianPyramid pyr = build_pyramid(diff, detail::effective_depth(diff, opts));
  const double scale = opts.mean_reduction ? 1.0 / static_cast<double>(diff.size()) : 1.0;

  LossValue v;
  v.epsilon = opts.epsilon;
  v.pixel_term = scale * detail::sum_squares(diff);
  for (std::size_t l = 0; l < pyr.depth(); ++l) {
    if (l + 1 == pyr.depth() && !opts.include_residual && pyr.depth() > 1) break;
    v.pyramid_term += scale * detail::sum_squares(pyr.levels[l]);
  }
  v.total = std::hypot(std::sqrt(v.pixel_term + v.pyramid_term), opts.epsilon);
  return v;
}

/// Gradient of sglc_loss(...).total with respect to pred.
inline ImageBuffer sglc_loss_grad(const ImageBuffer& target, const ImageBuffer& pred, const LossOptions& opts = {}) {
  detail::check_loss_inputs(target, pred, opts);
  const LossValue value = sglc_loss(target, pred, opts);
  const ImageBuffer diff = detail::difference(pred, target);
  LaplacianPyramid pyr = build_pyramid(diff, detail::effective_depth(diff, opts));
  if (!opts.include_residual && pyr.depth() > 1) {
    for (double& s : pyr.levels.back().samples()) s = 0.0;
  }
  ImageBuffer grad = pyramid_adjoint(pyr);
  detail::add_scaled(grad, diff, 1.0);
  const double scale = opts.mean_reduction ? 1.0 / static_cast<double>(diff.size()) : 1.0;
  // d total = (2 s diff + 2 s P^T P diff) / (2 total)
  const double k = scale / value.total;
  for (double& g : grad.samples()) g *= k;
  return grad;
}

}  // namespace sglc
