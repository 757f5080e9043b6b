#pragma once

#include <sglc/error.hpp>
#include <sglc/image.hpp>
#include <sglc/parallel.hpp>
#include <sglc/processor.hpp>

#include <cstddef>
#include <exception>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace sglc {

/**
 * The N strided subsamples of a padded image.
 *
 * Patch k has offset (k / n_w, k % n_w) and element (i, j) holds padded sample
 * (i * n_h + k / n_w, j * n_w + k % n_w). Every padded sample lands in exactly
 * one patch, so each patch is a thumbnail of the whole scene.
 */
struct GridPatchSet {
  GridGeometry geometry;
  std::vector<ImageBuffer> patches;

  std::size_t row_offset(std::size_t k) const noexcept { return k / geometry.cols; }
  std::size_t col_offset(std::size_t k) const noexcept { return k % geometry.cols; }
};

namespace detail {

inline void check_padded(const ImageBuffer& padded, const GridGeometry& g) {
  if (padded.height() != g.padded_height || padded.width() != g.padded_width) {
    throw ShapeMismatch("grid: image " + padded.shape_string() + " does not match padded geometry " +
                        std::to_string(g.padded_height) + "x" + std::to_string(g.padded_width));
  }
  if (g.patch_side == 0 || g.rows * g.patch_side != g.padded_height || g.cols * g.patch_side != g.padded_width) {
    throw InvalidArgument("grid: inconsistent geometry");
  }
}

inline ImageBuffer gather_grid_patch(const ImageBuffer& padded, const GridGeometry& g, std::size_t k) {
  const std::size_t r = k / g.cols, c = k % g.cols, side = g.patch_side;
  ImageBuffer patch(side, side, padded.channels());
  for (std::size_t i = 0; i < side; ++i) {
    for (std::size_t j = 0; j < side; ++j) {
      auto src = padded.pixel(i * g.rows + r, j * g.cols + c);
      std::copy(src.begin(), src.end(), patch.pixel(i, j).begin());
    }
  }
  return patch;
}

inline void scatter_grid_patch(ImageBuffer& canvas, const GridGeometry& g, std::size_t k, const ImageBuffer& patch) {
  const std::size_t r = k / g.cols, c = k % g.cols, side = g.patch_side;
  for (std::size_t i = 0; i < side; ++i) {
    for (std::size_t j = 0; j < side; ++j) {
      auto src = patch.pixel(i, j);
      std::copy(src.begin(), src.end(), canvas.pixel(i * g.rows + r, j * g.cols + c).begin());
    }
  }
}

}  // namespace detail

inline GridPatchSet grid_split(const ImageBuffer& padded, const GridGeometry& geometry) {
  detail::check_padded(padded, geometry);
  GridPatchSet set{geometry, {}};
  set.patches.reserve(geometry.patch_count());
  for (std::size_t k = 0; k < geometry.patch_count(); ++k) {
    set.patches.push_back(detail::gather_grid_patch(padded, geometry, k));
  }
  return set;
}

/// Exact inverse of grid_split.
inline ImageBuffer grid_merge(const GridPatchSet& set) {
  const GridGeometry& g = set.geometry;
  if (set.patches.size() != g.patch_count()) {
    throw ShapeMismatch("grid_merge: expected " + std::to_string(g.patch_count()) + " patches, got " +
                        std::to_string(set.patches.size()));
  }
  if (g.patch_side == 0 || g.rows * g.patch_side != g.padded_height || g.cols * g.patch_side != g.padded_width) {
    throw InvalidArgument("grid_merge: inconsistent geometry");
  }
  const std::size_t channels = set.patches.front().channels();
  for (std::size_t k = 0; k < set.patches.size(); ++k) {
    const ImageBuffer& p = set.patches[k];
    if (p.height() != g.patch_side || p.width() != g.patch_side || p.channels() != channels) {
      throw ShapeMismatch("grid_merge: patch " + std::to_string(k) + " has shape " + p.shape_string());
    }
  }
  ImageBuffer out(g.padded_height, g.padded_width, channels);
  for (std::size_t k = 0; k < set.patches.size(); ++k) detail::scatter_grid_patch(out, g, k, set.patches[k]);
  return out;
}

struct GridStageOptions {
  std::size_t workers = 1;
  PadMode pad_mode = PadMode::reflect;
  // Called with (k, input patch) before processing; used for debug dumps.
  std::function<void(std::size_t, const ImageBuffer&)> on_patch;
};

/// Global stage: pad, split into grid patches, process each, merge, crop.
inline ImageBuffer gfg_stage(const ImageBuffer& img, std::size_t grid_side, const PatchProcessor& proc,
                             const GridStageOptions& opts = {}) {
  const GridGeometry geometry = GridGeometry::make(img, grid_side);
  GridPatchSet set = grid_split(pad(img, geometry, opts.pad_mode), geometry);
  if (opts.on_patch) {
    for (std::size_t k = 0; k < set.patches.size(); ++k) opts.on_patch(k, set.patches[k]);
  }
  parallel_for(set.patches.size(), opts.workers, [&](std::size_t k) {
    try {
      set.patches[k] = invoke_processor(proc, set.patches[k]);
    } catch (...) {
      throw ProcessorError("gfg", "grid patch " + std::to_string(k) + " of " + std::to_string(set.patches.size()),
                           std::current_exception());
    }
  });
  return crop(grid_merge(set), img.height(), img.width());
}

}  // namespace sglc
