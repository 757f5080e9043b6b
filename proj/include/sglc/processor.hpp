#pragma once

#include <sglc/error.hpp>
#include <sglc/image.hpp>

#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <utility>

namespace sglc {

/**
 * Per-patch image transform plugged into the global and local stages.
 *
 * Implementations must preserve shape, be safe to call concurrently and
 * return the same output for the same input. Stages call them through
 * invoke_processor(), which enforces the shape contract and clamps the result
 * to [0, 1].
 */
class PatchProcessor {
 public:
  virtual ~PatchProcessor() = default;

  virtual ImageBuffer process(const ImageBuffer& patch) const = 0;
  virtual std::string name() const = 0;

  // Patch side the processor was built for; nullopt accepts any size.
  virtual std::optional<std::size_t> input_side() const { return std::nullopt; }
};

/// Processor failure annotated with where in the pipeline it happened. The
/// original exception stays reachable through cause().
class ProcessorError : public Error {
 public:
  ProcessorError(std::string stage, std::string location, std::exception_ptr cause)
      : Error(stage + " stage, " + location + ": " + describe(cause)),
        stage_(std::move(stage)),
        location_(std::move(location)),
        cause_(std::move(cause)) {}

  const std::string& stage() const noexcept { return stage_; }
  const std::string& location() const noexcept { return location_; }
  const std::exception_ptr& cause() const noexcept { return cause_; }

 private:
  static std::string describe(const std::exception_ptr& e) {
    try {
      if (e) std::rethrow_exception(e);
    } catch (const std::exception& ex) {
      return ex.what();
    } catch (...) {
    }
    return "unknown error";
  }

  std::string stage_;
  std::string location_;
  std::exception_ptr cause_;
};

inline ImageBuffer invoke_processor(const PatchProcessor& proc, const ImageBuffer& patch) {
  if (auto side = proc.input_side(); side && (patch.height() != *side || patch.width() != *side)) {
    throw ShapeMismatch(proc.name() + " expects " + std::to_string(*side) + "x" + std::to_string(*side) +
                        " patches, got " + patch.shape_string());
  }
  ImageBuffer out = proc.process(patch);
  if (!out.same_shape(patch)) {
    throw ShapeMismatch(proc.name() + " changed patch shape from " + patch.shape_string() + " to " +
                        out.shape_string());
  }
  if (!out.all_finite()) throw Error(proc.name() + " produced non-finite samples");
  clamp_unit(out);
  return out;
}

class IdentityProcessor final : public PatchProcessor {
 public:
  ImageBuffer process(const ImageBuffer& patch) const override { return patch; }
  std::string name() const override { return "identity"; }
};

/// Applies a scalar function to every sample.
class PixelMapProcessor final : public PatchProcessor {
 public:
  PixelMapProcessor(std::function<double(double)> fn, std::string name)
      : fn_(std::move(fn)), name_(std::move(name)) {}

  ImageBuffer process(const ImageBuffer& patch) const override {
    ImageBuffer out = patch;
    for (double& v : out.samples()) v = fn_(v);
    return out;
  }
  std::string name() const override { return name_; }

 private:
  std::function<double(double)> fn_;
  std::string name_;
};

}  // namespace sglc
