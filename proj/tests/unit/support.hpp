#pragma once

#include <sglc.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace sglc::test {

/// Samples (next() >> 11) * 2^-53 in raster order, scaled to [lo, hi).
inline ImageBuffer random_image(std::uint64_t seed, std::size_t h, std::size_t w, std::size_t c, double lo = 0.0,
                                double hi = 1.0) {
  CounterRng rng(seed);
  ImageBuffer img(h, w, c);
  for (double& v : img.samples()) v = lo + (hi - lo) * static_cast<double>(rng.next() >> 11) * 0x1.0p-53;
  return img;
}

inline ImageBuffer ramp_image(std::size_t h, std::size_t w, std::size_t c = 1) {
  ImageBuffer img(h, w, c);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) img.at(y, x, ch) = static_cast<double>((y * w + x) * c + ch);
    }
  }
  return img;
}

struct HazyScene {
  ImageBuffer clean;
  ImageBuffer hazy;
  ScatteringParams params;
};

/**
 * Smooth colored scene with scattered shadow pixels (so the dark channel of
 * the clean image is near zero), a depth ramp and a bright grayish airlight.
 */
inline HazyScene synthetic_scene(std::uint64_t seed, std::size_t h, std::size_t w) {
  CounterRng rng(seed);
  auto unit = [&] { return static_cast<double>(rng.next() >> 11) * 0x1.0p-53; };
  const double fy = 2.0 + 4.0 * unit(), fx = 2.0 + 4.0 * unit();
  const double phase[3] = {6.28 * unit(), 6.28 * unit(), 6.28 * unit()};
  const std::size_t dim = rng.uniform(0, 2);
  ImageBuffer clean(h, w, 3);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double u = static_cast<double>(y) / h, v = static_cast<double>(x) / w;
      const bool shadow = unit() < 0.08;
      for (std::size_t c = 0; c < 3; ++c) {
        double s = 0.25 + 0.6 * (0.5 + 0.5 * std::sin(fy * u * 3.0 + fx * v * 2.0 + phase[c]));
        if (c == dim) s *= 0.3;
        if (shadow) s *= 0.1;
        clean.at(y, x, c) = s;
      }
    }
  }
  ScatteringParams params;
  params.beta = 0.8 + 0.6 * unit();
  const double a = 0.8 + 0.15 * unit();
  params.atmospheric_light = {a, a + 0.02, a + 0.04};
  params.depth = ImageBuffer(h, w, 1);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      params.depth.at(y, x) = 0.3 + 1.2 * static_cast<double>(y) / h + 0.2 * std::sin(3.0 * x / w);
    }
  }
  ImageBuffer hazy = synthesize_haze(clean, params);
  return {std::move(clean), std::move(hazy), std::move(params)};
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "sglc-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char ch : s) {
    if (ch == '\'') {
      out += "'\\''";
    } else {
      out += ch;
    }
  }
  return out + "'";
}

struct CliResult {
  int exit_code = -1;
  std::string out;
};

/// Runs the sglc binary with the given arguments; stderr is discarded.
inline CliResult run_cli(const std::string& args) {
  const std::string cmd = shell_quote(SGLC_CLI_PATH) + " " + args + " 2>/dev/null";
  CliResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace sglc::test
