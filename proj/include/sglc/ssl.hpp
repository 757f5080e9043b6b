#pragma once

#include <sglc/error.hpp>
#include <sglc/image.hpp>
#include <sglc/image_io.hpp>
#include <sglc/parallel.hpp>
#include <sglc/rng.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace sglc {

/// Random white-square corruption used to build self-supervised pairs.
struct CorruptionSpec {
  std::size_t min_squares = 1;
  std::size_t max_squares = 8;
  double min_side_fraction = 0.01;  // of min(H, W)
  double max_side_fraction = 0.10;
  double fill_value = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (min_squares > max_squares) throw InvalidArgument("square count range is not ordered");
    if (!(min_side_fraction > 0.0) || min_side_fraction > max_side_fraction || max_side_fraction > 1.0) {
      throw InvalidArgument("side fraction range must satisfy 0 < lo <= hi <= 1");
    }
    if (!(fill_value >= 0.0 && fill_value <= 1.0)) throw InvalidArgument("fill value must lie in [0, 1]");
  }
};

struct Square {
  std::size_t y = 0;
  std::size_t x = 0;
  std::size_t side = 0;
  friend bool operator==(const Square&, const Square&) = default;
};

struct Corruption {
  ImageBuffer corrupted;
  ImageBuffer mask;  // H x W x 1, 1 inside any square
  std::vector<Square> squares;
};

/// Fills the given squares on every channel. Overlapping squares are fine.
inline Corruption apply_squares(const ImageBuffer& clean, const std::vector<Square>& squares, double fill_value) {
  Corruption out{clean, ImageBuffer(clean.height(), clean.width(), 1), squares};
  for (const Square& s : squares) {
    if (s.side == 0 || s.y + s.side > clean.height() || s.x + s.side > clean.width()) {
      throw InvalidArgument("square at (" + std::to_string(s.y) + "," + std::to_string(s.x) + ") side " +
                            std::to_string(s.side) + " does not fit " + clean.shape_string());
    }
    for (std::size_t y = s.y; y < s.y + s.side; ++y) {
      for (std::size_t x = s.x; x < s.x + s.side; ++x) {
        for (double& v : out.corrupted.pixel(y, x)) v = fill_value;
        out.mask.at(y, x) = 1.0;
      }
    }
  }
  return out;
}

inline Corruption corrupt(const ImageBuffer& clean, const CorruptionSpec& spec) {
  spec.validate();
  if (clean.height() < 10 || clean.width() < 10) {
    throw InvalidArgument("corrupt: image " + clean.shape_string() + " smaller than 10x10");
  }
  const auto m = static_cast<double>(std::min(clean.height(), clean.width()));
  const auto lo = static_cast<std::size_t>(std::max(1.0, std::ceil(spec.min_side_fraction * m - 1e-9)));
  const auto hi_raw = std::floor(spec.max_side_fraction * m + 1e-9);
  if (hi_raw < 1.0 || static_cast<double>(lo) > m) {
    throw InvalidArgument("corrupt: image " + clean.shape_string() + " too small for the minimum square side");
  }
  const std::size_t hi = std::max(lo, static_cast<std::size_t>(hi_raw));

  CounterRng rng(spec.seed);
  const std::size_t count = rng.uniform(spec.min_squares, spec.max_squares);
  std::vector<Square> squares;
  squares.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Square s;
    s.side = rng.uniform(lo, hi);
    s.y = rng.uniform(0, clean.height() - s.side);
    s.x = rng.uniform(0, clean.width() - s.side);
    squares.push_back(s);
  }
  return apply_squares(clean, squares, spec.fill_value);
}

// ---------------------------------------------------------------------------
// Corpus generation

struct CorpusRecord {
  std::string source;
  std::string clean;
  std::string corrupted;
  std::string mask;
  std::uint64_t seed = 0;
  std::vector<Square> squares;
  std::optional<std::string> error;  // set when the source was skipped
};

inline nlohmann::ordered_json to_json(const CorpusRecord& r) {
  nlohmann::ordered_json j;
  j["source"] = r.source;
  if (r.error) {
    j["skipped"] = true;
    j["error"] = *r.error;
    return j;
  }
  j["clean"] = r.clean;
  j["corrupted"] = r.corrupted;
  j["mask"] = r.mask;
  j["seed"] = r.seed;
  j["squares"] = nlohmann::ordered_json::array();
  for (const auto& s : r.squares) j["squares"].push_back({{"y", s.y}, {"x", s.x}, {"side", s.side}});
  return j;
}

/// Image files directly inside dir, sorted by file name.
inline std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_path(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.filename() < b.filename(); });
  return out;
}

inline constexpr const char* kManifestName = "manifest.jsonl";

/**
 * Writes <stem>_corrupted.png, <stem>_clean.png and <stem>_mask.png for every
 * image in input_dir plus a manifest.jsonl with one record per source.
 *
 * Image i (in file-name order) is corrupted with seed derive_seed(spec.seed, i),
 * so the output does not depend on `workers`. Unreadable sources are recorded
 * as skipped; failing to write output throws.
 */
inline std::vector<CorpusRecord> generate_corpus(const std::filesystem::path& input_dir,
                                                 const std::filesystem::path& output_dir, const CorruptionSpec& spec,
                                                 std::size_t workers = 1) {
  spec.validate();
  const auto inputs = list_images(input_dir);
  std::error_code ec;
  std::filesystem::create_directories(output_dir, ec);
  if (ec || !std::filesystem::is_directory(output_dir)) {
    throw IoError("cannot create output directory '" + output_dir.string() + "'");
  }

  std::vector<CorpusRecord> records(inputs.size());
  parallel_for(inputs.size(), workers, [&](std::size_t i) {
    CorpusRecord& rec = records[i];
    rec.source = inputs[i].filename().string();
    rec.seed = derive_seed(spec.seed, i);
    std::optional<RasterFile> raster;
    try {
      raster = load_raster(inputs[i]);
    } catch (const Error& e) {
      rec.error = e.what();
      return;
    }
    CorruptionSpec local = spec;
    local.seed = rec.seed;
    std::optional<Corruption> c;
    try {
      c = corrupt(raster->image, local);
    } catch (const InvalidArgument& e) {
      rec.error = e.what();
      return;
    }
    const std::uint32_t max_value = raster->max_value > 255 ? 65535 : 255;
    const std::string stem = inputs[i].stem().string();
    rec.clean = stem + "_clean.png";
    rec.corrupted = stem + "_corrupted.png";
    rec.mask = stem + "_mask.png";
    rec.squares = c->squares;
    write_image(raster->image, output_dir / rec.clean, max_value);
    write_image(c->corrupted, output_dir / rec.corrupted, max_value);
    write_image(c->mask, output_dir / rec.mask, 255);
  });

  std::ofstream manifest(output_dir / kManifestName, std::ios::trunc);
  if (!manifest) throw IoError("cannot write manifest in '" + output_dir.string() + "'");
  for (const auto& r : records) manifest << to_json(r).dump() << '\n';
  if (!manifest) throw IoError("manifest write failed in '" + output_dir.string() + "'");
  return records;
}

}  // namespace sglc
