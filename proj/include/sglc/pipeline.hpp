#pragma once

#include <sglc/config.hpp>
#include <sglc/error.hpp>
#include <sglc/external.hpp>
#include <sglc/grid.hpp>
#include <sglc/image.hpp>
#include <sglc/image_io.hpp>
#include <sglc/metrics.hpp>
#include <sglc/parallel.hpp>
#include <sglc/processor.hpp>
#include <sglc/scattering.hpp>
#include <sglc/ssl.hpp>
#include <sglc/window.hpp>

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace sglc {

inline std::shared_ptr<PatchProcessor> make_processor(const ProcessorSpec& spec, const PipelineConfig& cfg) {
  switch (spec.kind) {
    case ProcessorSpec::Kind::identity: return std::make_shared<IdentityProcessor>();
    case ProcessorSpec::Kind::dcp: return std::make_shared<DarkChannelProcessor>(spec.dcp);
    case ProcessorSpec::Kind::external: {
      ExternalCommand cmd;
      try {
        cmd.argv = split_command_line(spec.command);
      } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("external command: ") + e.what());
      }
      cmd.workdir = cfg.external_workdir;
      cmd.timeout_seconds = spec.timeout_seconds;
      cmd.max_concurrent = cfg.workers;
      return std::make_shared<ExternalProcessor>(std::move(cmd));
    }
  }
  throw ConfigError("unknown processor kind");
}

struct StageProcessors {
  std::shared_ptr<PatchProcessor> gfg;
  std::shared_ptr<PatchProcessor> lfe;
};

inline StageProcessors make_processors(const PipelineConfig& cfg) {
  return {make_processor(cfg.gfg_processor, cfg), make_processor(cfg.lfe_processor, cfg)};
}

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct PipelineResult {
  ImageBuffer image;
  std::vector<StageTiming> stages;
};

struct PipelineHooks {
  // Receives every grid patch before the global stage processes it.
  std::function<void(std::size_t, const ImageBuffer&)> on_grid_patch;
};

inline GridStageOptions grid_options(const PipelineConfig& cfg) {
  GridStageOptions o;
  o.workers = cfg.workers;
  o.pad_mode = cfg.padding;
  return o;
}

inline LocalStageOptions local_options(const PipelineConfig& cfg) {
  LocalStageOptions o;
  o.mops = cfg.mops;
  o.blend = cfg.blend;
  o.transforms = cfg.transforms;
  o.workers = cfg.workers;
  o.pad_mode = cfg.padding;
  return o;
}

/// Applies the stages in cfg.order to one image.
inline PipelineResult run_pipeline(const ImageBuffer& img, const PipelineConfig& cfg, const StageProcessors& procs,
                                   const PipelineHooks& hooks = {}) {
  cfg.validate();
  if (!procs.gfg || !procs.lfe) throw InvalidArgument("run_pipeline: missing processor");
  using clock = std::chrono::steady_clock;

  PipelineResult result{img, {}};
  auto run_stage = [&](const std::string& name) {
    const auto start = clock::now();
    if (name == "gfg") {
      GridStageOptions o = grid_options(cfg);
      o.on_patch = hooks.on_grid_patch;
      result.image = gfg_stage(result.image, cfg.grid_side, *procs.gfg, o);
    } else {
      result.image = lfe_stage(result.image, cfg.window_side, *procs.lfe, local_options(cfg));
    }
    result.stages.push_back({name, std::chrono::duration<double>(clock::now() - start).count()});
  };
  switch (cfg.order) {
    case StageOrder::gfg_then_lfe: run_stage("gfg"); run_stage("lfe"); break;
    case StageOrder::lfe_then_gfg: run_stage("lfe"); run_stage("gfg"); break;
    case StageOrder::gfg_only: run_stage("gfg"); break;
    case StageOrder::lfe_only: run_stage("lfe"); break;
  }
  return result;
}

inline PipelineResult run_pipeline(const ImageBuffer& img, const PipelineConfig& cfg) {
  return run_pipeline(img, cfg, make_processors(cfg));
}

// ---------------------------------------------------------------------------
// Batch runs and reports

struct RunRecord {
  std::string input;
  std::string output;
  std::vector<StageTiming> stages;
  double total_seconds = 0.0;
  std::optional<double> psnr;
  std::optional<double> ssim;
  std::optional<std::string> error;
};

struct RunReport {
  std::vector<RunRecord> records;

  std::size_t failures() const {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [](const RunRecord& r) { return r.error.has_value(); }));
  }
};

/// JSON has no infinity; identical images report PSNR as the string "inf".
inline nlohmann::ordered_json json_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

namespace detail {

inline void add_mean(nlohmann::ordered_json& j, const char* key, double sum, std::size_t n) {
  if (n == 0) {
    j[key] = nullptr;
  } else {
    j[key] = json_number(sum / static_cast<double>(n));
  }
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const RunReport& report, const PipelineConfig* cfg = nullptr) {
  nlohmann::ordered_json j;
  if (cfg) {
    j["config"] = nlohmann::ordered_json::object();
    j["config"]["order"] = std::string(to_string(cfg->order));
    j["config"]["grid_side"] = cfg->grid_side;
    j["config"]["window_side"] = cfg->window_side;
    j["config"]["mops"] = cfg->mops;
    j["config"]["gfg_processor"] = processor_selector(cfg->gfg_processor);
    j["config"]["lfe_processor"] = processor_selector(cfg->lfe_processor);
    j["config"]["workers"] = cfg->workers;
  }
  j["records"] = nlohmann::ordered_json::array();
  std::map<std::string, std::pair<double, std::size_t>> stage_sums;
  double total_sum = 0.0, psnr_sum = 0.0, ssim_sum = 0.0;
  std::size_t ok = 0, psnr_n = 0, ssim_n = 0;
  for (const auto& r : report.records) {
    nlohmann::ordered_json rec;
    rec["input"] = r.input;
    rec["output"] = r.output;
    if (r.error) {
      rec["error"] = *r.error;
      j["records"].push_back(rec);
      continue;
    }
    rec["stages"] = nlohmann::ordered_json::object();
    for (const auto& s : r.stages) {
      rec["stages"][s.stage] = s.seconds;
      stage_sums[s.stage].first += s.seconds;
      ++stage_sums[s.stage].second;
    }
    rec["total_seconds"] = r.total_seconds;
    total_sum += r.total_seconds;
    ++ok;
    if (r.psnr) {
      rec["psnr"] = json_number(*r.psnr);
      psnr_sum += *r.psnr;
      ++psnr_n;
    }
    if (r.ssim) {
      rec["ssim"] = *r.ssim;
      ssim_sum += *r.ssim;
      ++ssim_n;
    }
    j["records"].push_back(rec);
  }
  nlohmann::ordered_json mean;
  detail::add_mean(mean, "total_seconds", total_sum, ok);
  for (const auto& [stage, sum] : stage_sums) {
    detail::add_mean(mean, (stage + "_seconds").c_str(), sum.first, sum.second);
  }
  detail::add_mean(mean, "psnr", psnr_sum, psnr_n);
  detail::add_mean(mean, "ssim", ssim_sum, ssim_n);
  j["mean"] = mean;
  j["failures"] = report.failures();
  return j;
}

inline void write_json_file(const nlohmann::ordered_json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

/// Files to process: a single image or every image directly inside a directory.
inline std::vector<std::filesystem::path> collect_inputs(const std::filesystem::path& input) {
  if (std::filesystem::is_directory(input)) return list_images(input);
  if (std::filesystem::is_regular_file(input)) return {input};
  throw IoError("input '" + input.string() + "' does not exist");
}

struct BatchOptions {
  std::filesystem::path input;
  std::filesystem::path output_dir;
  std::optional<std::filesystem::path> reference_dir;
  std::optional<std::filesystem::path> dump_patches_dir;  // grid patches as PNG
  std::optional<std::filesystem::path> coverage_dir;      // window coverage maps as PNG
};

inline std::uint32_t output_max_value(std::uint32_t source_max) { return source_max > 255 ? 65535 : 255; }

/**
 * Runs the pipeline over every input and writes outputs under the same file
 * names. A failing image is recorded and the batch continues.
 */
inline RunReport run_batch(const BatchOptions& opts, const PipelineConfig& cfg, const StageProcessors& procs) {
  cfg.validate();
  const auto inputs = collect_inputs(opts.input);
  for (const auto* dir : {&opts.output_dir, opts.dump_patches_dir ? &*opts.dump_patches_dir : nullptr,
                          opts.coverage_dir ? &*opts.coverage_dir : nullptr}) {
    if (!dir) continue;
    std::error_code ec;
    std::filesystem::create_directories(*dir, ec);
    if (!std::filesystem::is_directory(*dir)) throw IoError("cannot create directory '" + dir->string() + "'");
  }

  RunReport report;
  report.records.resize(inputs.size());
  parallel_for(inputs.size(), cfg.image_jobs, [&](std::size_t i) {
    const auto& path = inputs[i];
    RunRecord& rec = report.records[i];
    rec.input = path.string();
    rec.output = (opts.output_dir / path.filename()).string();
    const std::string stem = path.stem().string();
    try {
      const auto start = std::chrono::steady_clock::now();
      const RasterFile raster = load_raster(path);
      PipelineHooks hooks;
      if (opts.dump_patches_dir) {
        hooks.on_grid_patch = [&](std::size_t k, const ImageBuffer& patch) {
          write_image(patch, *opts.dump_patches_dir / (stem + "_grid_" + std::to_string(k) + ".png"));
        };
      }
      if (opts.coverage_dir && cfg.order != StageOrder::gfg_only) {
        const LocalLayout layout = local_layout(raster.image.height(), raster.image.width(), cfg.window_side,
                                                local_options(cfg));
        write_image(coverage_map(layout.plan), *opts.coverage_dir / (stem + "_coverage.png"));
      }
      PipelineResult result = run_pipeline(raster.image, cfg, procs, hooks);
      write_image(result.image, rec.output, output_max_value(raster.max_value));
      rec.stages = std::move(result.stages);
      rec.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (opts.reference_dir) {
        // Scored as written, so the numbers agree with `metrics` on the output directory.
        const ImageBuffer written = read_image(rec.output);
        const ImageBuffer ref = read_image(*opts.reference_dir / path.filename());
        require_same_shape(ref, written, "reference");
        rec.psnr = psnr(ref, written);
        if (ref.height() >= kSsimWindow && ref.width() >= kSsimWindow) rec.ssim = ssim(ref, written);
      }
    } catch (const std::exception& e) {
      rec.error = e.what();
      rec.stages.clear();
    }
  });
  return report;
}

// ---------------------------------------------------------------------------
// Metrics over two directories

struct MetricRecord {
  std::string name;
  std::optional<double> psnr;
  std::optional<double> ssim;
  std::optional<std::string> error;
};

struct MetricReport {
  std::vector<MetricRecord> pairs;
  std::vector<std::string> orphans;  // present in only one directory

  bool ok() const {
    return orphans.empty() &&
           std::none_of(pairs.begin(), pairs.end(), [](const MetricRecord& r) { return r.error.has_value(); });
  }
};

inline MetricReport compare_directories(const std::filesystem::path& ref_dir, const std::filesystem::path& test_dir) {
  std::map<std::string, std::filesystem::path> ref, test;
  for (const auto& p : list_images(ref_dir)) ref[p.filename().string()] = p;
  for (const auto& p : list_images(test_dir)) test[p.filename().string()] = p;

  MetricReport report;
  for (const auto& [name, path] : ref) {
    auto it = test.find(name);
    if (it == test.end()) {
      report.orphans.push_back(name + " (missing from " + test_dir.string() + ")");
      continue;
    }
    MetricRecord rec{name, {}, {}, {}};
    try {
      const ImageBuffer a = read_image(path);
      const ImageBuffer b = read_image(it->second);
      require_same_shape(a, b, name);
      rec.psnr = psnr(a, b);
      if (a.height() >= kSsimWindow && a.width() >= kSsimWindow) rec.ssim = ssim(a, b);
    } catch (const Error& e) {
      rec.error = e.what();
    }
    report.pairs.push_back(std::move(rec));
  }
  for (const auto& [name, path] : test) {
    if (!ref.contains(name)) report.orphans.push_back(name + " (missing from " + ref_dir.string() + ")");
  }
  return report;
}

inline nlohmann::ordered_json to_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["pairs"] = nlohmann::ordered_json::array();
  double psnr_sum = 0.0, ssim_sum = 0.0;
  std::size_t psnr_n = 0, ssim_n = 0;
  for (const auto& r : report.pairs) {
    nlohmann::ordered_json rec;
    rec["name"] = r.name;
    if (r.error) rec["error"] = *r.error;
    if (r.psnr) {
      rec["psnr"] = json_number(*r.psnr);
      psnr_sum += *r.psnr;
      ++psnr_n;
    }
    if (r.ssim) {
      rec["ssim"] = *r.ssim;
      ssim_sum += *r.ssim;
      ++ssim_n;
    }
    j["pairs"].push_back(rec);
  }
  j["orphans"] = report.orphans;
  nlohmann::ordered_json mean;
  detail::add_mean(mean, "psnr", psnr_sum, psnr_n);
  detail::add_mean(mean, "ssim", ssim_sum, ssim_n);
  j["mean"] = mean;
  return j;
}

// ---------------------------------------------------------------------------
// Enhancer training data export

struct ExportRecord {
  std::string source;
  std::size_t y = 0;
  std::size_t x = 0;
  std::size_t side = 0;
  std::string dehazed;
  std::string clean;
};

inline nlohmann::ordered_json to_json(const ExportRecord& r) {
  nlohmann::ordered_json j;
  j["source"] = r.source;
  j["y"] = r.y;
  j["x"] = r.x;
  j["side"] = r.side;
  j["dehazed"] = r.dehazed;
  j["clean"] = r.clean;
  return j;
}

/// Padded to a multiple of the window side on the bottom and right.
inline ImageBuffer pad_to_windows(const ImageBuffer& img, std::size_t side, PadMode mode) {
  return pad(img, GridGeometry::make(img, side), mode);
}

/**
 * Runs the global stage on every hazy image, pads the result and its clean
 * counterpart to window multiples and writes aligned non-overlapping window
 * pairs plus manifest.jsonl. Unpaired file names are an error before any work.
 */
inline std::vector<ExportRecord> export_em_dataset(const std::filesystem::path& hazy_dir,
                                                   const std::filesystem::path& clean_dir,
                                                   const std::filesystem::path& output_dir,
                                                   const PipelineConfig& cfg, const PatchProcessor& gfg) {
  cfg.validate();
  const auto hazy = list_images(hazy_dir);
  const auto clean = list_images(clean_dir);
  std::set<std::string> hazy_names, clean_names;
  for (const auto& p : hazy) hazy_names.insert(p.filename().string());
  for (const auto& p : clean) clean_names.insert(p.filename().string());
  std::string unpaired;
  for (const auto& n : hazy_names) {
    if (!clean_names.contains(n)) unpaired += " " + n;
  }
  for (const auto& n : clean_names) {
    if (!hazy_names.contains(n)) unpaired += " " + n;
  }
  if (!unpaired.empty()) throw InvalidArgument("unpaired files:" + unpaired);

  std::error_code ec;
  std::filesystem::create_directories(output_dir, ec);
  if (!std::filesystem::is_directory(output_dir)) {
    throw IoError("cannot create output directory '" + output_dir.string() + "'");
  }

  const std::size_t side = cfg.window_side;
  std::vector<ExportRecord> records;
  for (const auto& path : hazy) {
    const RasterFile h = load_raster(path);
    const RasterFile c = load_raster(clean_dir / path.filename());
    require_same_shape(h.image, c.image, path.filename().string());
    const ImageBuffer dehazed = gfg_stage(h.image, cfg.grid_side, gfg, grid_options(cfg));
    const ImageBuffer dehazed_padded = pad_to_windows(dehazed, side, cfg.padding);
    const ImageBuffer clean_padded = pad_to_windows(c.image, side, cfg.padding);
    const std::uint32_t max_value = output_max_value(std::max(h.max_value, c.max_value));
    const std::string stem = path.stem().string();
    for (std::size_t y = 0; y < dehazed_padded.height(); y += side) {
      for (std::size_t x = 0; x < dehazed_padded.width(); x += side) {
        ExportRecord r{path.filename().string(), y, x, side, {}, {}};
        const std::string base = stem + "_" + std::to_string(y) + "_" + std::to_string(x);
        r.dehazed = base + "_dehazed.png";
        r.clean = base + "_clean.png";
        write_image(extract(dehazed_padded, y, x, side, side), output_dir / r.dehazed, max_value);
        write_image(extract(clean_padded, y, x, side, side), output_dir / r.clean, max_value);
        records.push_back(std::move(r));
      }
    }
  }

  std::ofstream manifest(output_dir / kManifestName, std::ios::trunc);
  if (!manifest) throw IoError("cannot write manifest in '" + output_dir.string() + "'");
  for (const auto& r : records) manifest << to_json(r).dump() << '\n';
  if (!manifest) throw IoError("manifest write failed in '" + output_dir.string() + "'");
  return records;
}

}  // namespace sglc
