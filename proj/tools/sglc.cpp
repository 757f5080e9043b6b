// sglc command-line tool: run, metrics, export-em, ssl-gen.

#include <sglc.hpp>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("sglc");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("SGLC_LOG")) {
    const std::string level = env;
    if (level == "error") {
      spdlog::set_level(spdlog::level::err);
    } else if (level == "warn") {
      spdlog::set_level(spdlog::level::warn);
    } else if (level == "info") {
      spdlog::set_level(spdlog::level::info);
    } else if (level == "debug") {
      spdlog::set_level(spdlog::level::debug);
    } else {
      spdlog::warn("ignoring SGLC_LOG={} (expected error, warn, info or debug)", level);
    }
  }
}

std::string format_metric(const std::optional<double>& v) {
  if (!v) return "-";
  if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

// Pipeline flags shared by run and export-em. Set flags override the config file.
struct PipelineFlags {
  std::string config_file;
  std::vector<std::pair<std::string, std::string>> overrides;
  std::optional<std::string> grid_size, window_size, order, mops, blend, transforms, padding, gfg_proc, lfe_proc,
      workers, image_jobs, timeout, seed;

  void add(CLI::App* cmd, bool full) {
    cmd->add_option("--config", config_file, "Flat key = value configuration file");
    cmd->add_option("--grid-size", grid_size, "Grid patch side (pixels)");
    cmd->add_option("--window-size", window_size, "Window patch side (pixels)");
    cmd->add_option("--gfg-proc", gfg_proc, "Global-stage processor: identity|dcp|external:<cmd>");
    cmd->add_option("--workers", workers, "Worker threads per image");
    cmd->add_option("--padding", padding, "Padding mode: reflect|zero|edge");
    cmd->add_option("--timeout", timeout, "External processor timeout per patch (seconds)");
    if (!full) return;
    cmd->add_option("--order", order, "gfg-then-lfe|lfe-then-gfg|gfg-only|lfe-only");
    cmd->add_option("--mops", mops, "Overlapping windows with spline blending and TTA: on|off");
    cmd->add_option("--blend", blend, "Window blending weights under mops: spline|uniform");
    cmd->add_option("--transforms", transforms, "d4, identity, or a list such as r0,r2,m0");
    cmd->add_option("--lfe-proc", lfe_proc, "Local-stage processor: identity|dcp|external:<cmd>");
    cmd->add_option("--image-jobs", image_jobs, "Images processed concurrently");
    cmd->add_option("--seed", seed, "Run seed");
  }

  sglc::PipelineConfig resolve() const {
    sglc::PipelineConfig cfg = config_file.empty() ? sglc::PipelineConfig{} : sglc::load_config(config_file);
    auto apply = [&](const char* key, const std::optional<std::string>& v) {
      if (v) sglc::set_config_value(cfg, key, *v);
    };
    apply("grid_side", grid_size);
    apply("window_side", window_size);
    apply("order", order);
    apply("mops", mops);
    apply("blend", blend);
    apply("transforms", transforms);
    apply("padding", padding);
    apply("gfg_processor", gfg_proc);
    apply("lfe_processor", lfe_proc);
    apply("workers", workers);
    apply("image_jobs", image_jobs);
    apply("gfg_timeout", timeout);
    apply("lfe_timeout", timeout);
    apply("seed", seed);
    cfg.validate();
    return cfg;
  }
};

int cmd_run(const PipelineFlags& flags, const sglc::BatchOptions& batch, const std::string& report_path) {
  const sglc::PipelineConfig cfg = flags.resolve();
  spdlog::debug("configuration:\n{}", sglc::serialize_config(cfg));
  const sglc::StageProcessors procs = sglc::make_processors(cfg);
  spdlog::info("order {} grid {} window {} mops {} gfg {} lfe {} workers {}", sglc::to_string(cfg.order),
               cfg.grid_side, cfg.window_side, cfg.mops ? "on" : "off", procs.gfg->name(), procs.lfe->name(),
               cfg.workers);

  const sglc::RunReport report = sglc::run_batch(batch, cfg, procs);
  for (const auto& r : report.records) {
    if (r.error) {
      spdlog::error("{}: {}", r.input, *r.error);
      continue;
    }
    std::cout << r.output << ' ' << format_metric(r.psnr) << ' ' << format_metric(r.ssim) << ' '
              << format_metric(r.total_seconds) << '\n';
  }
  for (const auto* p : {procs.gfg.get(), procs.lfe.get()}) {
    if (const auto* dcp = dynamic_cast<const sglc::DarkChannelProcessor*>(p); dcp && dcp->degenerate_count() > 0) {
      spdlog::warn("dark channel: {} degenerate patches passed through unchanged", dcp->degenerate_count());
    }
  }
  if (!report_path.empty()) sglc::write_json_file(sglc::to_json(report, &cfg), report_path);
  if (report.failures() > 0) {
    spdlog::error("{} of {} images failed", report.failures(), report.records.size());
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_metrics(const std::string& ref, const std::string& test, const std::string& report_path) {
  const sglc::MetricReport report = sglc::compare_directories(ref, test);
  double psnr_sum = 0.0, ssim_sum = 0.0;
  std::size_t psnr_n = 0, ssim_n = 0;
  for (const auto& p : report.pairs) {
    if (p.error) {
      spdlog::error("{}: {}", p.name, *p.error);
      continue;
    }
    std::cout << p.name << ' ' << format_metric(p.psnr) << ' ' << format_metric(p.ssim) << '\n';
    if (p.psnr) psnr_sum += *p.psnr, ++psnr_n;
    if (p.ssim) ssim_sum += *p.ssim, ++ssim_n;
  }
  auto mean = [](double sum, std::size_t n) { return n ? std::optional<double>(sum / n) : std::nullopt; };
  std::cout << "mean " << format_metric(mean(psnr_sum, psnr_n)) << ' ' << format_metric(mean(ssim_sum, ssim_n))
            << '\n';
  for (const auto& o : report.orphans) spdlog::error("orphan: {}", o);
  if (!report_path.empty()) sglc::write_json_file(sglc::to_json(report), report_path);
  return report.ok() ? kExitOk : kExitFailure;
}

int cmd_export_em(const PipelineFlags& flags, const std::string& input, const std::string& clean,
                  const std::string& output) {
  const sglc::PipelineConfig cfg = flags.resolve();
  const auto gfg = sglc::make_processor(cfg.gfg_processor, cfg);
  const auto records = sglc::export_em_dataset(input, clean, output, cfg, *gfg);
  spdlog::info("wrote {} patch pairs to {}", records.size(), output);
  return kExitOk;
}

template <typename T>
std::pair<T, T> parse_range(const std::string& text, const char* flag) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw sglc::ConfigError(std::string(flag) + " expects two comma-separated values");
  const std::string a = text.substr(0, comma), b = text.substr(comma + 1);
  if constexpr (std::is_floating_point_v<T>) {
    return {sglc::detail::parse_double(flag, a), sglc::detail::parse_double(flag, b)};
  } else {
    return {static_cast<T>(sglc::detail::parse_uint(flag, a)), static_cast<T>(sglc::detail::parse_uint(flag, b))};
  }
}

int cmd_ssl_gen(const std::string& input, const std::string& output, const std::string& squares,
                const std::string& side_frac, std::uint64_t seed, std::size_t workers, double fill) {
  sglc::CorruptionSpec spec;
  if (!squares.empty()) std::tie(spec.min_squares, spec.max_squares) = parse_range<std::size_t>(squares, "--squares");
  if (!side_frac.empty()) {
    std::tie(spec.min_side_fraction, spec.max_side_fraction) = parse_range<double>(side_frac, "--side-frac");
  }
  spec.seed = seed;
  spec.fill_value = fill;
  try {
    spec.validate();
  } catch (const sglc::InvalidArgument& e) {
    throw sglc::ConfigError(e.what());
  }
  const auto records = sglc::generate_corpus(input, output, spec, workers);
  std::size_t skipped = 0;
  for (const auto& r : records) {
    if (r.error) {
      spdlog::warn("skipped {}: {}", r.source, *r.error);
      ++skipped;
    }
  }
  spdlog::info("wrote {} corrupted pairs to {}", records.size() - skipped, output);
  return skipped ? kExitFailure : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Global-then-local patch pipeline for high-resolution image restoration"};
  app.require_subcommand(1);

  PipelineFlags run_flags;
  sglc::BatchOptions batch;
  std::string run_report, ref_dir, dump_dir, coverage_dir;
  auto* run = app.add_subcommand("run", "Run the pipeline over an image or a directory");
  run->add_option("--input", batch.input, "Input image or directory")->required();
  run->add_option("--output", batch.output_dir, "Output directory")->required();
  run->add_option("--ref", ref_dir, "Reference directory for PSNR/SSIM");
  run->add_option("--report", run_report, "JSON report path");
  run->add_option("--dump-patches", dump_dir, "Write grid patches as PNG to this directory");
  run->add_option("--coverage-map", coverage_dir, "Write window coverage maps as PNG to this directory");
  run_flags.add(run, true);

  std::string m_ref, m_test, m_report;
  auto* metrics = app.add_subcommand("metrics", "Compare same-named images in two directories");
  metrics->add_option("--ref", m_ref, "Reference directory")->required();
  metrics->add_option("--test", m_test, "Test directory")->required();
  metrics->add_option("--report", m_report, "JSON report path");

  PipelineFlags em_flags;
  std::string em_input, em_clean, em_output;
  auto* em = app.add_subcommand("export-em", "Export global-stage outputs and clean images as window pairs");
  em->add_option("--input", em_input, "Hazy image directory")->required();
  em->add_option("--clean", em_clean, "Clean image directory")->required();
  em->add_option("--output", em_output, "Output directory")->required();
  em_flags.add(em, false);

  std::string ssl_input, ssl_output, ssl_squares, ssl_side;
  std::uint64_t ssl_seed = 0;
  std::size_t ssl_workers = 1;
  double ssl_fill = 1.0;
  auto* ssl = app.add_subcommand("ssl-gen", "Generate a square-corruption corpus");
  ssl->add_option("--input", ssl_input, "Clean image directory")->required();
  ssl->add_option("--output", ssl_output, "Output directory")->required();
  ssl->add_option("--squares", ssl_squares, "Square count range a,b (default 1,8)");
  ssl->add_option("--side-frac", ssl_side, "Square side range lo,hi as fractions of min(H,W) (default 0.01,0.1)");
  ssl->add_option("--seed", ssl_seed, "Master seed");
  ssl->add_option("--workers", ssl_workers, "Worker threads")->check(CLI::PositiveNumber);
  ssl->add_option("--fill", ssl_fill, "Square fill value")->check(CLI::Range(0.0, 1.0));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run) {
      if (!ref_dir.empty()) batch.reference_dir = ref_dir;
      if (!dump_dir.empty()) batch.dump_patches_dir = dump_dir;
      if (!coverage_dir.empty()) batch.coverage_dir = coverage_dir;
      return cmd_run(run_flags, batch, run_report);
    }
    if (*metrics) return cmd_metrics(m_ref, m_test, m_report);
    if (*em) return cmd_export_em(em_flags, em_input, em_clean, em_output);
    if (*ssl) return cmd_ssl_gen(ssl_input, ssl_output, ssl_squares, ssl_side, ssl_seed, ssl_workers, ssl_fill);
  } catch (const sglc::ConfigError& e) {
    spdlog::error("{}", e.what());
    std::cerr << "Run with --help for usage.\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}
