#pragma once

#include <sglc/error.hpp>
#include <sglc/image.hpp>
#include <sglc/scattering.hpp>
#include <sglc/window.hpp>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace sglc {

enum class StageOrder { gfg_then_lfe, lfe_then_gfg, gfg_only, lfe_only };

inline std::string_view to_string(StageOrder o) {
  switch (o) {
    case StageOrder::gfg_then_lfe: return "gfg-then-lfe";
    case StageOrder::lfe_then_gfg: return "lfe-then-gfg";
    case StageOrder::gfg_only: return "gfg-only";
    case StageOrder::lfe_only: return "lfe-only";
  }
  return "gfg-then-lfe";
}

inline StageOrder parse_stage_order(std::string_view s) {
  if (s == "gfg-then-lfe") return StageOrder::gfg_then_lfe;
  if (s == "lfe-then-gfg") return StageOrder::lfe_then_gfg;
  if (s == "gfg-only") return StageOrder::gfg_only;
  if (s == "lfe-only") return StageOrder::lfe_only;
  throw ConfigError("invalid order '" + std::string(s) +
                    "' (expected gfg-then-lfe, lfe-then-gfg, gfg-only or lfe-only)");
}

/// Which patch processor a stage uses and its parameters.
struct ProcessorSpec {
  enum class Kind { identity, dcp, external };

  Kind kind = Kind::dcp;
  std::string command;  // external only: program and leading arguments
  DarkChannelOptions dcp;
  double timeout_seconds = 300.0;

  friend bool operator==(const ProcessorSpec& a, const ProcessorSpec& b) {
    return a.kind == b.kind && a.command == b.command && a.dcp.omega == b.dcp.omega &&
           a.dcp.t_floor == b.dcp.t_floor && a.dcp.kernel == b.dcp.kernel &&
           a.dcp.top_fraction == b.dcp.top_fraction && a.timeout_seconds == b.timeout_seconds;
  }
};

/// "identity", "dcp" or "external:<command line>".
inline std::string processor_selector(const ProcessorSpec& p) {
  switch (p.kind) {
    case ProcessorSpec::Kind::identity: return "identity";
    case ProcessorSpec::Kind::dcp: return "dcp";
    case ProcessorSpec::Kind::external: return "external:" + p.command;
  }
  return "identity";
}

inline void set_processor_selector(ProcessorSpec& p, std::string_view s) {
  if (s == "identity") {
    p.kind = ProcessorSpec::Kind::identity;
    p.command.clear();
  } else if (s == "dcp") {
    p.kind = ProcessorSpec::Kind::dcp;
    p.command.clear();
  } else if (s.starts_with("external:") && s.size() > 9) {
    p.kind = ProcessorSpec::Kind::external;
    p.command = std::string(s.substr(9));
  } else {
    throw ConfigError("invalid processor '" + std::string(s) + "' (expected identity, dcp or external:<cmd>)");
  }
}

struct PipelineConfig {
  std::size_t grid_side = 1024;
  std::size_t window_side = 1024;
  StageOrder order = StageOrder::gfg_then_lfe;
  bool mops = true;
  BlendWeights blend = BlendWeights::spline;
  std::vector<DihedralTransform> transforms = d4_transforms();
  PadMode padding = PadMode::reflect;
  ProcessorSpec gfg_processor;
  ProcessorSpec lfe_processor;
  std::filesystem::path external_workdir;  // empty: system temp directory
  std::size_t workers = 1;
  std::size_t image_jobs = 1;  // images processed concurrently
  std::uint64_t seed = 0;

  void validate() const {
    if (grid_side < 4) throw ConfigError("grid_side must be at least 4");
    if (window_side < 4) throw ConfigError("window_side must be at least 4");
    if (mops && blend == BlendWeights::spline && window_side % 4 != 0) {
      throw ConfigError("window_side must be a multiple of 4 when mops is on");
    }
    if (mops && window_side % 2 != 0) throw ConfigError("window_side must be even when mops is on");
    if (transforms.empty()) throw ConfigError("transforms must not be empty");
    if (std::find(transforms.begin(), transforms.end(), DihedralTransform::identity()) == transforms.end()) {
      throw ConfigError("transforms must include the identity r0");
    }
    if (workers == 0) throw ConfigError("workers must be at least 1");
    if (image_jobs == 0) throw ConfigError("image_jobs must be at least 1");
    for (const ProcessorSpec* p : {&gfg_processor, &lfe_processor}) {
      if (p->kind == ProcessorSpec::Kind::external && p->command.find_first_not_of(" \t") == std::string::npos) {
        throw ConfigError("external processor needs a command");
      }
      if (!(p->timeout_seconds > 0.0)) throw ConfigError("processor timeout must be positive");
      if (!(p->dcp.omega > 0.0 && p->dcp.omega <= 1.0)) throw ConfigError("omega must lie in (0, 1]");
      if (!(p->dcp.t_floor > 0.0 && p->dcp.t_floor <= 1.0)) throw ConfigError("t_floor must lie in (0, 1]");
      if (p->dcp.kernel == 0 || p->dcp.kernel % 2 == 0) throw ConfigError("dcp kernel must be odd");
    }
  }

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline double parse_double(std::string_view key, std::string_view s) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw ConfigError("invalid number '" + std::string(s) + "' for " + std::string(key));
  }
  return v;
}

inline std::uint64_t parse_uint(std::string_view key, std::string_view s) {
  std::uint64_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw ConfigError("invalid integer '" + std::string(s) + "' for " + std::string(key));
  }
  return v;
}

inline bool parse_switch(std::string_view key, std::string_view s) {
  if (s == "on" || s == "true" || s == "1") return true;
  if (s == "off" || s == "false" || s == "0") return false;
  throw ConfigError("invalid switch '" + std::string(s) + "' for " + std::string(key) + " (expected on or off)");
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// "d4" or a comma-separated list of r0..r3 / m0..m3.
inline std::vector<DihedralTransform> parse_transforms(std::string_view s) {
  if (s == "d4") return d4_transforms();
  if (s == "identity") return {DihedralTransform::identity()};
  std::vector<DihedralTransform> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto item = detail::trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
    try {
      out.push_back(parse_dihedral(item));
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string format_transforms(const std::vector<DihedralTransform>& ts) {
  std::string out;
  for (const auto& t : ts) {
    if (!out.empty()) out += ',';
    out += to_string(t);
  }
  return out;
}

/// Applies one key/value pair. Unknown keys are an error.
inline void set_config_value(PipelineConfig& cfg, std::string_view key, std::string_view value) {
  using detail::parse_double;
  using detail::parse_uint;
  auto processor_key = [&](std::string_view prefix, ProcessorSpec& p) -> bool {
    if (!key.starts_with(prefix)) return false;
    const auto k = key.substr(prefix.size());
    if (k == "processor") {
      set_processor_selector(p, value);
    } else if (k == "omega") {
      p.dcp.omega = parse_double(key, value);
    } else if (k == "t_floor") {
      p.dcp.t_floor = parse_double(key, value);
    } else if (k == "kernel") {
      p.dcp.kernel = parse_uint(key, value);
    } else if (k == "top_fraction") {
      p.dcp.top_fraction = parse_double(key, value);
    } else if (k == "timeout") {
      p.timeout_seconds = parse_double(key, value);
    } else {
      return false;
    }
    return true;
  };

  try {
    if (key == "grid_side") {
      cfg.grid_side = parse_uint(key, value);
    } else if (key == "window_side") {
      cfg.window_side = parse_uint(key, value);
    } else if (key == "order") {
      cfg.order = parse_stage_order(value);
    } else if (key == "mops") {
      cfg.mops = detail::parse_switch(key, value);
    } else if (key == "blend") {
      if (value == "spline") {
        cfg.blend = BlendWeights::spline;
      } else if (value == "uniform") {
        cfg.blend = BlendWeights::uniform;
      } else {
        throw ConfigError("invalid blend '" + std::string(value) + "' (expected spline or uniform)");
      }
    } else if (key == "transforms") {
      cfg.transforms = parse_transforms(value);
    } else if (key == "padding") {
      cfg.padding = parse_pad_mode(value);
    } else if (key == "external_workdir") {
      cfg.external_workdir = std::string(value);
    } else if (key == "workers") {
      cfg.workers = parse_uint(key, value);
    } else if (key == "image_jobs") {
      cfg.image_jobs = parse_uint(key, value);
    } else if (key == "seed") {
      cfg.seed = parse_uint(key, value);
    } else if (!processor_key("gfg_", cfg.gfg_processor) && !processor_key("lfe_", cfg.lfe_processor)) {
      throw ConfigError("unknown configuration key '" + std::string(key) + "'");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

/**
 * Flat `key = value` text, one pair per line; `#` starts a comment line.
 * Keys not present keep their defaults.
 */
inline PipelineConfig parse_config(std::string_view text, PipelineConfig cfg = {}) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = detail::trim(text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos));
    ++line_no;
    if (!line.empty() && line.front() != '#') {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
      }
      set_config_value(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return cfg;
}

inline std::string serialize_config(const PipelineConfig& cfg) {
  std::ostringstream out;
  out << "grid_side = " << cfg.grid_side << '\n'
      << "window_side = " << cfg.window_side << '\n'
      << "order = " << to_string(cfg.order) << '\n'
      << "mops = " << (cfg.mops ? "on" : "off") << '\n'
      << "blend = " << (cfg.blend == BlendWeights::spline ? "spline" : "uniform") << '\n'
      << "transforms = " << format_transforms(cfg.transforms) << '\n'
      << "padding = " << to_string(cfg.padding) << '\n';
  for (auto [prefix, p] : {std::pair{"gfg_", &cfg.gfg_processor}, std::pair{"lfe_", &cfg.lfe_processor}}) {
    out << prefix << "processor = " << processor_selector(*p) << '\n'
        << prefix << "omega = " << detail::format_double(p->dcp.omega) << '\n'
        << prefix << "t_floor = " << detail::format_double(p->dcp.t_floor) << '\n'
        << prefix << "kernel = " << p->dcp.kernel << '\n'
        << prefix << "top_fraction = " << detail::format_double(p->dcp.top_fraction) << '\n'
        << prefix << "timeout = " << detail::format_double(p->timeout_seconds) << '\n';
  }
  if (!cfg.external_workdir.empty()) out << "external_workdir = " << cfg.external_workdir.string() << '\n';
  out << "workers = " << cfg.workers << '\n'
      << "image_jobs = " << cfg.image_jobs << '\n'
      << "seed = " << cfg.seed << '\n';
  return out.str();
}

inline PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

}  // namespace sglc
