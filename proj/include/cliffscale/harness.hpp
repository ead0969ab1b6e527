#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cliffscale/curve_io.hpp"
#include "cliffscale/error.hpp"
#include "cliffscale/format.hpp"
#include "cliffscale/gaussian.hpp"
#include "cliffscale/harmonic_training.hpp"
#include "cliffscale/linreg.hpp"
#include "cliffscale/scaling_curves.hpp"

#ifndef CLIFFSCALE_VERSION
#define CLIFFSCALE_VERSION "0.1.0"
#endif

namespace cliffscale::harness {

inline constexpr std::string_view kToolName = "cliffscale";
inline constexpr std::string_view kToolVersion = CLIFFSCALE_VERSION;

enum class Kind { kLinreg, kGaussian, kHarmonic, kImport };

inline std::string to_string(Kind k) {
  switch (k) {
    case Kind::kLinreg: return "linreg";
    case Kind::kGaussian: return "gaussian";
    case Kind::kHarmonic: return "harmonic";
    case Kind::kImport: return "import";
  }
  return "?";
}

struct ExperimentConfig {
  Kind kind = Kind::kLinreg;
  std::optional<std::int64_t> d;  // unset means the kind's default
  double sigma = 0.0;
  double lambda = 1.0;
  double s = 1.0;
  int bandlimit = 2;
  linreg::Estimator estimator = linreg::Estimator::kLeastSquares;
  harmonic::Arm arm = harmonic::Arm::kRegularized;
  gaussian::Sampler sampler = gaussian::Sampler::kSufficient;
  bool fixed_task = false;
  std::int64_t n_test = linreg::kDefaultNnTestPoints;
  // harmonic training
  int width = 256;
  std::int64_t max_steps = 5'000;
  double lr = 3e-3;
  std::int64_t patience = 1'000;
  std::int64_t reg_points = 20'000;
  std::int64_t reg_batch = 256;
  // n grid: explicit list wins over the log-spaced range
  std::vector<std::int64_t> n_list;
  std::int64_t n_min = 1;
  std::int64_t n_max = 1'000;
  double points_per_decade = 10.0;
  std::int64_t trials = 10;
  std::uint64_t seed = 0;
  std::string out = "out";
  std::string input;
  unsigned threads = 0;  // never affects output bytes, so not echoed

  bool operator==(const ExperimentConfig&) const = default;

  std::int64_t resolved_d() const {
    if (d) return *d;
    switch (kind) {
      case Kind::kGaussian: return 100;
      case Kind::kHarmonic: return 2;
      default: return 5;
    }
  }

  std::vector<std::int64_t> n_grid() const {
    if (!n_list.empty()) return n_list;
    return log_spaced_grid(n_min, n_max, points_per_decade);
  }

  void validate() const;
};

namespace detail {

[[noreturn]] inline void bad_field(std::string_view key, std::string_view why) {
  throw ConfigError("config field '" + std::string(key) + "': " + std::string(why));
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T out{};
  if (!cliffscale::detail::parse_field(text, out)) bad_field(key, "cannot parse '" + std::string(text) + "' as a number");
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(out)) bad_field(key, "must be finite");
  return out;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  bad_field(key, "expected true or false, got '" + std::string(text) + "'");
}

inline std::string join_ints(const std::vector<std::int64_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

}  // namespace detail

/// Sets one key of the config from its textual value. Used by both the config
/// file reader and the CLI flags, so every diagnostic names the same field.
inline void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view raw) {
  using detail::bad_field;
  using detail::parse_number;
  const std::string_view value = cliffscale::detail::trim(raw);
  if (key == "kind") {
    if (value == "linreg") cfg.kind = Kind::kLinreg;
    else if (value == "gaussian") cfg.kind = Kind::kGaussian;
    else if (value == "harmonic") cfg.kind = Kind::kHarmonic;
    else if (value == "import") cfg.kind = Kind::kImport;
    else bad_field(key, "expected linreg, gaussian, harmonic or import");
  } else if (key == "d") {
    const auto d = parse_number<std::int64_t>(key, value);
    if (d < 1) bad_field(key, "must be >= 1");
    cfg.d = d;
  } else if (key == "sigma") {
    cfg.sigma = parse_number<double>(key, value);
    if (cfg.sigma < 0.0) bad_field(key, "must be >= 0");
  } else if (key == "lambda") {
    cfg.lambda = parse_number<double>(key, value);
    if (cfg.lambda < 0.0) bad_field(key, "must be >= 0");
  } else if (key == "s") {
    cfg.s = parse_number<double>(key, value);
    if (cfg.s < 0.0) bad_field(key, "must be >= 0");
  } else if (key == "bandlimit") {
    cfg.bandlimit = parse_number<int>(key, value);
    if (cfg.bandlimit < 0) bad_field(key, "must be >= 0");
  } else if (key == "estimator") {
    if (value == "lstsq") cfg.estimator = linreg::Estimator::kLeastSquares;
    else if (value == "ridge") cfg.estimator = linreg::Estimator::kRidge;
    else if (value == "nn") cfg.estimator = linreg::Estimator::kNearestNeighbor;
    else bad_field(key, "expected lstsq, ridge or nn");
  } else if (key == "arm") {
    if (value == "reg") cfg.arm = harmonic::Arm::kRegularized;
    else if (value == "noreg") cfg.arm = harmonic::Arm::kUnregularized;
    else bad_field(key, "expected reg or noreg");
  } else if (key == "sampler") {
    if (value == "full") cfg.sampler = gaussian::Sampler::kFull;
    else if (value == "sufficient") cfg.sampler = gaussian::Sampler::kSufficient;
    else bad_field(key, "expected full or sufficient");
  } else if (key == "fixed_task") {
    cfg.fixed_task = detail::parse_bool(key, value);
  } else if (key == "n_test") {
    cfg.n_test = parse_number<std::int64_t>(key, value);
    if (cfg.n_test < 1) bad_field(key, "must be >= 1");
  } else if (key == "width") {
    cfg.width = parse_number<int>(key, value);
    if (cfg.width < 1) bad_field(key, "must be >= 1");
  } else if (key == "max_steps") {
    cfg.max_steps = parse_number<std::int64_t>(key, value);
    if (cfg.max_steps < 0) bad_field(key, "must be >= 0");
  } else if (key == "lr") {
    cfg.lr = parse_number<double>(key, value);
    if (!(cfg.lr > 0.0)) bad_field(key, "must be > 0");
  } else if (key == "patience") {
    cfg.patience = parse_number<std::int64_t>(key, value);
    if (cfg.patience < 1) bad_field(key, "must be >= 1");
  } else if (key == "reg_points") {
    cfg.reg_points = parse_number<std::int64_t>(key, value);
    if (cfg.reg_points < 1) bad_field(key, "must be >= 1");
  } else if (key == "reg_batch") {
    cfg.reg_batch = parse_number<std::int64_t>(key, value);
    if (cfg.reg_batch < 0) bad_field(key, "must be >= 0");
  } else if (key == "n") {
    std::vector<std::int64_t> ns;
    std::size_t pos = 0;
    while (pos <= value.size()) {
      const auto comma = value.find(',', pos);
      const auto item = value.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
      ns.push_back(parse_number<std::int64_t>(key, item));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    for (std::size_t i = 0; i < ns.size(); ++i)
      if (ns[i] < 1 || (i > 0 && ns[i] <= ns[i - 1])) bad_field(key, "must be strictly ascending positive integers");
    cfg.n_list = std::move(ns);
  } else if (key == "n_min") {
    cfg.n_min = parse_number<std::int64_t>(key, value);
    if (cfg.n_min < 1) bad_field(key, "must be >= 1");
  } else if (key == "n_max") {
    cfg.n_max = parse_number<std::int64_t>(key, value);
    if (cfg.n_max < 1) bad_field(key, "must be >= 1");
  } else if (key == "points_per_decade") {
    cfg.points_per_decade = parse_number<double>(key, value);
    if (!(cfg.points_per_decade > 0.0)) bad_field(key, "must be > 0");
  } else if (key == "trials") {
    cfg.trials = parse_number<std::int64_t>(key, value);
    if (cfg.trials < 1) bad_field(key, "must be >= 1");
  } else if (key == "seed") {
    cfg.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "out") {
    if (value.empty()) bad_field(key, "must be a nonempty path");
    cfg.out = std::string(value);
  } else if (key == "input") {
    cfg.input = std::string(value);
  } else {
    throw ConfigError("unknown config field '" + std::string(key) + "'");
  }
}

inline void ExperimentConfig::validate() const {
  if (n_list.empty() && n_max < n_min) detail::bad_field("n_max", "must be >= n_min");
  if (kind == Kind::kImport && input.empty()) detail::bad_field("input", "required for kind=import");
  if (kind == Kind::kHarmonic && (resolved_d() < 1 || resolved_d() > 3)) detail::bad_field("d", "harmonic runs need d in 1..3");
  if (kind == Kind::kGaussian && !(s >= 0.0)) detail::bad_field("s", "must be >= 0");
  if (kind == Kind::kLinreg && estimator == linreg::Estimator::kRidge && !(lambda > 0.0))
    detail::bad_field("lambda", "ridge needs lambda > 0");
}

/// Reads the `key = value` format. Blank lines and `#` comments are ignored;
/// later keys override earlier ones.
inline void apply_config_text(ExperimentConfig& cfg, std::string_view text) {
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    const auto eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = cliffscale::detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const auto key = cliffscale::detail::trim(line.substr(0, eq));
    try {
      apply_setting(cfg, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline ExperimentConfig parse_config_text(std::string_view text) {
  ExperimentConfig cfg;
  apply_config_text(cfg, text);
  return cfg;
}

inline void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  apply_config_text(cfg, buf.str());
}

/// Every key that influences the outputs of this config's kind, in file order.
inline std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> e;
  e.emplace_back("kind", to_string(cfg.kind));
  switch (cfg.kind) {
    case Kind::kLinreg:
      e.emplace_back("d", std::to_string(cfg.resolved_d()));
      e.emplace_back("sigma", format_double(cfg.sigma));
      e.emplace_back("estimator", linreg::to_string(cfg.estimator));
      e.emplace_back("lambda", format_double(cfg.lambda));
      e.emplace_back("fixed_task", cfg.fixed_task ? "true" : "false");
      e.emplace_back("n_test", std::to_string(cfg.n_test));
      break;
    case Kind::kGaussian:
      e.emplace_back("d", std::to_string(cfg.resolved_d()));
      e.emplace_back("s", format_double(cfg.s));
      e.emplace_back("sampler", gaussian::to_string(cfg.sampler));
      break;
    case Kind::kHarmonic:
      e.emplace_back("d", std::to_string(cfg.resolved_d()));
      e.emplace_back("bandlimit", std::to_string(cfg.bandlimit));
      e.emplace_back("arm", harmonic::to_string(cfg.arm));
      e.emplace_back("lambda", format_double(cfg.lambda));
      e.emplace_back("width", std::to_string(cfg.width));
      e.emplace_back("max_steps", std::to_string(cfg.max_steps));
      e.emplace_back("lr", format_double(cfg.lr));
      e.emplace_back("patience", std::to_string(cfg.patience));
      e.emplace_back("reg_points", std::to_string(cfg.reg_points));
      e.emplace_back("reg_batch", std::to_string(cfg.reg_batch));
      break;
    case Kind::kImport:
      e.emplace_back("input", cfg.input);
      break;
  }
  if (cfg.kind != Kind::kImport) {
    e.emplace_back("n", detail::join_ints(cfg.n_grid()));
    e.emplace_back("trials", std::to_string(cfg.trials));
    e.emplace_back("seed", std::to_string(cfg.seed));
  }
  e.emplace_back("out", cfg.out);
  return e;
}

inline std::string to_config_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
  return out;
}

/// Runs the experiment in memory.
inline ScalingCurve run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  switch (cfg.kind) {
    case Kind::kLinreg: {
      linreg::ScalingConfig c;
      c.d = cfg.resolved_d();
      c.sigma = cfg.sigma;
      c.estimator = cfg.estimator;
      c.lambda = cfg.lambda;
      c.n_test = cfg.n_test;
      c.fixed_task = cfg.fixed_task;
      c.n_grid = cfg.n_grid();
      c.trials = cfg.trials;
      c.seed = cfg.seed;
      c.threads = cfg.threads;
      return linreg::run_linreg_scaling(c);
    }
    case Kind::kGaussian: {
      gaussian::ScalingConfig c;
      c.task = {cfg.resolved_d(), cfg.s};
      c.sampler = cfg.sampler;
      c.n_grid = cfg.n_grid();
      c.trials = cfg.trials;
      c.seed = cfg.seed;
      c.threads = cfg.threads;
      return gaussian::run_gaussian_scaling(c);
    }
    case Kind::kHarmonic: {
      harmonic::ScalingConfig c;
      c.bandlimit = cfg.bandlimit;
      c.d = static_cast<int>(cfg.resolved_d());
      c.arm = cfg.arm;
      c.train.width = cfg.width;
      c.train.max_steps = cfg.max_steps;
      c.train.adam.step_size = cfg.lr;
      c.train.patience = cfg.patience;
      c.train.reg_bandlimit = cfg.bandlimit;
      c.train.reg_points = cfg.reg_points;
      c.train.reg_batch = cfg.reg_batch;
      c.train.reg_lambda = cfg.lambda;
      c.n_grid = cfg.n_grid();
      c.trials = cfg.trials;
      c.seed = cfg.seed;
      c.threads = cfg.threads;
      return harmonic::run_harmonic_scaling(c);
    }
    case Kind::kImport:
      return load_curve(cfg.input);
  }
  throw ConfigError("unhandled experiment kind");
}

/// 64-bit FNV-1a, continuing from `state`.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 0x100000001b3ULL;
  }
  return state;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct RunOutputs {
  std::string csv;
  std::string json;
};

inline RunOutputs render_outputs(const ScalingCurve& curve) {
  std::ostringstream csv;
  write_curve_csv(csv, curve);
  return {csv.str(), to_json(curve).dump(2) + "\n"};
}

/// Hash over curve.csv followed by curve.json.
inline std::string content_hash(const RunOutputs& out) {
  return "fnv1a64:" + hex64(fnv1a64(out.json, fnv1a64(out.csv)));
}

inline nlohmann::ordered_json make_manifest(const ExperimentConfig& cfg, const ScalingCurve& curve,
                                            const RunOutputs& out, double duration_seconds) {
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config_entries(cfg)) config[k] = v;
  nlohmann::ordered_json counts = nlohmann::ordered_json::array();
  for (const auto& p : curve.points()) counts.push_back({{"n", p.n}, {"trials", p.errors.size()}});
  return {{"tool", kToolName},
          {"version", kToolVersion},
          {"config", config},
          {"trial_counts", counts},
          {"outputs",
           {{"curve.csv", "fnv1a64:" + hex64(fnv1a64(out.csv))}, {"curve.json", "fnv1a64:" + hex64(fnv1a64(out.json))}}},
          {"content_hash", content_hash(out)},
          {"duration_seconds", duration_seconds}};
}

struct RunResult {
  ScalingCurve curve;
  nlohmann::ordered_json manifest;
  std::filesystem::path dir;
};

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("failed writing '" + path.string() + "'");
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

/// Runs the experiment and writes curve.csv, curve.json and manifest.json into cfg.out.
inline RunResult run(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  auto curve = run_experiment(cfg);
  const auto out = render_outputs(curve);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  auto manifest = make_manifest(cfg, curve, out, seconds);

  const std::filesystem::path dir(cfg.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir.string() + "': " + ec.message());
  write_file(dir / "curve.csv", out.csv);
  write_file(dir / "curve.json", out.json);
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return {std::move(curve), std::move(manifest), dir};
}

/// Recomputes the content hash of a run directory and compares it with its manifest.
inline bool verify_run_dir(const std::filesystem::path& dir) {
  const auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"), nullptr, false);
  if (manifest.is_discarded() || !manifest.contains("content_hash")) throw DataError("malformed manifest in '" + dir.string() + "'");
  const RunOutputs out{read_file(dir / "curve.csv"), read_file(dir / "curve.json")};
  return manifest.at("content_hash").get<std::string>() == content_hash(out);
}

enum class AnalyzeMode { kFit, kCliffs, kBoth };

inline AnalyzeMode parse_analyze_mode(std::string_view s) {
  if (s == "fit") return AnalyzeMode::kFit;
  if (s == "cliffs") return AnalyzeMode::kCliffs;
  if (s == "both") return AnalyzeMode::kBoth;
  throw ConfigError("config field 'mode': expected fit, cliffs or both");
}

struct AnalyzeOptions {
  AnalyzeMode mode = AnalyzeMode::kBoth;
  CliffOptions cliffs{};
  std::optional<NRange> fit_range;
};

struct Analysis {
  std::optional<PowerLawFit> fit;
  std::optional<std::vector<CliffRegion>> cliffs;
};

inline Analysis analyze(const ScalingCurve& curve, const AnalyzeOptions& opt = {}) {
  if (curve.empty()) throw DataError("cannot analyze an empty curve");
  Analysis a;
  if (opt.mode != AnalyzeMode::kCliffs) a.fit = fit_power_law(curve, opt.fit_range, opt.cliffs.statistic);
  if (opt.mode != AnalyzeMode::kFit) a.cliffs = detect_cliffs(curve, opt.cliffs);
  return a;
}

inline nlohmann::ordered_json to_json(const Analysis& a, const ScalingCurve& curve) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  if (a.fit) j["fit"] = cliffscale::to_json(*a.fit);
  if (a.cliffs) j["cliffs"] = cliffscale::to_json(*a.cliffs);
  nlohmann::ordered_json pts = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < curve.size(); ++i)
    pts.push_back({{"n", curve.points()[i].n},
                   {"trials", curve.points()[i].errors.size()},
                   {"median", curve.median_at(i)},
                   {"min", curve.min_at(i)},
                   {"max", curve.max_at(i)}});
  j["points"] = pts;
  return j;
}

inline std::string analysis_table(const Analysis& a, const ScalingCurve& curve) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%12s %7s %14s %14s %14s\n", "n", "trials", "median", "min", "max");
  out += line;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(line, sizeof line, "%12lld %7zu %14.6g %14.6g %14.6g\n", static_cast<long long>(curve.points()[i].n),
                  curve.points()[i].errors.size(), curve.median_at(i), curve.min_at(i), curve.max_at(i));
    out += line;
  }
  if (a.fit) {
    std::snprintf(line, sizeof line, "fit: A=%.6g alpha=%.6g E=%.6g residual=%.3g over n in [%lld, %lld]\n", a.fit->A,
                  a.fit->alpha, a.fit->E, a.fit->residual, static_cast<long long>(a.fit->n_min),
                  static_cast<long long>(a.fit->n_max));
    out += line;
  }
  if (a.cliffs) {
    if (a.cliffs->empty()) out += "cliffs: none\n";
    for (const auto& c : *a.cliffs) {
      std::snprintf(line, sizeof line, "cliff: n in [%lld, %lld] strength=%.6g\n", static_cast<long long>(c.n_start),
                    static_cast<long long>(c.n_end), c.strength);
      out += line;
    }
  }
  return out;
}

}  // namespace cliffscale::harness
