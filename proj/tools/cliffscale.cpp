#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cliffscale/harness.hpp"
#include "cliffscale/plot.hpp"

namespace {

using namespace cliffscale;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

// Flag name -> config key. Flags are applied after the config file.
const std::vector<std::pair<std::string, std::string>> kRunFlags = {
    {"kind", "kind"},           {"d", "d"},
    {"sigma", "sigma"},         {"lambda", "lambda"},
    {"s", "s"},                 {"bandlimit", "bandlimit"},
    {"estimator", "estimator"}, {"arm", "arm"},
    {"sampler", "sampler"},     {"fixed-task", "fixed_task"},
    {"n-test", "n_test"},       {"width", "width"},
    {"max-steps", "max_steps"}, {"lr", "lr"},
    {"patience", "patience"},   {"reg-points", "reg_points"},
    {"reg-batch", "reg_batch"}, {"n", "n"},
    {"n-min", "n_min"},         {"n-max", "n_max"},
    {"points-per-decade", "points_per_decade"},
    {"trials", "trials"},       {"seed", "seed"},
    {"out", "out"},             {"input", "input"},
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  harness::write_file(path, text);
}

int do_run(const std::string& config_path, const std::map<std::string, std::string>& flags, unsigned threads) {
  harness::ExperimentConfig cfg;
  if (!config_path.empty()) harness::apply_config_file(cfg, config_path);
  for (const auto& [flag, key] : kRunFlags)
    if (auto it = flags.find(flag); it != flags.end()) harness::apply_setting(cfg, key, it->second);
  cfg.threads = threads;
  const auto result = harness::run(cfg);
  std::cout << "wrote " << (result.dir / "curve.csv").string() << ", curve.json, manifest.json ("
            << result.manifest.at("content_hash").get<std::string>() << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulate, fit and plot data-scaling curves and detect cliff-learning regions"};
  app.set_version_flag("--version", std::string(harness::kToolVersion));
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "Run an experiment and write curve.csv, curve.json and manifest.json");
  std::string config_path;
  unsigned threads = 0;
  std::map<std::string, std::string> run_flags;
  run_cmd->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
  run_cmd->add_option("--threads", threads, "worker threads (0 = all cores); never changes results");
  for (const auto& [flag, key] : kRunFlags)
    run_cmd->add_option_function<std::string>("--" + flag, [&run_flags, flag = flag](const std::string& v) { run_flags[flag] = v; },
                                              "overrides config key '" + key + "'");

  auto* analyze_cmd = app.add_subcommand("analyze", "Fit a power law and detect cliffs in a curve file");
  std::string analyze_input, analyze_out, mode = "both", statistic = "median";
  double threshold = kDefaultCliffThreshold, floor = kDefaultErrorFloor;
  std::size_t min_run = kDefaultMinRun;
  std::optional<std::int64_t> fit_lo, fit_hi;
  analyze_cmd->add_option("curve", analyze_input, "curve CSV or JSON")->required();
  analyze_cmd->add_option("--mode", mode, "fit, cliffs or both");
  analyze_cmd->add_option("--threshold", threshold, "cliff threshold on the log-log second difference (<= 0)");
  analyze_cmd->add_option("--min-run", min_run, "minimum run of concave second differences");
  analyze_cmd->add_option("--floor", floor, "error floor applied before taking logs");
  analyze_cmd->add_option("--statistic", statistic, "median or mean");
  analyze_cmd->add_option("--fit-n-min", fit_lo, "smallest n used by the fit");
  analyze_cmd->add_option("--fit-n-max", fit_hi, "largest n used by the fit");
  analyze_cmd->add_option("--out", analyze_out, "analysis JSON path (default: stdout after the table)");

  auto* plot_cmd = app.add_subcommand("plot", "Render curves as an SVG log-log plot");
  std::vector<std::string> plot_inputs;
  std::string plot_out = "plot.svg", title, overlay_fit;
  std::optional<double> marker, plot_floor;
  std::optional<std::int64_t> approx_d;
  std::optional<double> approx_s;
  plot_cmd->add_option("curves", plot_inputs, "curve CSV or JSON files")->required();
  plot_cmd->add_option("--out", plot_out, "SVG output path");
  plot_cmd->add_option("--title", title, "plot title");
  plot_cmd->add_option("--marker", marker, "dashed vertical line at this n");
  plot_cmd->add_option("--floor", plot_floor, "clamp non-positive values to this floor");
  plot_cmd->add_option("--overlay-fit", overlay_fit, "overlay a power-law fit (fit or analysis JSON)");
  plot_cmd->add_option("--overlay-approx-d", approx_d, "overlay the Gaussian closed form with this dimension");
  plot_cmd->add_option("--overlay-approx-s", approx_s, "signal strength for the Gaussian overlay");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run_cmd) return do_run(config_path, run_flags, threads);

    if (*analyze_cmd) {
      harness::AnalyzeOptions opt;
      opt.mode = harness::parse_analyze_mode(mode);
      opt.cliffs.threshold = threshold;
      opt.cliffs.min_run = min_run;
      opt.cliffs.floor = floor;
      if (statistic == "median") opt.cliffs.statistic = Statistic::kMedian;
      else if (statistic == "mean") opt.cliffs.statistic = Statistic::kMean;
      else throw ConfigError("config field 'statistic': expected median or mean");
      if (fit_lo || fit_hi) opt.fit_range = NRange{fit_lo.value_or(1), fit_hi.value_or(NRange{}.hi)};
      const auto curve = load_curve(analyze_input);
      const auto analysis = harness::analyze(curve, opt);
      std::cout << harness::analysis_table(analysis, curve);
      const auto text = harness::to_json(analysis, curve).dump(2) + "\n";
      if (analyze_out.empty()) std::cout << text;
      else write_text(analyze_out, text);
      return 0;
    }

    if (*plot_cmd) {
      std::vector<plot::PlotSeries> series;
      for (const auto& path : plot_inputs) series.push_back({load_curve(path), ""});
      plot::PlotOptions opt;
      opt.title = title;
      opt.marker_n = marker;
      opt.floor = plot_floor;
      if (!overlay_fit.empty()) {
        const auto j = nlohmann::json::parse(harness::read_file(overlay_fit), nullptr, false);
        if (j.is_discarded()) throw DataError("'" + overlay_fit + "': invalid JSON");
        const auto fit = fit_from_json(j.contains("fit") ? j.at("fit") : j);
        opt.overlays.push_back({"power-law fit", [fit](double n) { return fit.predict(n); }});
      }
      if (approx_d || approx_s) {
        if (!approx_d || !approx_s) throw ConfigError("config field 'overlay-approx': needs both --overlay-approx-d and --overlay-approx-s");
        const gaussian::GaussianTask task{*approx_d, *approx_s};
        task.validate();
        opt.overlays.push_back({"closed-form approximation", [task](double n) { return gaussian::approx_error(task, n); }});
      }
      write_text(plot_out, plot::render_svg(series, opt));
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitConfig;
}
