#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <sstream>

#include "cliffscale/harness.hpp"
#include "cliffscale/plot.hpp"

using namespace cliffscale;
using namespace cliffscale::harness;
namespace fs = std::filesystem;
using Catch::Approx;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("cliffscale_test_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::size_t count(const std::string& haystack, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) ++n;
  return n;
}

ScalingCurve power_law_curve(double A, double alpha, double E, std::int64_t trials = 1) {
  std::vector<CurvePoint> pts;
  for (auto n : log_spaced_grid(10, 100'000, 10)) pts.push_back({n, std::vector<double>(static_cast<std::size_t>(trials), A * std::pow(static_cast<double>(n), -alpha) + E)});
  return ScalingCurve(pts, {{"task", "synthetic"}});
}

}  // namespace

TEST_CASE("config text parsing", "[harness][config]") {
  const auto cfg = parse_config_text(
      "# linear regression\n"
      "kind = linreg\n"
      "d=100\n"
      "sigma = 0.1   # noise\n"
      "\n"
      "estimator = ridge\r\n"
      "n_min = 10\nn_max = 1000\npoints_per_decade = 5\n"
      "trials = 3\nseed = 18446744073709551615\n");
  CHECK(cfg.kind == Kind::kLinreg);
  CHECK(cfg.resolved_d() == 100);
  CHECK(cfg.sigma == 0.1);
  CHECK(cfg.estimator == linreg::Estimator::kRidge);
  CHECK(cfg.trials == 3);
  CHECK(cfg.seed == 18446744073709551615ULL);
  CHECK(cfg.n_grid() == std::vector<std::int64_t>{10, 16, 25, 40, 63, 100, 158, 251, 398, 631, 1000});

  ExperimentConfig over = cfg;
  apply_setting(over, "n", "1,2,3");
  CHECK(over.n_grid() == std::vector<std::int64_t>{1, 2, 3});
  CHECK(ExperimentConfig{}.n_grid().size() == 28);  // 1, 1.26 and 1.58 round together at the low end
}

TEST_CASE("config errors name the field", "[harness][config]") {
  const std::vector<std::pair<std::string, std::string>> bad{
      {"trials = 0\n", "'trials'"},        {"d = -3\n", "'d'"},          {"kind = spline\n", "'kind'"},
      {"sigma = abc\n", "'sigma'"},        {"n = 5,3\n", "'n'"},         {"colour = red\n", "'colour'"},
      {"seed = -1\n", "'seed'"},           {"estimator = svm\n", "'estimator'"},
  };
  for (const auto& [text, field] : bad) {
    try {
      parse_config_text(text);
      FAIL("accepted: " << text);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(field) != std::string::npos);
      CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
  }
  REQUIRE_THROWS_AS(parse_config_text("just words\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("n_min = 100\nn_max = 10\n").validate(), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("kind = import\n").validate(), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("kind = harmonic\nd = 4\n").validate(), ConfigError);
}

TEST_CASE("config echo reparses to the same config", "[harness][config][property]") {
  Rng rng(1);
  for (int rep = 0; rep < 50; ++rep) {
    ExperimentConfig cfg;
    cfg.kind = static_cast<Kind>(rng.below(3));
    cfg.d = 1 + static_cast<std::int64_t>(rng.below(3));
    cfg.sigma = rng.uniform();
    cfg.s = 3 * rng.uniform();
    cfg.lambda = 0.01 + rng.uniform();
    cfg.lr = 1e-4 + 1e-2 * rng.uniform();
    cfg.estimator = static_cast<linreg::Estimator>(rng.below(3));
    cfg.arm = rng.below(2) ? harmonic::Arm::kRegularized : harmonic::Arm::kUnregularized;
    cfg.n_list = log_spaced_grid(1 + static_cast<std::int64_t>(rng.below(5)), 100 + static_cast<std::int64_t>(rng.below(1000)), 7);
    cfg.trials = 1 + static_cast<std::int64_t>(rng.below(100));
    cfg.seed = rng.below(1'000'000'000);
    cfg.out = "dir_" + std::to_string(rep);
    const auto back = parse_config_text(to_config_text(cfg));
    REQUIRE(config_entries(back) == config_entries(cfg));
    REQUIRE(back.n_grid() == cfg.n_grid());
  }
}

TEST_CASE("run writes outputs and a verifiable manifest", "[harness][run]") {
  const auto dir = scratch("run");
  auto cfg = parse_config_text("kind = linreg\nd = 5\nsigma = 0\nn = 1,2,3,4,5,6,8,10\ntrials = 20\nseed = 3\n");
  cfg.out = (dir / "a").string();
  const auto r = run(cfg);
  for (std::size_t i = 0; i < r.curve.size(); ++i)
    if (r.curve.points()[i].n >= 5) CHECK(r.curve.median_at(i) < 1e-15);
  CHECK(fs::exists(dir / "a" / "curve.csv"));
  CHECK(verify_run_dir(dir / "a"));
  CHECK(r.manifest.at("version") == std::string(kToolVersion));
  CHECK(r.manifest.at("trial_counts").size() == 8);
  CHECK(r.manifest.at("trial_counts")[0].at("trials") == 20);
  CHECK(r.manifest.at("duration_seconds").get<double>() >= 0.0);

  // The echoed config reproduces the run.
  ExperimentConfig again;
  for (const auto& [k, v] : r.manifest.at("config").items()) apply_setting(again, k, v.get<std::string>());
  again.out = (dir / "b").string();
  run(again);
  CHECK(read_file(dir / "a" / "curve.csv") == read_file(dir / "b" / "curve.csv"));
  CHECK(read_file(dir / "a" / "curve.json") == read_file(dir / "b" / "curve.json"));

  // Tampering is detected.
  write_file(dir / "a" / "curve.csv", read_file(dir / "a" / "curve.csv") + "8,20,0.5\n");
  CHECK_FALSE(verify_run_dir(dir / "a"));
}

TEST_CASE("gaussian run is byte-identical across repeats and thread counts", "[harness][determinism]") {
  const auto dir = scratch("determinism");
  auto cfg = parse_config_text("kind = gaussian\nd = 100\ns = 1\ntrials = 100\nseed = 7\nn_min = 1\nn_max = 1000\n");
  cfg.threads = 1;
  cfg.out = (dir / "one").string();
  run(cfg);
  cfg.threads = 4;
  cfg.out = (dir / "four").string();
  run(cfg);
  CHECK(read_file(dir / "one" / "curve.csv") == read_file(dir / "four" / "curve.csv"));
  CHECK(read_file(dir / "one" / "curve.json") == read_file(dir / "four" / "curve.json"));
}

TEST_CASE("import reports malformed rows by line", "[harness][import]") {
  const auto dir = scratch("import");
  write_file(dir / "bad.csv", "n,trial,error\n10,0,0.5\n10,1,oops\n");
  auto cfg = parse_config_text("kind = import\n");
  cfg.input = (dir / "bad.csv").string();
  cfg.out = (dir / "out").string();
  try {
    run(cfg);
    FAIL("malformed CSV accepted");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  write_file(dir / "empty.csv", "");
  cfg.input = (dir / "empty.csv").string();
  REQUIRE_THROWS_AS(run(cfg), DataError);
}

TEST_CASE("trial-count monotonicity of the min-max band", "[harness][property]") {
  for (const char* kind : {"linreg", "gaussian"}) {
    auto cfg = parse_config_text(std::string("kind = ") + kind + "\nd = 10\nsigma = 0.1\nn = 3,10,30,100\nseed = 11\n");
    cfg.trials = 50;
    const auto big = run_experiment(cfg);
    cfg.trials = 10;
    const auto small = run_experiment(cfg);
    for (std::size_t i = 0; i < big.size(); ++i) {
      CHECK(big.min_at(i) <= small.min_at(i));
      CHECK(big.max_at(i) >= small.max_at(i));
      CHECK(std::equal(small.points()[i].errors.begin(), small.points()[i].errors.end(), big.points()[i].errors.begin()));
    }
  }
}

TEST_CASE("analyze", "[harness][analyze]") {
  SECTION("synthetic power law: fit within 1% and no cliffs") {
    const auto a = analyze(power_law_curve(3.0, 0.7, 0.02));
    REQUIRE(a.fit);
    CHECK(a.fit->A == Approx(3.0).epsilon(0.01));
    CHECK(a.fit->alpha == Approx(0.7).epsilon(0.01));
    CHECK(a.fit->E == Approx(0.02).epsilon(0.01));
    REQUIRE(a.cliffs);
    CHECK(a.cliffs->empty());
  }
  SECTION("gaussian closed-form curve has one cliff reaching the knee") {
    const auto curve = gaussian::approx_curve({100, 2.0}, log_spaced_grid(1, 10'000, 5));
    const auto a = analyze(curve, {AnalyzeMode::kCliffs, {}, std::nullopt});
    CHECK_FALSE(a.fit);
    REQUIRE(a.cliffs->size() == 1);
    CHECK(a.cliffs->front().contains(25));
  }
  SECTION("CSV round trip gives identical analysis") {
    auto cfg = parse_config_text("kind = gaussian\nd = 50\ns = 1.5\ntrials = 30\nseed = 2\nn_min = 2\nn_max = 5000\n");
    const auto dir = scratch("roundtrip");
    cfg.out = dir.string();
    const auto r = run(cfg);
    const auto from_disk = load_curve((dir / "curve.csv").string());
    CHECK(to_json(analyze(from_disk), from_disk).dump() == to_json(analyze(r.curve), r.curve).dump());
    const auto from_json = load_curve((dir / "curve.json").string());
    CHECK(from_json == r.curve);
  }
  SECTION("table and JSON") {
    const auto curve = power_law_curve(1.0, 0.5, 0.0, 3);
    const auto a = analyze(curve);
    const auto table = analysis_table(a, curve);
    CHECK(table.find("median") != std::string::npos);
    CHECK(table.find("cliffs: none") != std::string::npos);
    const auto j = to_json(a, curve);
    CHECK(j.at("points").size() == curve.size());
    CHECK(j.at("points")[0].at("trials") == 3);
  }
  SECTION("degenerate fits surface their error") {
    ScalingCurve tiny(CurvePoints{{1, {0.5}}, {2, {0.4}}});
    REQUIRE_THROWS_AS(analyze(tiny), DataError);
    REQUIRE_THROWS_AS(parse_analyze_mode("everything"), ConfigError);
  }
}

TEST_CASE("SVG plot", "[harness][plot]") {
  gaussian::ScalingConfig gc;
  gc.task = {100, 1.0};
  gc.n_grid = log_spaced_grid(1, 10'000, 5);
  gc.trials = 30;
  gc.seed = 5;
  const auto empirical = gaussian::run_gaussian_scaling(gc);

  plot::PlotOptions opt;
  opt.title = "Gaussian <classifier> & approx";
  opt.marker_n = 100;
  opt.overlays.push_back({"approximation", [](double n) { return gaussian::approx_error({100, 1.0}, n); }});
  const auto svg = plot::render_svg({{empirical, ""}}, opt);
  CHECK(svg.starts_with("<?xml"));
  CHECK(svg.find("version=\"1.1\"") != std::string::npos);
  CHECK(count(svg, "<polyline") == 2);
  CHECK(count(svg, "class=\"band\"") == 1);
  CHECK(count(svg, "class=\"marker\"") == 1);
  CHECK(svg.find("&lt;classifier&gt; &amp;") != std::string::npos);
  CHECK(svg.find("gaussian") != std::string::npos);
  CHECK(plot::render_svg({{empirical, ""}}, opt) == svg);

  ScalingCurve single(CurvePoints{{10, {0.1, 0.2}}});
  REQUIRE_THROWS_AS(plot::render_svg({{single, ""}}), DataError);

  ScalingCurve with_zero(CurvePoints{{1, {0.5}}, {10, {0.0}}});
  REQUIRE_THROWS_AS(plot::render_svg({{with_zero, ""}}), DataError);
  plot::PlotOptions floored;
  floored.floor = 1e-20;
  CHECK_NOTHROW(plot::render_svg({{with_zero, ""}}, floored));
  REQUIRE_THROWS_AS(plot::render_svg({}), ConfigError);
}

TEST_CASE("shipped configs parse and validate", "[harness][config]") {
  std::size_t seen = 0;
  for (const auto& entry : fs::directory_iterator(CLIFFSCALE_CONFIG_DIR)) {
    if (entry.path().extension() != ".cfg") continue;
    ExperimentConfig cfg;
    REQUIRE_NOTHROW(apply_config_file(cfg, entry.path().string()));
    REQUIRE_NOTHROW(cfg.validate());
    CHECK(!cfg.n_grid().empty());
    ++seen;
  }
  CHECK(seen >= 5);
}
