#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "cliffscale/error.hpp"
#include "cliffscale/format.hpp"
#include "cliffscale/scaling_curves.hpp"

namespace cliffscale {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_field(std::string_view text, T& out) {
  text = trim(text);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

}  // namespace detail

/// Parses the `n,trial,error` CSV format. Errors name the offending line.
inline std::vector<RawSample> read_samples_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<RawSample> samples;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::trim(line);
    if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
    if (view.empty()) continue;
    if (!header_seen) {
      if (view != "n,trial,error")
        throw DataError("line " + std::to_string(line_no) + ": expected header 'n,trial,error'");
      header_seen = true;
      continue;
    }
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
      const auto comma = view.find(',', start);
      fields.push_back(view.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (fields.size() != 3) throw DataError(where + "expected 3 comma-separated fields");
    RawSample s;
    if (!detail::parse_field(fields[0], s.n) || s.n < 1) throw DataError(where + "n must be an integer >= 1");
    if (!detail::parse_field(fields[1], s.trial) || s.trial < 0)
      throw DataError(where + "trial must be an integer >= 0");
    if (!detail::parse_field(fields[2], s.error) || !std::isfinite(s.error) || s.error < 0.0)
      throw DataError(where + "error must be a finite nonnegative number");
    samples.push_back(s);
  }
  if (!header_seen) throw DataError("empty curve file: missing 'n,trial,error' header");
  if (samples.empty()) throw DataError("curve file has a header but no data rows");
  return samples;
}

inline ScalingCurve read_curve_csv(std::istream& in) {
  const auto samples = read_samples_csv(in);
  return aggregate_trials(samples);
}

/// Writes one row per (n, trial); trial is the position within the point.
inline void write_curve_csv(std::ostream& out, const ScalingCurve& curve) {
  out << "n,trial,error\n";
  for (const auto& p : curve.points())
    for (std::size_t t = 0; t < p.errors.size(); ++t) out << p.n << ',' << t << ',' << format_double(p.errors[t]) << '\n';
}

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline ordered_json to_json(const ScalingCurve& curve) {
  ordered_json points = ordered_json::array();
  for (const auto& p : curve.points()) points.push_back({{"n", p.n}, {"errors", p.errors}});
  ordered_json meta = ordered_json::object();
  for (const auto& [k, v] : curve.metadata()) meta[k] = v;
  return {{"points", points}, {"metadata", meta}};
}

inline ScalingCurve curve_from_json(const json& j) {
  try {
    std::vector<CurvePoint> points;
    for (const auto& p : j.at("points")) points.push_back({p.at("n").get<std::int64_t>(), p.at("errors").get<std::vector<double>>()});
    ScalingCurve::Metadata meta;
    if (j.contains("metadata"))
      for (const auto& [k, v] : j.at("metadata").items()) meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
    return ScalingCurve(std::move(points), std::move(meta));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed curve JSON: ") + e.what());
  }
}

inline ordered_json to_json(const PowerLawFit& fit) {
  return {{"A", fit.A}, {"alpha", fit.alpha}, {"E", fit.E}, {"residual", fit.residual},
          {"n_min", fit.n_min}, {"n_max", fit.n_max}};
}

inline PowerLawFit fit_from_json(const json& j) {
  try {
    PowerLawFit f{j.at("A").get<double>(), j.at("alpha").get<double>(), j.at("E").get<double>(),
                  j.value("residual", 0.0), j.value("n_min", std::int64_t{1}), j.value("n_max", std::int64_t{2})};
    f.validate();
    return f;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed fit JSON: ") + e.what());
  }
}

inline ordered_json to_json(const std::vector<CliffRegion>& cliffs) {
  ordered_json arr = ordered_json::array();
  for (const auto& c : cliffs) arr.push_back({{"n_start", c.n_start}, {"n_end", c.n_end}, {"strength", c.strength}});
  return arr;
}

/// Loads a curve from CSV or JSON, chosen by extension (.json) or content.
inline ScalingCurve load_curve(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open curve file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (path.ends_with(".json") || (first != std::string::npos && text[first] == '{')) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw DataError("'" + path + "': invalid JSON");
    return curve_from_json(j);
  }
  std::istringstream csv(text);
  try {
    return read_curve_csv(csv);
  } catch (const DataError& e) {
    throw DataError("'" + path + "' " + e.what());
  }
}

}  // namespace cliffscale
