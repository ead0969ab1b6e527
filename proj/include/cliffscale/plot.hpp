#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cliffscale/error.hpp"
#include "cliffscale/scaling_curves.hpp"

namespace cliffscale::plot {

struct PlotSeries {
  ScalingCurve curve;
  std::string label;  // empty means derive from metadata
};

/// A closed-form curve drawn over the plotted n range.
struct Overlay {
  std::string label;
  std::function<double(double)> error_at;
};

struct PlotOptions {
  std::string title;
  int width = 720;
  int height = 480;
  Statistic statistic = Statistic::kMedian;
  std::optional<double> floor;       // values at or below zero are raised to this
  std::optional<double> marker_n;    // dashed vertical line
  std::vector<Overlay> overlays;
  int overlay_samples = 200;
};

namespace detail {

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
inline constexpr const char* kOverlayPalette[] = {"#000000", "#7f7f7f", "#bcbd22"};

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string label_from_metadata(const ScalingCurve::Metadata& meta) {
  std::string out;
  if (auto it = meta.find("task"); it != meta.end()) out = it->second;
  for (const char* key : {"estimator", "arm", "sampler", "d", "s", "sigma", "lambda", "bandlimit", "width"})
    if (auto it = meta.find(key); it != meta.end()) out += (out.empty() ? "" : " ") + std::string(key) + "=" + it->second;
  return out.empty() ? "curve" : out;
}

}  // namespace detail

/// Deterministic SVG 1.1 log-log plot: per series a median polyline and a
/// min-max band, closed-form overlays as dashed polylines, and a legend.
inline std::string render_svg(const std::vector<PlotSeries>& series, const PlotOptions& opt = {}) {
  if (series.empty()) throw ConfigError("plot needs at least one curve");
  if (opt.floor && !(*opt.floor > 0.0)) throw ConfigError("config field 'floor': must be > 0");
  if (opt.width < 200 || opt.height < 150) throw ConfigError("plot size must be at least 200x150");

  auto positive = [&](double v, const std::string& what) {
    if (v > 0.0) return v;
    if (opt.floor) return *opt.floor;
    throw DataError(what + " has a non-positive value that cannot be drawn on log axes; pass --floor to clamp it");
  };

  struct Prepared {
    std::vector<double> n, mid, lo, hi;
    bool band = false;
    std::string label;
  };
  std::vector<Prepared> prepared;
  double nmin = std::numeric_limits<double>::infinity(), nmax = 0.0;
  double ymin = std::numeric_limits<double>::infinity(), ymax = 0.0;
  for (const auto& s : series) {
    Prepared p;
    p.label = s.label.empty() ? detail::label_from_metadata(s.curve.metadata()) : s.label;
    if (s.curve.size() < 2) throw DataError("curve '" + p.label + "' has fewer than two points; cannot draw a scaling line");
    for (std::size_t i = 0; i < s.curve.size(); ++i) {
      p.n.push_back(static_cast<double>(s.curve.points()[i].n));
      p.mid.push_back(positive(s.curve.statistic_at(i, opt.statistic), "curve '" + p.label + "'"));
      p.lo.push_back(positive(s.curve.min_at(i), "curve '" + p.label + "'"));
      p.hi.push_back(positive(s.curve.max_at(i), "curve '" + p.label + "'"));
      if (s.curve.points()[i].errors.size() > 1) p.band = true;
    }
    nmin = std::min(nmin, p.n.front());
    nmax = std::max(nmax, p.n.back());
    ymin = std::min({ymin, *std::min_element(p.lo.begin(), p.lo.end()), *std::min_element(p.mid.begin(), p.mid.end())});
    ymax = std::max({ymax, *std::max_element(p.hi.begin(), p.hi.end()), *std::max_element(p.mid.begin(), p.mid.end())});
    prepared.push_back(std::move(p));
  }

  std::vector<std::pair<std::vector<double>, std::vector<double>>> overlay_pts;
  for (const auto& o : opt.overlays) {
    std::vector<double> xs, ys;
    const int k = std::max(2, opt.overlay_samples);
    for (int i = 0; i < k; ++i) {
      const double n = std::pow(10.0, std::log10(nmin) + (std::log10(nmax) - std::log10(nmin)) * i / (k - 1));
      xs.push_back(n);
      ys.push_back(positive(o.error_at(n), "overlay '" + o.label + "'"));
    }
    ymin = std::min(ymin, *std::min_element(ys.begin(), ys.end()));
    ymax = std::max(ymax, *std::max_element(ys.begin(), ys.end()));
    overlay_pts.emplace_back(std::move(xs), std::move(ys));
  }

  // Axes span whole decades.
  const double x0 = std::floor(std::log10(nmin)), x1 = std::max(std::ceil(std::log10(nmax)), x0 + 1);
  const double y0 = std::floor(std::log10(ymin)), y1 = std::max(std::ceil(std::log10(ymax)), y0 + 1);
  const double left = 80, right = opt.width - 20.0, top = opt.title.empty() ? 20.0 : 40.0, bottom = opt.height - 50.0;
  auto px = [&](double n) { return left + (std::log10(n) - x0) / (x1 - x0) * (right - left); };
  auto py = [&](double e) { return bottom - (std::log10(e) - y0) / (y1 - y0) * (bottom - top); };

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + std::to_string(opt.width) + "\" height=\"" +
         std::to_string(opt.height) + "\" viewBox=\"0 0 " + std::to_string(opt.width) + " " + std::to_string(opt.height) + "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(opt.width) + "\" height=\"" + std::to_string(opt.height) +
         "\" fill=\"#ffffff\"/>\n";
  if (!opt.title.empty())
    svg += "<text x=\"" + detail::num(opt.width / 2.0) + "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">" +
           detail::escape(opt.title) + "</text>\n";

  svg += "<g id=\"axes\" stroke=\"#000000\" stroke-width=\"1\">\n";
  svg += "<line x1=\"" + detail::num(left) + "\" y1=\"" + detail::num(bottom) + "\" x2=\"" + detail::num(right) + "\" y2=\"" +
         detail::num(bottom) + "\"/>\n";
  svg += "<line x1=\"" + detail::num(left) + "\" y1=\"" + detail::num(top) + "\" x2=\"" + detail::num(left) + "\" y2=\"" +
         detail::num(bottom) + "\"/>\n";
  const int ystep = std::max(1, static_cast<int>(std::ceil((y1 - y0) / 10.0)));
  for (int k = static_cast<int>(x0); k <= static_cast<int>(x1); ++k) {
    const double x = left + (k - x0) / (x1 - x0) * (right - left);
    svg += "<line x1=\"" + detail::num(x) + "\" y1=\"" + detail::num(bottom) + "\" x2=\"" + detail::num(x) + "\" y2=\"" +
           detail::num(bottom + 5) + "\"/>\n";
  }
  for (int k = static_cast<int>(y0); k <= static_cast<int>(y1); k += ystep) {
    const double y = bottom - (k - y0) / (y1 - y0) * (bottom - top);
    svg += "<line x1=\"" + detail::num(left - 5) + "\" y1=\"" + detail::num(y) + "\" x2=\"" + detail::num(left) + "\" y2=\"" +
           detail::num(y) + "\"/>\n";
  }
  svg += "</g>\n<g id=\"tick-labels\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#000000\">\n";
  for (int k = static_cast<int>(x0); k <= static_cast<int>(x1); ++k) {
    const double x = left + (k - x0) / (x1 - x0) * (right - left);
    svg += "<text x=\"" + detail::num(x) + "\" y=\"" + detail::num(bottom + 18) + "\" text-anchor=\"middle\">1e" +
           std::to_string(k) + "</text>\n";
  }
  for (int k = static_cast<int>(y0); k <= static_cast<int>(y1); k += ystep) {
    const double y = bottom - (k - y0) / (y1 - y0) * (bottom - top);
    svg += "<text x=\"" + detail::num(left - 8) + "\" y=\"" + detail::num(y + 4) + "\" text-anchor=\"end\">1e" +
           std::to_string(k) + "</text>\n";
  }
  svg += "<text x=\"" + detail::num((left + right) / 2) + "\" y=\"" + detail::num(opt.height - 12.0) +
         "\" text-anchor=\"middle\">n (training samples)</text>\n";
  svg += "<text x=\"16\" y=\"" + detail::num((top + bottom) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         detail::num((top + bottom) / 2) + ")\">test error</text>\n";
  svg += "</g>\n";

  for (std::size_t s = 0; s < prepared.size(); ++s) {
    const auto& p = prepared[s];
    const char* color = detail::kPalette[s % std::size(detail::kPalette)];
    svg += "<g id=\"series-" + std::to_string(s) + "\">\n";
    if (p.band) {
      svg += "<polygon class=\"band\" fill=\"" + std::string(color) + "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < p.n.size(); ++i) svg += detail::num(px(p.n[i])) + "," + detail::num(py(p.hi[i])) + " ";
      for (std::size_t i = p.n.size(); i-- > 0;)
        svg += detail::num(px(p.n[i])) + "," + detail::num(py(p.lo[i])) + (i ? " " : "");
      svg += "\"/>\n";
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < p.n.size(); ++i)
      svg += detail::num(px(p.n[i])) + "," + detail::num(py(p.mid[i])) + (i + 1 < p.n.size() ? " " : "");
    svg += "\"/>\n</g>\n";
  }
  for (std::size_t o = 0; o < overlay_pts.size(); ++o) {
    const auto& [xs, ys] = overlay_pts[o];
    svg += "<polyline class=\"overlay\" fill=\"none\" stroke=\"" +
           std::string(detail::kOverlayPalette[o % std::size(detail::kOverlayPalette)]) +
           "\" stroke-width=\"1.5\" stroke-dasharray=\"2,3\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i)
      svg += detail::num(px(xs[i])) + "," + detail::num(py(ys[i])) + (i + 1 < xs.size() ? " " : "");
    svg += "\"/>\n";
  }
  if (opt.marker_n) {
    if (!(*opt.marker_n > 0.0)) throw ConfigError("config field 'marker': must be > 0");
    const double x = px(*opt.marker_n);
    svg += "<line class=\"marker\" x1=\"" + detail::num(x) + "\" y1=\"" + detail::num(top) + "\" x2=\"" + detail::num(x) +
           "\" y2=\"" + detail::num(bottom) + "\" stroke=\"#555555\" stroke-width=\"1\" stroke-dasharray=\"6,4\"/>\n";
  }

  svg += "<g id=\"legend\" font-family=\"sans-serif\" font-size=\"11\">\n";
  double ly = top + 12;
  auto legend_row = [&](const std::string& color, const std::string& dash, const std::string& label) {
    svg += "<line x1=\"" + detail::num(right - 210) + "\" y1=\"" + detail::num(ly - 4) + "\" x2=\"" + detail::num(right - 186) +
           "\" y2=\"" + detail::num(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"" +
           (dash.empty() ? "" : " stroke-dasharray=\"" + dash + "\"") + "/>\n";
    svg += "<text x=\"" + detail::num(right - 180) + "\" y=\"" + detail::num(ly) + "\">" + detail::escape(label) + "</text>\n";
    ly += 16;
  };
  for (std::size_t s = 0; s < prepared.size(); ++s)
    legend_row(detail::kPalette[s % std::size(detail::kPalette)], "", prepared[s].label);
  for (std::size_t o = 0; o < opt.overlays.size(); ++o)
    legend_row(detail::kOverlayPalette[o % std::size(detail::kOverlayPalette)], "2,3", opt.overlays[o].label);
  svg += "</g>\n</svg>\n";
  return svg;
}

}  // namespace cliffscale::plot
