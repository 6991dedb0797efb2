#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "biasprobe/errors.hpp"
#include "biasprobe/stats/fit.hpp"
#include "biasprobe/text.hpp"

namespace biasprobe::experiment {

struct PlotOptions {
  std::string title;
  bool female = true;
  bool male = true;
};

namespace detail {

inline std::string xml_escape(std::string_view s) {
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

inline std::string num(double v) { return text::format_fixed(v, 2); }

}  // namespace detail

/// Scatter of mean gender mass per axis value with the fitted curve and
/// its 95% band for each gender shown.
///
/// Markers carry class `point female|male`, curves `fit female|male` and
/// bands `band female|male`, so callers and tests can count layers.
inline std::string render_plot(const std::vector<stats::SeriesPoint>& series, const stats::FitResult& fit,
                               const PlotOptions& opts = {}) {
  if (series.empty()) throw InputError("nothing to plot");
  constexpr double width = 900, height = 520;
  constexpr double left = 70, right = 30, top = 50, bottom = 130;
  const double pw = width - left - right;
  const double ph = height - top - bottom;
  constexpr int samples = 120;

  struct Layer {
    const char* name;
    const char* color;
    const stats::PolyFit* fit;
    bool female;
  };
  std::vector<Layer> layers;
  if (opts.female) layers.push_back({"female", "#c2185b", &fit.female, true});
  if (opts.male) layers.push_back({"male", "#1565c0", &fit.male, false});

  double ymax = 0.0;
  double ymin = 0.0;
  for (const auto& l : layers) {
    for (const auto& p : series) ymax = std::max(ymax, l.female ? p.mean_female : p.mean_male);
    for (int i = 0; i <= samples; ++i) {
      const double x = double(i) / samples;
      const double hw = l.fit->half_width(x);
      ymax = std::max(ymax, l.fit->value(x) + hw);
      ymin = std::min(ymin, l.fit->value(x) - hw);
    }
  }
  ymax = std::min(ymax, 1.05);
  ymin = std::max(ymin, -0.05);
  if (ymax - ymin < 1e-9) ymax = ymin + 1.0;

  const double levels = static_cast<double>(std::max<std::size_t>(fit.axis_levels, 2) - 1);
  const auto sx = [&](double x) { return left + x * pw; };
  const auto sy = [&](double y) { return top + (ymax - std::clamp(y, ymin, ymax)) / (ymax - ymin) * ph; };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::num(width) +
                    "\" height=\"" + detail::num(height) + "\" viewBox=\"0 0 " + detail::num(width) + " " +
                    detail::num(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!opts.title.empty()) {
    svg += "<text x=\"" + detail::num(width / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" +
           detail::xml_escape(opts.title) + "</text>\n";
  }

  // Axes, y ticks and x labels.
  svg += "<g class=\"axes\" stroke=\"#333\">\n";
  svg += "<line x1=\"" + detail::num(left) + "\" y1=\"" + detail::num(top + ph) + "\" x2=\"" +
         detail::num(left + pw) + "\" y2=\"" + detail::num(top + ph) + "\"/>\n";
  svg += "<line x1=\"" + detail::num(left) + "\" y1=\"" + detail::num(top) + "\" x2=\"" + detail::num(left) +
         "\" y2=\"" + detail::num(top + ph) + "\"/>\n</g>\n";
  for (int i = 0; i <= 5; ++i) {
    const double y = ymin + (ymax - ymin) * i / 5.0;
    svg += "<text class=\"ytick\" x=\"" + detail::num(left - 8) + "\" y=\"" + detail::num(sy(y) + 4) +
           "\" text-anchor=\"end\">" + text::format_fixed(y, 2) + "</text>\n";
  }
  for (const auto& p : series) {
    const double x = sx(static_cast<double>(p.w_index) / levels);
    svg += "<text class=\"xlabel\" x=\"" + detail::num(x) + "\" y=\"" + detail::num(top + ph + 14) +
           "\" text-anchor=\"end\" transform=\"rotate(-45 " + detail::num(x) + " " + detail::num(top + ph + 14) +
           ")\">" + detail::xml_escape(p.w_value) + "</text>\n";
  }
  svg += "<text x=\"20\" y=\"" + detail::num(top + ph / 2) + "\" transform=\"rotate(-90 20 " +
         detail::num(top + ph / 2) + ")\" text-anchor=\"middle\">mean probability mass</text>\n";

  for (const auto& l : layers) {
    std::string upper, lower, curve;
    for (int i = 0; i <= samples; ++i) {
      const double x = double(i) / samples;
      const double y = l.fit->value(x);
      const double hw = l.fit->half_width(x);
      curve += (i ? " L" : "M") + detail::num(sx(x)) + "," + detail::num(sy(y));
      upper += detail::num(sx(x)) + "," + detail::num(sy(y + hw)) + " ";
      const double xr = 1.0 - x;
      lower += detail::num(sx(xr)) + "," + detail::num(sy(l.fit->value(xr) - l.fit->half_width(xr))) + " ";
    }
    lower.pop_back();
    svg += std::string("<polygon class=\"band ") + l.name + "\" fill=\"" + l.color +
           "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"" + upper + lower + "\"/>\n";
    svg += std::string("<path class=\"fit ") + l.name + "\" fill=\"none\" stroke=\"" + l.color +
           "\" stroke-width=\"2\" d=\"" + curve + "\"/>\n";
    for (const auto& p : series) {
      const double v = l.female ? p.mean_female : p.mean_male;
      svg += std::string("<circle class=\"point ") + l.name + "\" cx=\"" +
             detail::num(sx(static_cast<double>(p.w_index) / levels)) + "\" cy=\"" + detail::num(sy(v)) +
             "\" r=\"3.5\" fill=\"" + l.color + "\"><title>" + detail::xml_escape(p.w_value) + ": " +
             text::format_fixed(v, 4) + "</title></circle>\n";
    }
  }

  double ly = top + 4;
  for (const auto& l : layers) {
    svg += std::string("<rect class=\"legend\" x=\"") + detail::num(left + pw - 90) + "\" y=\"" +
           detail::num(ly) + "\" width=\"12\" height=\"12\" fill=\"" + l.color + "\"/>\n";
    svg += "<text x=\"" + detail::num(left + pw - 72) + "\" y=\"" + detail::num(ly + 10) + "\">" + l.name +
           "</text>\n";
    ly += 18;
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace biasprobe::experiment
