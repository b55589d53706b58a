#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "forage/error.hpp"

namespace forage::svg {

// All output is deterministic: fixed float formatting, no timestamps, fixed
// palette, so identical inputs give byte-identical files.

inline std::string fmt(double v, const char* spec = "%.2f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

inline std::string label_fmt(double v) { return fmt(v, "%.6g"); }

inline const std::vector<std::string>& palette() {
  static const std::vector<std::string> colors = {
      "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
  return colors;
}

struct Curve {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> ci;  // optional, empty or same length as y
  std::vector<bool> defined;  // optional mask; empty means all defined
};

struct ViolinData {
  std::string label;
  std::vector<double> values;
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Curve> curves;
  std::vector<ViolinData> violins;  // violin panels leave curves empty
  std::optional<double> y_min_hint;
  std::optional<double> y_max_hint;
};

namespace detail {

constexpr double kPanelW = 420, kPanelH = 300;
constexpr double kLeft = 54, kRight = 14, kTop = 30, kBottom = 40;

inline std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
  std::vector<double> ticks;
  double range = hi - lo;
  if (range <= 0) {
    ticks.push_back(lo);
    return ticks;
  }
  double raw = range / target;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= m * mag) {
      step = m * mag;
      break;
    }
  }
  double first = std::ceil(lo / step) * step;
  for (double v = first; v <= hi + step * 1e-9; v += step)
    ticks.push_back(std::abs(v) < step * 1e-9 ? 0.0 : v);
  return ticks;
}

struct Scale {
  double lo, hi, out_lo, out_hi;
  double operator()(double v) const {
    if (hi == lo) return (out_lo + out_hi) / 2;
    return out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo);
  }
};

inline void quantiles(std::vector<double> v, double& q25, double& q50,
                      double& q75) {
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    double idx = p * (v.size() - 1);
    std::size_t i = static_cast<std::size_t>(idx);
    double frac = idx - i;
    if (i + 1 < v.size()) return v[i] * (1 - frac) + v[i + 1] * frac;
    return v[i];
  };
  q25 = q(0.25);
  q50 = q(0.50);
  q75 = q(0.75);
}

inline std::string render_line_panel(const Panel& p, double ox, double oy) {
  double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  bool first = true;
  for (const auto& c : p.curves) {
    for (std::size_t k = 0; k < c.x.size(); ++k) {
      if (!c.defined.empty() && !c.defined[k]) continue;
      double ci = c.ci.empty() ? 0.0 : c.ci[k];
      if (first) {
        x_lo = x_hi = c.x[k];
        y_lo = c.y[k] - ci;
        y_hi = c.y[k] + ci;
        first = false;
      } else {
        x_lo = std::min(x_lo, c.x[k]);
        x_hi = std::max(x_hi, c.x[k]);
        y_lo = std::min(y_lo, c.y[k] - ci);
        y_hi = std::max(y_hi, c.y[k] + ci);
      }
    }
  }
  if (p.y_min_hint) y_lo = std::min(y_lo, *p.y_min_hint);
  if (p.y_max_hint) y_hi = std::max(y_hi, *p.y_max_hint);
  if (y_hi == y_lo) y_hi = y_lo + 1;
  if (x_hi == x_lo) x_hi = x_lo + 1;

  Scale sx{x_lo, x_hi, ox + kLeft, ox + kPanelW - kRight};
  Scale sy{y_lo, y_hi, oy + kPanelH - kBottom, oy + kTop};

  std::string s;
  s += "<rect x=\"" + fmt(ox + kLeft) + "\" y=\"" + fmt(oy + kTop) +
       "\" width=\"" + fmt(kPanelW - kLeft - kRight) + "\" height=\"" +
       fmt(kPanelH - kTop - kBottom) +
       "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
  s += "<text x=\"" + fmt(ox + kPanelW / 2) + "\" y=\"" + fmt(oy + 18) +
       "\" text-anchor=\"middle\" font-size=\"13\">" + p.title + "</text>\n";

  for (double tv : nice_ticks(x_lo, x_hi)) {
    double X = sx(tv);
    s += "<line x1=\"" + fmt(X) + "\" y1=\"" + fmt(oy + kPanelH - kBottom) +
         "\" x2=\"" + fmt(X) + "\" y2=\"" + fmt(oy + kPanelH - kBottom + 4) +
         "\" stroke=\"#444444\"/>\n";
    s += "<text x=\"" + fmt(X) + "\" y=\"" + fmt(oy + kPanelH - kBottom + 16) +
         "\" text-anchor=\"middle\" font-size=\"10\">" + label_fmt(tv) +
         "</text>\n";
  }
  for (double tv : nice_ticks(y_lo, y_hi)) {
    double Y = sy(tv);
    s += "<line x1=\"" + fmt(ox + kLeft - 4) + "\" y1=\"" + fmt(Y) +
         "\" x2=\"" + fmt(ox + kLeft) + "\" y2=\"" + fmt(Y) +
         "\" stroke=\"#444444\"/>\n";
    s += "<text x=\"" + fmt(ox + kLeft - 7) + "\" y=\"" + fmt(Y + 3) +
         "\" text-anchor=\"end\" font-size=\"10\">" + label_fmt(tv) +
         "</text>\n";
  }
  s += "<text x=\"" + fmt(ox + kPanelW / 2) + "\" y=\"" +
       fmt(oy + kPanelH - 8) + "\" text-anchor=\"middle\" font-size=\"11\">" +
       p.x_label + "</text>\n";
  s += "<text x=\"" + fmt(ox + 14) + "\" y=\"" + fmt(oy + kPanelH / 2) +
       "\" text-anchor=\"middle\" font-size=\"11\" transform=\"rotate(-90 " +
       fmt(ox + 14) + " " + fmt(oy + kPanelH / 2) + ")\">" + p.y_label +
       "</text>\n";

  for (std::size_t ci_idx = 0; ci_idx < p.curves.size(); ++ci_idx) {
    const Curve& c = p.curves[ci_idx];
    const std::string& color = palette()[ci_idx % palette().size()];
    auto defined = [&](std::size_t k) {
      return c.defined.empty() || c.defined[k];
    };
    if (!c.ci.empty()) {
      // confidence band as a closed polygon per defined run
      std::size_t k = 0;
      while (k < c.x.size()) {
        while (k < c.x.size() && !defined(k)) ++k;
        std::size_t start = k;
        while (k < c.x.size() && defined(k)) ++k;
        if (k - start < 2) continue;
        std::string pts;
        for (std::size_t m = start; m < k; ++m)
          pts += fmt(sx(c.x[m])) + "," + fmt(sy(c.y[m] + c.ci[m])) + " ";
        for (std::size_t m = k; m-- > start;)
          pts += fmt(sx(c.x[m])) + "," + fmt(sy(c.y[m] - c.ci[m])) + " ";
        s += "<polygon points=\"" + pts + "\" fill=\"" + color +
             "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
      }
    }
    std::size_t k = 0;
    while (k < c.x.size()) {
      while (k < c.x.size() && !defined(k)) ++k;
      std::size_t start = k;
      while (k < c.x.size() && defined(k)) ++k;
      if (k == start) continue;
      std::string pts;
      for (std::size_t m = start; m < k; ++m)
        pts += fmt(sx(c.x[m])) + "," + fmt(sy(c.y[m])) + " ";
      s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"1.5\"/>\n";
    }
    double lx = ox + kLeft + 10;
    double ly = oy + kTop + 14 + 14 * static_cast<double>(ci_idx);
    s += "<line x1=\"" + fmt(lx) + "\" y1=\"" + fmt(ly - 4) + "\" x2=\"" +
         fmt(lx + 18) + "\" y2=\"" + fmt(ly - 4) + "\" stroke=\"" + color +
         "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + fmt(lx + 22) + "\" y=\"" + fmt(ly) +
         "\" font-size=\"10\">" + c.label + "</text>\n";
  }
  return s;
}

inline std::string render_violin_panel(const Panel& p, double ox, double oy) {
  double y_lo = 0, y_hi = 1;
  bool first = true;
  for (const auto& v : p.violins)
    for (double x : v.values) {
      if (first) {
        y_lo = y_hi = x;
        first = false;
      } else {
        y_lo = std::min(y_lo, x);
        y_hi = std::max(y_hi, x);
      }
    }
  if (p.y_min_hint) y_lo = std::min(y_lo, *p.y_min_hint);
  if (p.y_max_hint) y_hi = std::max(y_hi, *p.y_max_hint);
  if (y_hi == y_lo) y_hi = y_lo + 1;

  Scale sy{y_lo, y_hi, oy + kPanelH - kBottom, oy + kTop};
  const double plot_w = kPanelW - kLeft - kRight;
  const double slot = plot_w / std::max<std::size_t>(p.violins.size(), 1);

  std::string s;
  s += "<rect x=\"" + fmt(ox + kLeft) + "\" y=\"" + fmt(oy + kTop) +
       "\" width=\"" + fmt(plot_w) + "\" height=\"" +
       fmt(kPanelH - kTop - kBottom) +
       "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
  s += "<text x=\"" + fmt(ox + kPanelW / 2) + "\" y=\"" + fmt(oy + 18) +
       "\" text-anchor=\"middle\" font-size=\"13\">" + p.title + "</text>\n";
  for (double tv : nice_ticks(y_lo, y_hi)) {
    double Y = sy(tv);
    s += "<line x1=\"" + fmt(ox + kLeft - 4) + "\" y1=\"" + fmt(Y) +
         "\" x2=\"" + fmt(ox + kLeft) + "\" y2=\"" + fmt(Y) +
         "\" stroke=\"#444444\"/>\n";
    s += "<text x=\"" + fmt(ox + kLeft - 7) + "\" y=\"" + fmt(Y + 3) +
         "\" text-anchor=\"end\" font-size=\"10\">" + label_fmt(tv) +
         "</text>\n";
  }
  s += "<text x=\"" + fmt(ox + 14) + "\" y=\"" + fmt(oy + kPanelH / 2) +
       "\" text-anchor=\"middle\" font-size=\"11\" transform=\"rotate(-90 " +
       fmt(ox + 14) + " " + fmt(oy + kPanelH / 2) + ")\">" + p.y_label +
       "</text>\n";

  for (std::size_t vi = 0; vi < p.violins.size(); ++vi) {
    const auto& v = p.violins[vi];
    const std::string& color = palette()[vi % palette().size()];
    double cx = ox + kLeft + slot * (vi + 0.5);
    s += "<text x=\"" + fmt(cx) + "\" y=\"" + fmt(oy + kPanelH - kBottom + 16) +
         "\" text-anchor=\"middle\" font-size=\"10\">" + v.label + "</text>\n";
    if (v.values.empty()) continue;

    // Gaussian KDE outline, mirrored around the slot center
    std::vector<double> sorted = v.values;
    std::sort(sorted.begin(), sorted.end());
    double mean = 0;
    for (double x : sorted) mean += x;
    mean /= sorted.size();
    double var = 0;
    for (double x : sorted) var += (x - mean) * (x - mean);
    var = sorted.size() > 1 ? var / (sorted.size() - 1) : 0.0;
    double sd = std::sqrt(var);
    double bw = sd > 0 ? 0.9 * sd * std::pow(double(sorted.size()), -0.2)
                       : (y_hi - y_lo) / 50.0;
    constexpr int kSamples = 41;
    std::vector<double> ys(kSamples), dens(kSamples);
    double dmax = 0;
    for (int k = 0; k < kSamples; ++k) {
      double y = sorted.front() +
                 (sorted.back() - sorted.front()) * k / double(kSamples - 1);
      ys[k] = y;
      double d = 0;
      for (double x : sorted) {
        double z = (y - x) / bw;
        d += std::exp(-0.5 * z * z);
      }
      dens[k] = d;
      dmax = std::max(dmax, d);
    }
    if (dmax > 0 && sorted.back() > sorted.front()) {
      double half = slot * 0.38;
      std::string pts;
      for (int k = 0; k < kSamples; ++k)
        pts += fmt(cx + half * dens[k] / dmax) + "," + fmt(sy(ys[k])) + " ";
      for (int k = kSamples; k-- > 0;)
        pts += fmt(cx - half * dens[k] / dmax) + "," + fmt(sy(ys[k])) + " ";
      s += "<polygon points=\"" + pts + "\" fill=\"" + color +
           "\" fill-opacity=\"0.25\" stroke=\"" + color + "\"/>\n";
    }
    double q25, q50, q75;
    quantiles(sorted, q25, q50, q75);
    double bw2 = slot * 0.10;
    s += "<rect x=\"" + fmt(cx - bw2) + "\" y=\"" + fmt(sy(q75)) +
         "\" width=\"" + fmt(2 * bw2) + "\" height=\"" +
         fmt(sy(q25) - sy(q75)) + "\" fill=\"" + color +
         "\" fill-opacity=\"0.6\" stroke=\"" + color + "\"/>\n";
    s += "<line x1=\"" + fmt(cx - bw2) + "\" y1=\"" + fmt(sy(q50)) +
         "\" x2=\"" + fmt(cx + bw2) + "\" y2=\"" + fmt(sy(q50)) +
         "\" stroke=\"#ffffff\" stroke-width=\"1.5\"/>\n";
    s += "<line x1=\"" + fmt(cx) + "\" y1=\"" + fmt(sy(sorted.front())) +
         "\" x2=\"" + fmt(cx) + "\" y2=\"" + fmt(sy(sorted.back())) +
         "\" stroke=\"" + color + "\" stroke-width=\"1\"/>\n";
  }
  return s;
}

}  // namespace detail

// Renders one or more panels side by side into a standalone SVG document.
inline std::string render(const std::vector<Panel>& panels) {
  if (panels.empty()) throw ConfigError("plot: nothing to render");
  double width = detail::kPanelW * panels.size();
  double height = detail::kPanelH;
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) +
       "\" height=\"" + fmt(height) + "\" viewBox=\"0 0 " + fmt(width) + " " +
       fmt(height) + "\" font-family=\"sans-serif\">\n";
  s += "<rect width=\"" + fmt(width) + "\" height=\"" + fmt(height) +
       "\" fill=\"#ffffff\"/>\n";
  for (std::size_t k = 0; k < panels.size(); ++k) {
    const auto& p = panels[k];
    double ox = detail::kPanelW * k;
    if (!p.violins.empty())
      s += detail::render_violin_panel(p, ox, 0);
    else
      s += detail::render_line_panel(p, ox, 0);
  }
  s += "</svg>\n";
  return s;
}

}  // namespace forage::svg
