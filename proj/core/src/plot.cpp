#include "lossforge/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <sstream>

#include "lossforge/error.hpp"

namespace lossforge {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                    "#bcbd22", "#17becf", "#393b79", "#ad494a"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void widen() {
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

}  // namespace

std::string render_svg(std::span<const Series> series, const PlotOptions& options) {
  if (series.empty()) throw DomainError("render_svg: no series");
  Range xr, yr;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw ShapeError("render_svg: x/y length mismatch in " + s.label);
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
  }
  if (xr.lo > xr.hi) throw DomainError("render_svg: all series are empty");
  xr.widen();
  yr.widen();

  const double left = 70, right = 190, top = 40, bottom = 60;
  const double w = options.width, h = options.height;
  const double pw = w - left - right, ph = h - top - bottom;
  auto sx = [&](double v) { return left + (v - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto sy = [&](double v) { return top + ph - (v - yr.lo) / (yr.hi - yr.lo) * ph; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width << "\" height=\""
      << options.height << "\" viewBox=\"0 0 " << options.width << ' ' << options.height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!options.title.empty()) {
    out << "<text x=\"" << num(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
        << escape(options.title) << "</text>\n";
  }
  out << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw)
      << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";

  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double fx = xr.lo + (xr.hi - xr.lo) * i / kTicks;
    const double fy = yr.lo + (yr.hi - yr.lo) * i / kTicks;
    out << "<line x1=\"" << num(sx(fx)) << "\" y1=\"" << num(top + ph) << "\" x2=\"" << num(sx(fx))
        << "\" y2=\"" << num(top + ph + 5) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << num(sx(fx)) << "\" y=\"" << num(top + ph + 18)
        << "\" text-anchor=\"middle\">" << tick(fx) << "</text>\n";
    out << "<line x1=\"" << num(left - 5) << "\" y1=\"" << num(sy(fy)) << "\" x2=\"" << num(left)
        << "\" y2=\"" << num(sy(fy)) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << num(left - 8) << "\" y=\"" << num(sy(fy) + 4)
        << "\" text-anchor=\"end\">" << tick(fy) << "</text>\n";
  }
  out << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(h - 15)
      << "\" text-anchor=\"middle\">" << escape(options.x_label) << "</text>\n";
  out << "<text x=\"18\" y=\"" << num(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << num(top + ph / 2) << ")\">" << escape(options.y_label) << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kPalette[i % std::size(kPalette)];
    if (s.x.size() == 1) {
      out << "<circle cx=\"" << num(sx(s.x[0])) << "\" cy=\"" << num(sy(s.y[0]))
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    } else if (!s.x.empty()) {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t k = 0; k < s.x.size(); ++k) {
        out << (k ? " " : "") << num(sx(s.x[k])) << ',' << num(sy(s.y[k]));
      }
      out << "\"/>\n";
    }
    const double ly = top + 10 + 18.0 * static_cast<double>(i);
    out << "<g class=\"legend\"><line x1=\"" << num(left + pw + 15) << "\" y1=\"" << num(ly)
        << "\" x2=\"" << num(left + pw + 40) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/><text x=\"" << num(left + pw + 46) << "\" y=\"" << num(ly + 4)
        << "\">" << escape(s.label) << "</text></g>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace lossforge
