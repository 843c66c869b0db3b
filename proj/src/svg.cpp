#include "ues/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ues/error.hpp"
#include "ues/io_util.hpp"

namespace ues::svg {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 72.0;
constexpr double kRight = 24.0;
constexpr double kTop = 48.0;
constexpr double kBottom = 56.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;
  double map(double v, double a, double b) const {
    if (hi == lo) return (a + b) / 2.0;
    return a + (v - lo) / (hi - lo) * (b - a);
  }
};

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

void open_svg(std::ostringstream& out, const std::string& title, const std::string& csv) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  out << "<desc>" << escape(csv) << "</desc>\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
         "font-family=\"sans-serif\">"
      << escape(title) << "</text>\n";
}

void draw_axes(std::ostringstream& out, const Range& xr, const Range& yr,
               const std::string& x_label, const std::string& y_label) {
  const double x0 = kLeft, x1 = kWidth - kRight;
  const double y0 = kHeight - kBottom, y1 = kTop;
  out << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double f = static_cast<double>(i) / 4.0;
    const double xv = xr.lo + f * (xr.hi - xr.lo);
    const double yv = yr.lo + f * (yr.hi - yr.lo);
    const double px = x0 + f * (x1 - x0);
    const double py = y0 - f * (y0 - y1);
    out << "<line x1=\"" << px << "\" y1=\"" << y0 << "\" x2=\"" << px << "\" y2=\"" << y0 + 4
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << px << "\" y=\"" << y0 + 18
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(xv)
        << "</text>\n";
    out << "<line x1=\"" << x0 - 4 << "\" y1=\"" << py << "\" x2=\"" << x0 << "\" y2=\"" << py
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << x0 - 8 << "\" y=\"" << py + 4
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(yv)
        << "</text>\n";
  }
  out << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">"
      << escape(x_label) << "</text>\n";
  out << "<text x=\"18\" y=\"" << (y0 + y1) / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
         "transform=\"rotate(-90 18 "
      << (y0 + y1) / 2 << ")\">" << escape(y_label) << "</text>\n";
}

}  // namespace

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series,
                       const std::string& embedded_csv) {
  Range xr{0.0, 1.0}, yr{0.0, 1.0};
  bool any = false;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (!any) {
        xr = {s.xs[i], s.xs[i]};
        yr = {s.ys[i], s.ys[i]};
        any = true;
      }
      xr.lo = std::min(xr.lo, s.xs[i]);
      xr.hi = std::max(xr.hi, s.xs[i]);
      yr.lo = std::min(yr.lo, s.ys[i]);
      yr.hi = std::max(yr.hi, s.ys[i]);
    }
  }
  if (yr.hi == yr.lo) yr.hi = yr.lo + 1.0;
  if (xr.hi == xr.lo) xr.hi = xr.lo + 1.0;

  std::ostringstream out;
  open_svg(out, title, embedded_csv);
  draw_axes(out, xr, yr, x_label, y_label);
  const double x0 = kLeft, x1 = kWidth - kRight;
  const double y0 = kHeight - kBottom, y1 = kTop;
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % std::size(kPalette)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      out << fmt(xr.map(s.xs[i], x0, x1)) << ',' << fmt(yr.map(s.ys[i], y0, y1)) << ' ';
    }
    out << "\"/>\n";
    out << "<text x=\"" << x1 - 8 << "\" y=\"" << kTop + 16 + 16 * static_cast<double>(si)
        << "\" text-anchor=\"end\" font-size=\"12\" font-family=\"sans-serif\" fill=\"" << color
        << "\">" << escape(s.label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string bar_chart(const std::string& title, const std::string& x_label,
                      const std::string& y_label, const std::vector<double>& bin_edges,
                      const std::vector<std::size_t>& counts, const std::string& embedded_csv) {
  if (bin_edges.size() != counts.size() + 1) throw InvalidInput("bar_chart: edges != counts + 1");
  Range xr{bin_edges.front(), bin_edges.back()};
  if (xr.hi == xr.lo) xr.hi = xr.lo + 1.0;
  std::size_t peak = 1;
  for (auto c : counts) peak = std::max(peak, c);
  Range yr{0.0, static_cast<double>(peak)};

  std::ostringstream out;
  open_svg(out, title, embedded_csv);
  draw_axes(out, xr, yr, x_label, y_label);
  const double x0 = kLeft, x1 = kWidth - kRight;
  const double y0 = kHeight - kBottom, y1 = kTop;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double left = xr.map(bin_edges[i], x0, x1);
    const double right = xr.map(bin_edges[i + 1], x0, x1);
    const double top = yr.map(static_cast<double>(counts[i]), y0, y1);
    out << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\""
        << fmt(std::max(right - left - 1.0, 0.5)) << "\" height=\"" << fmt(y0 - top)
        << "\" fill=\"#1f77b4\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace ues::svg
