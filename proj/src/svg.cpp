#include "gahcda/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gahcda/core.hpp"

namespace gahcda::svg {
namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377", "#bbbbbb"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Axis {
  double lo, hi;
  double map(double v, double pix_lo, double pix_hi) const {
    return hi == lo ? pix_lo : pix_lo + (v - lo) / (hi - lo) * (pix_hi - pix_lo);
  }
};

Axis nice_axis(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) return {0.0, 1.0};
  if (hi <= lo) {
    hi = lo + 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

void header(std::ostringstream& o, const std::string& title) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
    << "</text>\n";
}

void y_axis(std::ostringstream& o, const Axis& axis, const std::string& label) {
  const double y0 = kHeight - kBottom, y1 = kTop;
  o << "<line x1=\"" << kLeft << "\" y1=\"" << y0 << "\" x2=\"" << kLeft << "\" y2=\"" << y1
    << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double v = axis.lo + (axis.hi - axis.lo) * t / 5.0;
    const double y = axis.map(v, y0, y1);
    o << "<line x1=\"" << kLeft - 4 << "\" y1=\"" << y << "\" x2=\"" << kLeft << "\" y2=\"" << y
      << "\" stroke=\"black\"/><text x=\"" << kLeft - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">"
      << std::setprecision(4) << v << "</text>\n";
  }
  o << "<text transform=\"translate(16," << (y0 + y1) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(label) << "</text>\n";
}

}  // namespace

std::string bar_chart(const std::string& title, const std::string& y_label, const std::vector<Bar>& bars) {
  std::ostringstream o;
  header(o, title);
  double lo = 0.0, hi = 1.0;
  for (const auto& b : bars) {
    lo = std::min(lo, b.value - b.error);
    hi = std::max(hi, b.value + b.error);
  }
  const Axis axis = nice_axis(lo, hi);
  y_axis(o, axis, y_label);
  const double plot_w = kWidth - kLeft - kRight;
  const double slot = bars.empty() ? plot_w : plot_w / bars.size();
  const double base = axis.map(0.0, kHeight - kBottom, kTop);
  o << "<line x1=\"" << kLeft << "\" y1=\"" << base << "\" x2=\"" << kWidth - kRight << "\" y2=\"" << base
    << "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const auto& b = bars[i];
    const double x = kLeft + slot * i + slot * 0.15;
    const double w = slot * 0.7;
    const double top = axis.map(b.value, kHeight - kBottom, kTop);
    o << "<rect x=\"" << x << "\" y=\"" << std::min(top, base) << "\" width=\"" << w << "\" height=\""
      << std::abs(base - top) << "\" fill=\"" << kPalette[i % 7] << "\"/>\n";
    const double cx = x + w / 2;
    const double e_hi = axis.map(b.value + b.error, kHeight - kBottom, kTop);
    const double e_lo = axis.map(b.value - b.error, kHeight - kBottom, kTop);
    o << "<line x1=\"" << cx << "\" y1=\"" << e_lo << "\" x2=\"" << cx << "\" y2=\"" << e_hi
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << cx - 6 << "\" y1=\"" << e_hi << "\" x2=\"" << cx + 6 << "\" y2=\"" << e_hi
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << cx - 6 << "\" y1=\"" << e_lo << "\" x2=\"" << cx + 6 << "\" y2=\"" << e_lo
      << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << cx << "\" y=\"" << kHeight - kBottom + 18 << "\" text-anchor=\"middle\">"
      << escape(b.label) << "</text>\n";
    o << "<text x=\"" << cx << "\" y=\"" << e_hi - 6 << "\" text-anchor=\"middle\" font-size=\"10\">"
      << std::fixed << std::setprecision(2) << b.value << std::defaultfloat << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series) {
  std::ostringstream o;
  header(o, title);
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (const auto& s : series) {
    for (double v : s.x) xlo = std::min(xlo, v), xhi = std::max(xhi, v);
    for (double v : s.y) {
      if (std::isfinite(v)) ylo = std::min(ylo, v), yhi = std::max(yhi, v);
    }
  }
  const Axis xa = nice_axis(xlo, xhi);
  const Axis ya = nice_axis(ylo, yhi);
  y_axis(o, ya, y_label);
  const double y0 = kHeight - kBottom;
  o << "<line x1=\"" << kLeft << "\" y1=\"" << y0 << "\" x2=\"" << kWidth - kRight << "\" y2=\"" << y0
    << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double v = xa.lo + (xa.hi - xa.lo) * t / 5.0;
    const double x = xa.map(v, kLeft, kWidth - kRight);
    o << "<text x=\"" << x << "\" y=\"" << y0 + 16 << "\" text-anchor=\"middle\">" << std::setprecision(4) << v
      << "</text>\n";
  }
  o << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 20
    << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % 7];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      o << xa.map(s.x[i], kLeft, kWidth - kRight) << ',' << ya.map(s.y[i], y0, kTop) << ' ';
    }
    o << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      o << "<circle cx=\"" << xa.map(s.x[i], kLeft, kWidth - kRight) << "\" cy=\"" << ya.map(s.y[i], y0, kTop)
        << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    o << "<text x=\"" << kWidth - kRight - 150 << "\" y=\"" << kTop + 16 * (si + 1) << "\" fill=\"" << color
      << "\">" << escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

}  // namespace gahcda::svg
