#include "branchinfer/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace branchinfer::plot {

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
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

struct Axis {
  double lo, hi;
  double map(double v, double a, double b) const {
    return a + (v - lo) / (hi - lo) * (b - a);
  }
};

Axis padded(double lo, double hi) {
  if (!(hi > lo)) {
    const double d = std::max(std::abs(lo) * 0.05, 1e-6);
    return {lo - d, hi + d};
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

void header(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
     << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\""
     << " font-size=\"15\">" << escape(title) << "</text>\n";
}

void frame(std::ostringstream& os, const Axis& x, const Axis& y, const std::string& x_label,
           const std::string& y_label, bool x_ticks) {
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  os << "<rect x=\"" << x0 << "\" y=\"" << y1 << "\" width=\"" << x1 - x0 << "\" height=\""
     << y0 - y1 << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = y.lo + (y.hi - y.lo) * i / 4.0;
    const double py = y.map(v, y0, y1);
    os << "<text x=\"" << x0 - 6 << "\" y=\"" << py + 4
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << v << "</text>\n";
    if (x_ticks) {
      const double u = x.lo + (x.hi - x.lo) * i / 4.0;
      os << "<text x=\"" << x.map(u, x0, x1) << "\" y=\"" << y0 + 16
         << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << u
         << "</text>\n";
    }
  }
  os << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 10
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << escape(x_label)
     << "</text>\n";
  os << "<text transform=\"translate(16," << (y0 + y1) / 2
     << ") rotate(-90)\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
     << escape(y_label) << "</text>\n";
}

}  // namespace

std::string band_svg(const evaluation::TrajectoryBand& band, const std::vector<double>& gt,
                     const std::string& title) {
  const auto n = band.size();
  if (n == 0 || gt.size() != n) throw std::invalid_argument("band_svg: length mismatch");
  double lo = gt[0], hi = gt[0];
  for (std::size_t i = 0; i < n; ++i) {
    lo = std::min({lo, band.lower[i], gt[i]});
    hi = std::max({hi, band.upper[i], gt[i]});
  }
  const Axis x = padded(band.times.front(), band.times.back());
  const Axis y = padded(lo, hi);
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;

  std::ostringstream os;
  os.precision(6);
  header(os, title);
  frame(os, x, y, "time [s]", "vertical deflection [m]", true);

  os << "<polygon fill=\"#1f77b4\" fill-opacity=\"0.25\" stroke=\"none\" points=\"";
  for (std::size_t i = 0; i < n; ++i) {
    os << x.map(band.times[i], x0, x1) << ',' << y.map(band.upper[i], y0, y1) << ' ';
  }
  for (std::size_t i = n; i-- > 0;) {
    os << x.map(band.times[i], x0, x1) << ',' << y.map(band.lower[i], y0, y1) << ' ';
  }
  os << "\"/>\n";

  auto polyline = [&](const std::vector<double>& v, const char* style) {
    os << "<polyline fill=\"none\" " << style << " points=\"";
    for (std::size_t i = 0; i < n; ++i) {
      os << x.map(band.times[i], x0, x1) << ',' << y.map(v[i], y0, y1) << ' ';
    }
    os << "\"/>\n";
  };
  polyline(band.median, "stroke=\"#1f77b4\" stroke-width=\"1.5\"");
  polyline(gt, "stroke=\"black\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"");

  os << "<text x=\"" << x1 - 8 << "\" y=\"" << y1 + 16
     << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
     << "shaded: 95% band, solid: median, dashed: ground truth</text>\n";
  os << "</svg>\n";
  return os.str();
}

std::string bar_chart_svg(const std::vector<std::string>& categories,
                          const std::vector<BarSeries>& series, const std::string& title,
                          const std::string& y_label) {
  if (categories.empty() || series.empty()) throw std::invalid_argument("bar chart: no data");
  double hi = 0.0;
  for (const auto& s : series) {
    if (s.values.size() != categories.size()) {
      throw std::invalid_argument("bar chart: series length differs from categories");
    }
    for (double v : s.values) {
      if (std::isfinite(v)) hi = std::max(hi, v);
    }
  }
  const Axis y{0.0, hi > 0.0 ? hi * 1.1 : 1.0};
  const Axis x{0.0, 1.0};
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;

  std::ostringstream os;
  os.precision(6);
  header(os, title);
  frame(os, x, y, "", y_label, false);

  const double group = (x1 - x0) / static_cast<double>(categories.size());
  const double bar = 0.8 * group / static_cast<double>(series.size());
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double gx = x0 + group * static_cast<double>(c) + 0.1 * group;
    for (std::size_t s = 0; s < series.size(); ++s) {
      const double v = std::isfinite(series[s].values[c]) ? series[s].values[c] : 0.0;
      const double top = y.map(v, y0, y1);
      os << "<rect x=\"" << gx + bar * static_cast<double>(s) << "\" y=\"" << top
         << "\" width=\"" << bar << "\" height=\"" << y0 - top << "\" fill=\""
         << kPalette[s % 6] << "\"/>\n";
    }
    os << "<text x=\"" << gx + 0.4 * group << "\" y=\"" << y0 + 16
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
       << escape(categories[c]) << "</text>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double ly = y1 + 14 + 16 * static_cast<double>(s);
    os << "<rect x=\"" << x1 - 150 << "\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\""
       << kPalette[s % 6] << "\"/>\n";
    os << "<text x=\"" << x1 - 135 << "\" y=\"" << ly
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(series[s].name)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace branchinfer::plot
