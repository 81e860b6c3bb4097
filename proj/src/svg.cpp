#include "drivercal/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace drivercal::svg {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kMarginLeft = 60.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 50.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

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

void open_doc(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
     << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
     << kHeight << "\">\n";
  os << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2
     << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"16\">"
     << escape(title) << "</text>\n";
}

void axes(std::ostringstream& os) {
  os << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kHeight - kMarginBottom
     << "\" x2=\"" << kWidth - kMarginRight << "\" y2=\""
     << kHeight - kMarginBottom << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop << "\" x2=\""
     << kMarginLeft << "\" y2=\"" << kHeight - kMarginBottom
     << "\" stroke=\"black\"/>\n";
}

}  // namespace

std::string histogram_chart(const analysis::Histogram& hist,
                            const std::string& title,
                            const std::string& x_label,
                            const std::optional<Band>& band) {
  std::ostringstream os;
  open_doc(os, title);
  axes(os);

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;

  if (!hist.counts.empty()) {
    double x_lo = hist.edges.front();
    double x_hi = hist.edges.back();
    if (band) {
      x_lo = std::min(x_lo, band->center - band->halfwidth);
      x_hi = std::max(x_hi, band->center + band->halfwidth);
    }
    if (x_hi <= x_lo) x_hi = x_lo + 1.0;
    const std::size_t max_count =
        *std::max_element(hist.counts.begin(), hist.counts.end());

    auto sx = [&](double v) {
      return kMarginLeft + (v - x_lo) / (x_hi - x_lo) * plot_w;
    };
    auto sy = [&](double count) {
      return kHeight - kMarginBottom -
             count / static_cast<double>(std::max<std::size_t>(max_count, 1)) *
                 plot_h;
    };

    if (band) {
      const double bx0 = sx(band->center - band->halfwidth);
      const double bx1 = sx(band->center + band->halfwidth);
      os << "<rect x=\"" << num(bx0) << "\" y=\"" << kMarginTop << "\" width=\""
         << num(std::max(0.0, bx1 - bx0)) << "\" height=\"" << plot_h
         << "\" fill=\"#f4a582\" fill-opacity=\"0.35\"/>\n";
      os << "<line x1=\"" << num(sx(band->center)) << "\" y1=\"" << kMarginTop
         << "\" x2=\"" << num(sx(band->center)) << "\" y2=\""
         << kHeight - kMarginBottom
         << "\" stroke=\"#ca0020\" stroke-width=\"2\"/>\n";
    }

    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
      const double x0 = sx(hist.edges[i]);
      const double x1 = sx(hist.edges[i + 1]);
      const double y = sy(static_cast<double>(hist.counts[i]));
      os << "<rect x=\"" << num(x0) << "\" y=\"" << num(y) << "\" width=\""
         << num(std::max(0.5, x1 - x0 - 1.0)) << "\" height=\""
         << num(kHeight - kMarginBottom - y)
         << "\" fill=\"#0571b0\" fill-opacity=\"0.8\"/>\n";
    }

    // x tick labels at the extremes and the middle
    for (double v : {x_lo, 0.5 * (x_lo + x_hi), x_hi}) {
      os << "<text x=\"" << num(sx(v)) << "\" y=\""
         << kHeight - kMarginBottom + 18
         << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
            "font-size=\"11\">"
         << num(v) << "</text>\n";
    }
    os << "<text x=\"" << kMarginLeft - 8 << "\" y=\""
       << kHeight - kMarginBottom
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">0"
          "</text>\n";
    os << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << kMarginTop + 12
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
       << max_count << "</text>\n";
  } else {
    os << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight / 2
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"13\">no data</text>\n";
  }

  os << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
     << escape(x_label) << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

std::string errorbar_chart(const std::vector<std::string>& categories,
                           const std::vector<ErrorBarSeries>& series,
                           const std::string& title,
                           const std::string& y_label) {
  for (const auto& s : series)
    if (s.means.size() != categories.size() || s.ses.size() != categories.size())
      throw std::invalid_argument("errorbar_chart: series/category size mismatch");

  std::ostringstream os;
  open_doc(os, title);
  axes(os);

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  const char* colors[] = {"#ca0020", "#0571b0", "#4dac26", "#7b3294"};

  double y_hi = 0.0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.means.size(); ++i)
      y_hi = std::max(y_hi, s.means[i] + 2.0 * s.ses[i]);
  if (y_hi <= 0.0) y_hi = 1.0;
  y_hi *= 1.05;

  auto sy = [&](double v) {
    return kHeight - kMarginBottom - v / y_hi * plot_h;
  };

  const std::size_t n_cat = categories.size();
  const std::size_t n_ser = series.size();
  for (std::size_t c = 0; c < n_cat; ++c) {
    const double cell = plot_w / static_cast<double>(n_cat);
    const double x0 = kMarginLeft + cell * static_cast<double>(c);
    os << "<text x=\"" << num(x0 + cell / 2) << "\" y=\""
       << kHeight - kMarginBottom + 18
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"11\">"
       << escape(categories[c]) << "</text>\n";
    for (std::size_t s = 0; s < n_ser; ++s) {
      const double x = x0 + cell * (static_cast<double>(s) + 1.0) /
                                (static_cast<double>(n_ser) + 1.0);
      const double m = series[s].means[c];
      const double se = series[s].ses[c];
      const char* color = colors[s % 4];
      os << "<line x1=\"" << num(x) << "\" y1=\"" << num(sy(m - se))
         << "\" x2=\"" << num(x) << "\" y2=\"" << num(sy(m + se))
         << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      for (double v : {m - se, m + se})
        os << "<line x1=\"" << num(x - 4) << "\" y1=\"" << num(sy(v))
           << "\" x2=\"" << num(x + 4) << "\" y2=\"" << num(sy(v))
           << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      os << "<circle cx=\"" << num(x) << "\" cy=\"" << num(sy(m))
         << "\" r=\"4\" fill=\"" << color << "\"/>\n";
    }
  }

  // legend
  double ly = kMarginTop + 4;
  for (std::size_t s = 0; s < n_ser; ++s) {
    os << "<circle cx=\"" << kMarginLeft + 10 << "\" cy=\"" << num(ly)
       << "\" r=\"4\" fill=\"" << colors[s % 4] << "\"/>\n";
    os << "<text x=\"" << kMarginLeft + 20 << "\" y=\"" << num(ly + 4)
       << "\" font-family=\"sans-serif\" font-size=\"11\">"
       << escape(series[s].name) << "</text>\n";
    ly += 16;
  }

  // y axis labels
  os << "<text x=\"" << kMarginLeft - 8 << "\" y=\""
     << kHeight - kMarginBottom
     << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">0"
        "</text>\n";
  os << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << kMarginTop + 12
     << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
     << num(y_hi) << "</text>\n";
  os << "<text x=\"16\" y=\"" << kHeight / 2
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
        "transform=\"rotate(-90 16 "
     << kHeight / 2 << ")\">" << escape(y_label) << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace drivercal::svg
