#include "lockstep/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace lockstep {
namespace {

constexpr double kPanelW = 360.0;
constexpr double kPanelH = 280.0;
constexpr double kMarginL = 64.0;
constexpr double kMarginR = 16.0;
constexpr double kMarginT = 32.0;
constexpr double kMarginB = 44.0;
constexpr double kTitleH = 30.0;

constexpr std::array<const char*, 6> kPalette{"#1f77b4", "#ff7f0e", "#2ca02c",
                                               "#9467bd", "#8c564b", "#17becf"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", std::fabs(v) < 1e-300 ? 0.0 : v);
  return buf;
}

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

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void include(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  void finish() {
    if (lo > hi) {
      lo = 0.0;
      hi = 1.0;
    } else if (lo == hi) {
      const double pad = lo == 0.0 ? 1.0 : std::fabs(lo) * 0.1;
      lo -= pad;
      hi += pad;
    } else {
      const double pad = (hi - lo) * 0.05;
      lo -= pad;
      hi += pad;
    }
  }
};

struct Series {
  std::string name;
  std::vector<double> y;
};

void render_panel(std::ostringstream& svg, const CsvTable& table, const Panel& panel, double ox,
                  double oy) {
  const bool headerless = table.header().empty();
  std::vector<double> xs;
  std::vector<Series> series;
  if (!headerless) {
    xs = table.numeric_column(panel.x);
    for (const auto& col : panel.y) series.push_back({col, table.numeric_column(col)});
  }

  Range rx, ry;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (const auto& s : series) {
      if (std::isfinite(xs[i]) && std::isfinite(s.y[i])) {
        rx.include(xs[i]);
        ry.include(s.y[i]);
      }
    }
  }
  if (panel.y_equals_x) {
    rx.include(ry.lo);
    rx.include(ry.hi);
    ry = rx;
  }
  rx.finish();
  ry.finish();

  const double px0 = ox + kMarginL, px1 = ox + kPanelW - kMarginR;
  const double py0 = oy + kMarginT, py1 = oy + kPanelH - kMarginB;
  auto sx = [&](double v) { return px0 + (v - rx.lo) / (rx.hi - rx.lo) * (px1 - px0); };
  auto sy = [&](double v) { return py1 - (v - ry.lo) / (ry.hi - ry.lo) * (py1 - py0); };

  svg << "<g class=\"panel\">\n";
  svg << "<text x=\"" << fmt(ox + kPanelW / 2) << "\" y=\"" << fmt(oy + 18)
      << "\" text-anchor=\"middle\" font-size=\"12\">" << escape(panel.title) << "</text>\n";
  svg << "<rect x=\"" << fmt(px0) << "\" y=\"" << fmt(py0) << "\" width=\"" << fmt(px1 - px0)
      << "\" height=\"" << fmt(py1 - py0) << "\" fill=\"none\" stroke=\"#333\"/>\n";

  for (int t = 0; t <= 4; ++t) {
    const double vx = rx.lo + (rx.hi - rx.lo) * t / 4.0;
    const double vy = ry.lo + (ry.hi - ry.lo) * t / 4.0;
    svg << "<text x=\"" << fmt(sx(vx)) << "\" y=\"" << fmt(py1 + 14)
        << "\" text-anchor=\"middle\" font-size=\"9\">" << tick_label(vx) << "</text>\n";
    svg << "<text x=\"" << fmt(px0 - 4) << "\" y=\"" << fmt(sy(vy) + 3)
        << "\" text-anchor=\"end\" font-size=\"9\">" << tick_label(vy) << "</text>\n";
  }
  svg << "<text x=\"" << fmt((px0 + px1) / 2) << "\" y=\"" << fmt(py1 + 32)
      << "\" text-anchor=\"middle\" font-size=\"10\">" << escape(panel.x) << "</text>\n";
  const std::string ylabel = panel.y.size() == 1 ? panel.y.front() : "value";
  svg << "<text x=\"" << fmt(ox + 12) << "\" y=\"" << fmt((py0 + py1) / 2)
      << "\" text-anchor=\"middle\" font-size=\"10\" transform=\"rotate(-90 " << fmt(ox + 12)
      << ' ' << fmt((py0 + py1) / 2) << ")\">" << escape(ylabel) << "</text>\n";

  if (panel.y_equals_x) {
    const double lo = std::max(rx.lo, ry.lo), hi = std::min(rx.hi, ry.hi);
    svg << "<line class=\"ref\" x1=\"" << fmt(sx(lo)) << "\" y1=\"" << fmt(sy(lo)) << "\" x2=\""
        << fmt(sx(hi)) << "\" y2=\"" << fmt(sy(hi)) << "\" stroke=\"red\" stroke-width=\"1\"/>\n";
  }

  for (std::size_t si = 0; si < series.size(); ++si) {
    const char* color = kPalette[si % kPalette.size()];
    const auto& s = series[si];
    if (panel.kind == PanelKind::scatter) {
      for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!std::isfinite(xs[i]) || !std::isfinite(s.y[i])) continue;
        svg << "<circle cx=\"" << fmt(sx(xs[i])) << "\" cy=\"" << fmt(sy(s.y[i]))
            << "\" r=\"2\" fill=\"" << color << "\" fill-opacity=\"0.6\"/>\n";
      }
    } else {
      std::string points;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!std::isfinite(xs[i]) || !std::isfinite(s.y[i])) continue;
        if (!points.empty()) points += ' ';
        points += fmt(sx(xs[i])) + "," + fmt(sy(s.y[i]));
      }
      if (!points.empty()) {
        svg << "<polyline points=\"" << points << "\" fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.5\"/>\n";
      }
    }
    if (series.size() > 1) {
      const double ly = py0 + 12 + 12 * static_cast<double>(si);
      svg << "<text x=\"" << fmt(px0 + 6) << "\" y=\"" << fmt(ly) << "\" font-size=\"9\" fill=\""
          << color << "\">" << escape(s.name) << "</text>\n";
    }
  }
  svg << "</g>\n";
}

}  // namespace

std::string render_svg(const CsvTable& table, const Figure& figure) {
  if (!table.header().empty()) {
    for (const auto& p : figure.panels) {
      table.column_index(p.x);
      for (const auto& y : p.y) table.column_index(y);
    }
  }
  const std::size_t cols = std::max<std::size_t>(1, figure.columns);
  const std::size_t rows = std::max<std::size_t>(1, (figure.panels.size() + cols - 1) / cols);
  const double width = kPanelW * static_cast<double>(cols);
  const double height = kTitleH + kPanelH * static_cast<double>(rows);

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width) << "\" height=\""
      << fmt(height) << "\" viewBox=\"0 0 " << fmt(width) << ' ' << fmt(height) << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fmt(width / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << escape(figure.title) << "</text>\n";
  for (std::size_t i = 0; i < figure.panels.size(); ++i) {
    const double ox = kPanelW * static_cast<double>(i % cols);
    const double oy = kTitleH + kPanelH * static_cast<double>(i / cols);
    render_panel(svg, table, figure.panels[i], ox, oy);
  }
  svg << "</svg>\n";
  return svg.str();
}

void plot(const std::filesystem::path& csv_path, const Figure& figure,
          const std::filesystem::path& svg_path) {
  const auto table = CsvTable::read(csv_path);
  const auto text = render_svg(table, figure);
  std::ofstream out(svg_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + svg_path.string());
  out << text;
}

}  // namespace lockstep
