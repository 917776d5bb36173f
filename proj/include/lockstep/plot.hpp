#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "lockstep/csv.hpp"

namespace lockstep {

enum class PanelKind { scatter, line };

/// One chart: `x` against each column in `y`. Scatter panels draw one circle
/// per finite point; line panels draw one polyline per y column.
struct Panel {
  std::string title;
  PanelKind kind = PanelKind::scatter;
  std::string x;
  std::vector<std::string> y;
  bool y_equals_x = false;  // shared axis range plus a red y = x reference line
};

/// Panels laid out row-major on a grid with `columns` columns.
struct Figure {
  std::string title;
  std::size_t columns = 1;
  std::vector<Panel> panels;
};

/// Deterministic SVG text. Throws std::out_of_range naming a missing column
/// (unless the table has no header at all, which renders empty axes).
std::string render_svg(const CsvTable& table, const Figure& figure);

void plot(const std::filesystem::path& csv_path, const Figure& figure,
          const std::filesystem::path& svg_path);

}  // namespace lockstep
