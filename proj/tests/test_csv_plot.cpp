#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "lockstep/csv.hpp"
#include "lockstep/plot.hpp"
#include "lockstep/rng.hpp"

using namespace lockstep;
namespace fs = std::filesystem;

namespace {

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
  return n;
}

Figure scatter_fig() { return Figure{"t", 1, {{"p", PanelKind::scatter, "x", {"y"}, true}}}; }

}  // namespace

TEST(FormatDouble, RoundTripsArbitraryBitPatternsProperty) {
  Rng rng(1);
  std::mt19937_64 bits(2);
  for (int i = 0; i < 20000; ++i) {
    const double v = std::bit_cast<double>(bits());
    if (!std::isfinite(v)) continue;
    EXPECT_EQ(std::bit_cast<std::uint64_t>(parse_double(format_double(v))), std::bit_cast<std::uint64_t>(v));
  }
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * 1e-3;
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
}

TEST(FormatDouble, SeventeenSignificantDigits) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(format_double(-0.27), "-0.27000000000000002");
  EXPECT_THROW(parse_double("1.5x"), std::invalid_argument);
  EXPECT_THROW(parse_double(""), std::invalid_argument);
}

TEST(CsvTable, ParsesHeaderRowsAndBlanks) {
  const auto t = CsvTable::parse("a,b\r\n1,2\n\n3,\n");
  EXPECT_EQ(t.header(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cell(1, 0), "3");
  const auto b = t.numeric_column("b");
  EXPECT_EQ(b[0], 2.0);
  EXPECT_TRUE(std::isnan(b[1]));
  EXPECT_TRUE(t.has_column("a"));
  EXPECT_FALSE(t.has_column("c"));
}

TEST(CsvTable, MissingColumnIsNamed) {
  const auto t = CsvTable::parse("a,b\n1,2\n");
  try {
    t.column_index("penalty_u");
    FAIL();
  } catch (const std::out_of_range& e) {
    EXPECT_NE(std::string(e.what()).find("penalty_u"), std::string::npos);
  }
  EXPECT_THROW(CsvTable::parse("a,b\n1\n"), std::runtime_error);
}

TEST(Plot, TwoPointsGiveExactlyTwoMarkers) {
  const auto svg = render_svg(CsvTable::parse("x,y\n1,2\n3,4\n"), scatter_fig());
  EXPECT_EQ(count(svg, "<circle"), 2u);
  EXPECT_EQ(count(svg, "class=\"ref\""), 1u);
  EXPECT_EQ(count(svg, "stroke=\"red\""), 1u);
}

TEST(Plot, EmptyCellsAreSkipped) {
  const auto svg = render_svg(CsvTable::parse("x,y\n1,2\n,4\n5,\n6,7\n"), scatter_fig());
  EXPECT_EQ(count(svg, "<circle"), 2u);
}

TEST(Plot, EmptyCsvGivesLabelledEmptyAxes) {
  for (const char* text : {"", "x,y\n"}) {
    const auto svg = render_svg(CsvTable::parse(text), scatter_fig());
    EXPECT_EQ(count(svg, "<circle"), 0u);
    EXPECT_NE(svg.find("<rect"), std::string::npos);
    EXPECT_NE(svg.find(">p</text>"), std::string::npos);
  }
}

TEST(Plot, MissingColumnThrowsNamingIt) {
  Figure f{"t", 1, {{"p", PanelKind::line, "x", {"nope"}, false}}};
  try {
    render_svg(CsvTable::parse("x,y\n1,2\n"), f);
    FAIL();
  } catch (const std::out_of_range& e) {
    EXPECT_NE(std::string(e.what()).find("nope"), std::string::npos);
  }
}

TEST(Plot, LinePanelsDrawOnePolylinePerSeries) {
  Figure f{"t", 3, {}};
  for (int i = 0; i < 9; ++i) f.panels.push_back({"p", PanelKind::line, "x", {"a", "b"}, false});
  const auto svg = render_svg(CsvTable::parse("x,a,b\n0,1,2\n1,2,3\n2,3,5\n"), f);
  EXPECT_EQ(count(svg, "<polyline"), 18u);
  EXPECT_EQ(count(svg, "<g class=\"panel\">"), 9u);
}

TEST(Plot, FileOutputIsByteIdentical) {
  const auto dir = fs::temp_directory_path() / "lockstep_test_plot";
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "in.csv");
    out << "x,y\n0.5,0.25\n-1,3\n2,2\n";
  }
  plot(dir / "in.csv", scatter_fig(), dir / "a.svg");
  plot(dir / "in.csv", scatter_fig(), dir / "b.svg");
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(slurp(dir / "a.svg"), slurp(dir / "b.svg"));
  EXPECT_EQ(count(slurp(dir / "a.svg"), "<circle"), 3u);
}
