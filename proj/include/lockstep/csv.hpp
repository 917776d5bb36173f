#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lockstep {

/// Shortest decimal form with 17 significant digits ("%.17g" semantics) so
/// the value round-trips exactly through parsing.
std::string format_double(double v);

/// Parses a full-precision decimal written by format_double. Throws
/// std::invalid_argument on malformed text.
double parse_double(std::string_view s);

/// Comma-separated table with a header row. No quoting support; none of our
/// files need it.
class CsvTable {
 public:
  static CsvTable read(const std::filesystem::path& path);
  static CsvTable parse(std::string_view text);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }
  bool has_column(std::string_view name) const;

  /// Throws std::out_of_range naming the column when it does not exist.
  std::size_t column_index(std::string_view name) const;
  const std::string& cell(std::size_t row, std::size_t col) const { return rows_[row][col]; }
  std::vector<double> numeric_column(std::string_view name) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace lockstep
