#pragma once

#include <string>
#include <vector>

namespace lgv {

// Named numeric table. Cells are written with 17 significant digits, so a CSV read back
// compares equal to the table that produced it.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  // Plot-data columns; plot_x < 0 means no plot file.
  int plot_x = -1, plot_y = -1, plot_err = -1;

  void add_row(std::vector<double> row);
  bool operator==(const Table& o) const { return columns == o.columns && rows == o.rows; }
};

std::string format_number(double v);
// File-name safe version of a tag: every character outside [A-Za-z0-9._=-] becomes '_'.
std::string sanitize(const std::string& tag);

void write_csv(const Table& t, const std::string& path);
Table read_csv(const std::string& path);
// Whitespace-separated "x y [yerr]" lines with a '#' header.
void write_plot_data(const Table& t, const std::string& path);

}  // namespace lgv
