#include "lgv/report.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lgv/error.hpp"

namespace lgv {

void Table::add_row(std::vector<double> row) {
  require(row.size() == columns.size(), "table '" + name + "': row width does not match the header");
  rows.push_back(std::move(row));
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string sanitize(const std::string& tag) {
  std::string s = tag;
  for (char& c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                    c == '_' || c == '=' || c == '-';
    if (!ok) c = '_';
  }
  return s;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoFailure, "cannot open '" + path + "' for writing");
  return out;
}

void close_out(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) fail(ErrorCode::IoFailure, "write to '" + path + "' failed");
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

void write_csv(const Table& t, const std::string& path) {
  auto out = open_out(path);
  for (std::size_t c = 0; c < t.columns.size(); ++c) out << (c ? "," : "") << t.columns[c];
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_number(row[c]);
    out << '\n';
  }
  close_out(out, path);
}

Table read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open '" + path + "'");
  Table t;
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::IoFailure, "'" + path + "' has no header");
  t.columns = split(line, ',');
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& cell : split(line, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || *end != '\0')
        fail(ErrorCode::IoFailure, path + ":" + std::to_string(lineno) + ": '" + cell + "' is not a number");
      row.push_back(v);
    }
    if (row.size() != t.columns.size())
      fail(ErrorCode::IoFailure, path + ":" + std::to_string(lineno) + ": row width does not match the header");
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_plot_data(const Table& t, const std::string& path) {
  require(t.plot_x >= 0 && t.plot_y >= 0, "table '" + t.name + "' has no plot columns");
  auto out = open_out(path);
  out << "# " << t.columns[t.plot_x] << ' ' << t.columns[t.plot_y];
  if (t.plot_err >= 0) out << ' ' << t.columns[t.plot_err];
  out << '\n';
  for (const auto& row : t.rows) {
    out << format_number(row[t.plot_x]) << ' ' << format_number(row[t.plot_y]);
    if (t.plot_err >= 0) out << ' ' << format_number(row[t.plot_err]);
    out << '\n';
  }
  close_out(out, path);
}

}  // namespace lgv
