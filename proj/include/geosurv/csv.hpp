#pragma once

#include <string>
#include <vector>

namespace geosurv {

// Minimal CSV support: comma-delimited, UTF-8, one header row. Fields may be
// double-quoted; embedded quotes are doubled per RFC 4180.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // -1 when absent
  int column_index(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);

std::string csv_escape(const std::string& field);

// Shortest representation that round-trips a double exactly.
std::string format_double(double v);

}  // namespace geosurv
