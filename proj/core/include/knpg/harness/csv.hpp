#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace knpg::harness {

// Numeric CSV with a header row. "nan" and "inf" parse as such.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  // -1 when absent.
  int column(const std::string& name) const;
  std::vector<double> values(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::string& path);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace knpg::harness
