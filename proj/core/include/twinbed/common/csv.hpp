#pragma once

#include <filesystem>
#include <stdexcept>
#include <string_view>
#include <string>
#include <vector>

namespace twinbed {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Minimal comma-separated table: no quoting, first row is the header.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  // 1-based source line of each row, for error messages.
  std::vector<std::size_t> line_numbers;

  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(std::string_view text);

}  // namespace twinbed
