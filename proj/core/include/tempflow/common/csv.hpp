#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace tempflow {

// Locale-independent shortest-round-trip-safe formatting (17 significant digits).
std::string format_double(double value);
// Shortest text that parses back to the same double.
std::string format_shortest(double value);

// Minimal CSV writer: header row, comma separator, '.' decimal point.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header);

  void row(std::initializer_list<double> values);
  void row(const std::vector<double>& values);
  // First column integral (an index), rest doubles.
  void row(long long index, const std::vector<double>& values);

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  void check_width(std::size_t n) const;

  std::filesystem::path path_;
  std::size_t width_;
  std::ofstream out_;
};

}  // namespace tempflow
