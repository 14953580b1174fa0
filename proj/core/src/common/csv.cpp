#include "tempflow/common/csv.hpp"

#include <charconv>
#include <cmath>

#include "tempflow/common/errors.hpp"

namespace tempflow {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  if (ec != std::errc{}) throw Error("format_double: conversion failed");
  return std::string(buf, end);
}

std::string format_shortest(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw Error("format_shortest: conversion failed");
  return std::string(buf, end);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
    : path_(path), width_(header.size()), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw IoError("cannot open " + path.string() + " for writing");
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out_ << ',';
    out_ << header[i];
  }
  out_ << '\n';
}

void CsvWriter::check_width(std::size_t n) const {
  if (n != width_) throw ContractError("csv row width does not match header");
}

void CsvWriter::row(std::initializer_list<double> values) { row(std::vector<double>(values)); }

void CsvWriter::row(const std::vector<double>& values) {
  check_width(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out_ << ',';
    out_ << format_double(values[i]);
  }
  out_ << '\n';
  if (!out_) throw IoError("write failed: " + path_.string());
}

void CsvWriter::row(long long index, const std::vector<double>& values) {
  check_width(values.size() + 1);
  out_ << index;
  for (double v : values) out_ << ',' << format_double(v);
  out_ << '\n';
  if (!out_) throw IoError("write failed: " + path_.string());
}

}  // namespace tempflow
