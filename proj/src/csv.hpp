#pragma once

#include "agpm/market_data.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace agpm::csv {

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

using Header = std::map<std::string, std::size_t, std::less<>>;

inline std::vector<std::string> split_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline Table read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFormatError("cannot open " + path.string());
  Table table;
  std::string line;
  if (!std::getline(in, line)) throw DataFormatError(path.string() + ": empty file, expected a header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  table.columns = split_line(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto row = split_line(line);
    if (row.size() != table.columns.size()) {
      throw DataFormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(table.columns.size()) + " fields, found " + std::to_string(row.size()));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline Header require_columns(const Table& table, std::initializer_list<std::string_view> names,
                              const std::string& context) {
  Header header;
  for (std::size_t i = 0; i < table.columns.size(); ++i) header.emplace(table.columns[i], i);
  for (auto name : names) {
    if (header.find(name) == header.end()) {
      throw DataFormatError(context + ": missing required column '" + std::string(name) + "'");
    }
  }
  return header;
}

inline double to_real(std::string_view cell, std::size_t line, std::string_view column) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw DataFormatError("line " + std::to_string(line) + ": column '" + std::string(column) +
                          "' is not numeric: '" + std::string(cell) + "'");
  }
  return value;
}

inline int to_int(std::string_view cell, std::size_t line, std::string_view column) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw DataFormatError("line " + std::to_string(line) + ": column '" + std::string(column) +
                          "' is not an integer: '" + std::string(cell) + "'");
  }
  return value;
}

}  // namespace agpm::csv
