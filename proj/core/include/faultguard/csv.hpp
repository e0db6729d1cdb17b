#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace fg {

using CsvValue = std::variant<int64_t, double, std::string>;
using CsvRow = std::vector<CsvValue>;

struct TableSchema {
  std::vector<std::string> columns;
  /// Indices of the key columns; rows are stably sorted by them before
  /// writing so output is deterministic regardless of production order.
  std::vector<size_t> key;
};

/// Formats one value the way emit_table would (shortest round-trip form for
/// doubles).
std::string csv_format(const CsvValue& v);

/// RFC-4180-style CSV with a header row. Rows must match the schema width
/// (SerializationError otherwise). Same rows, same bytes.
void emit_table(std::vector<CsvRow> rows, const TableSchema& schema, const std::string& path);

/// Parses a CSV written by emit_table; every cell comes back as a string.
std::vector<std::vector<std::string>> read_table(const std::string& path,
                                                 std::vector<std::string>* header = nullptr);

}  // namespace fg
