#include "faultguard/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "faultguard/errors.hpp"

namespace fg {

namespace {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

bool needs_quoting(const std::string& s) {
  return s.find_first_of(",\"\r\n") != std::string::npos;
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

int order_of(const CsvValue& v) { return static_cast<int>(v.index()); }

bool value_less(const CsvValue& a, const CsvValue& b) {
  if (order_of(a) != order_of(b)) return order_of(a) < order_of(b);
  return a < b;
}

}  // namespace

std::string csv_format(const CsvValue& v) {
  if (std::holds_alternative<int64_t>(v)) return std::to_string(std::get<int64_t>(v));
  if (std::holds_alternative<double>(v)) return format_double(std::get<double>(v));
  const std::string& s = std::get<std::string>(v);
  return needs_quoting(s) ? quoted(s) : s;
}

void emit_table(std::vector<CsvRow> rows, const TableSchema& schema, const std::string& path) {
  for (const auto& row : rows) {
    if (row.size() != schema.columns.size())
      throw SerializationError("row width " + std::to_string(row.size()) +
                               " does not match schema width " +
                               std::to_string(schema.columns.size()) + " for " + path);
  }
  std::stable_sort(rows.begin(), rows.end(), [&](const CsvRow& a, const CsvRow& b) {
    for (size_t k : schema.key) {
      if (value_less(a[k], b[k])) return true;
      if (value_less(b[k], a[k])) return false;
    }
    return false;
  });

  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw SerializationError("cannot write table: " + path);
  for (size_t i = 0; i < schema.columns.size(); ++i) {
    if (i) f << ",";
    f << schema.columns[i];
  }
  f << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) f << ",";
      f << csv_format(row[i]);
    }
    f << "\n";
  }
}

std::vector<std::vector<std::string>> read_table(const std::string& path,
                                                 std::vector<std::string>* header) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open table: " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::string cell;
    bool in_quotes = false;
    for (size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            cell += '"';
            ++i;
          } else {
            in_quotes = false;
          }
        } else {
          cell += c;
        }
      } else if (c == '"') {
        in_quotes = true;
      } else if (c == ',') {
        cells.push_back(std::move(cell));
        cell.clear();
      } else {
        cell += c;
      }
    }
    cells.push_back(std::move(cell));
    if (first) {
      if (header) *header = std::move(cells);
    } else {
      rows.push_back(std::move(cells));
    }
    first = false;
  }
  return rows;
}

}  // namespace fg
