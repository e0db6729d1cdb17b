#include <doctest.h>

#include <fstream>
#include <sstream>

#include "faultguard/csv.hpp"
#include "faultguard/errors.hpp"
#include "test_util.hpp"

using namespace fg;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("empty row set writes a header-only file") {
  fgtest::TempDir dir("csv_empty");
  emit_table({}, {{"a", "b"}, {0}}, dir.file("t.csv"));
  CHECK(slurp(dir.file("t.csv")) == "a,b\n");
}

TEST_CASE("identical rows produce byte-identical files regardless of order") {
  fgtest::TempDir dir("csv_det");
  const TableSchema schema{{"k", "v"}, {0}};
  std::vector<CsvRow> rows_a{{int64_t{2}, 0.5}, {int64_t{1}, 1.5}, {int64_t{3}, -2.0}};
  std::vector<CsvRow> rows_b{{int64_t{3}, -2.0}, {int64_t{1}, 1.5}, {int64_t{2}, 0.5}};
  emit_table(rows_a, schema, dir.file("a.csv"));
  emit_table(rows_b, schema, dir.file("b.csv"));
  CHECK(slurp(dir.file("a.csv")) == slurp(dir.file("b.csv")));
  CHECK(slurp(dir.file("a.csv")) == "k,v\n1,1.5\n2,0.5\n3,-2\n");
}

TEST_CASE("strings with commas and quotes are RFC-4180 quoted") {
  fgtest::TempDir dir("csv_quote");
  emit_table({{std::string("a,b"), std::string("say \"hi\"")}}, {{"x", "y"}, {}},
             dir.file("q.csv"));
  CHECK(slurp(dir.file("q.csv")) == "x,y\n\"a,b\",\"say \"\"hi\"\"\"\n");

  std::vector<std::string> header;
  const auto rows = read_table(dir.file("q.csv"), &header);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0][0] == "a,b");
  CHECK(rows[0][1] == "say \"hi\"");
}

TEST_CASE("rows that violate the schema width are rejected") {
  fgtest::TempDir dir("csv_schema");
  CHECK_THROWS_AS(emit_table({{int64_t{1}}}, {{"a", "b"}, {}}, dir.file("bad.csv")),
                  SerializationError);
}

TEST_CASE("doubles use shortest round-trip formatting") {
  CHECK(csv_format(0.1) == "0.1");
  CHECK(csv_format(1.0) == "1");
  CHECK(csv_format(1e300) == "1e+300");
  CHECK(csv_format(int64_t{-7}) == "-7");
}
