#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bbp/bernoulli_process.hpp"
#include "bbp/csv.hpp"
#include "bbp/errors.hpp"
#include "bbp/random.hpp"

using bbp::CsvTable;
using bbp::FeatureMatrix;

namespace {

FeatureMatrix from_rows(const std::vector<std::vector<int>>& rows) {
  FeatureMatrix z;
  z.rows = static_cast<std::int64_t>(rows.size());
  z.cols = static_cast<std::int64_t>(rows[0].size());
  z.entries.assign(static_cast<std::size_t>(z.rows * z.cols), 0);
  z.column_counts.assign(static_cast<std::size_t>(z.cols), 0);
  for (std::int64_t r = 0; r < z.rows; ++r)
    for (std::int64_t c = 0; c < z.cols; ++c) {
      z.set(r, c, static_cast<std::uint8_t>(rows[r][c]));
      z.column_counts[static_cast<std::size_t>(c)] += rows[r][c];
    }
  return z;
}

CsvTable parse_string(const std::string& text) {
  std::istringstream in(text);
  return bbp::parse_csv(in);
}

// Columns from a row-major table, for feeding rows back into the writer.
std::vector<std::vector<double>> transpose(const CsvTable& t) {
  std::vector<std::vector<double>> cols(t.names.size());
  for (const auto& row : t.rows)
    for (std::size_t c = 0; c < row.size(); ++c) cols[c].push_back(row[c]);
  return cols;
}

}  // namespace

TEST_CASE("banner carries version and seed") {
  CHECK(bbp::csv_banner(42) == "# bbp 0.1.0 seed=42");
  CHECK(bbp::csv_banner(0) == "# bbp 0.1.0 seed=0");
}

TEST_CASE("table writer emits exact bytes") {
  std::ostringstream out;
  const std::vector<std::string> names{"x", "y"};
  const std::vector<std::vector<double>> cols{{1.0, 2.0}, {0.5, 1.0 / 3.0}};
  bbp::write_table_csv(out, 7, names, cols);
  CHECK(out.str() ==
        "# bbp 0.1.0 seed=7\n"
        "x,y\n"
        "1,0.5\n"
        "2,0.33333333333333331\n");
}

TEST_CASE("table writer validates shape") {
  std::ostringstream out;
  const std::vector<std::string> names{"x", "y"};
  const std::vector<std::vector<double>> ragged{{1.0, 2.0}, {0.5}};
  CHECK_THROWS_AS(bbp::write_table_csv(out, 0, names, ragged),
                  std::domain_error);
  const std::vector<std::vector<double>> one{{1.0}};
  CHECK_THROWS_AS(bbp::write_table_csv(out, 0, names, one), std::domain_error);
  CHECK_THROWS_AS(bbp::write_table_csv(out, 0, {}, {}), std::domain_error);
}

TEST_CASE("doubles survive a write-parse round trip bit for bit") {
  const std::vector<double> values{0.1,
                                   -17.25,
                                   M_PI,
                                   1e300,
                                   1e-300,
                                   std::numeric_limits<double>::denorm_min(),
                                   1.0 - 0x1.0p-53,
                                   123456789.123456789};
  std::ostringstream out;
  const std::vector<std::string> names{"v"};
  bbp::write_table_csv(out, 1, names, std::vector<std::vector<double>>{values});
  const CsvTable table = parse_string(out.str());
  REQUIRE(table.rows.size() == values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    CHECK(table.rows[i][0] == values[i]);
}

TEST_CASE("parser handles comments, blank lines, and CRLF") {
  const CsvTable t = parse_string(
      "# banner\r\n"
      "x,y\r\n"
      "\r\n"
      "# mid comment\n"
      "1,2\r\n"
      "3,4\n");
  CHECK(t.names == std::vector<std::string>{"x", "y"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[1][1] == 4.0);
  CHECK(t.column("y") == 1);
  CHECK(t.column("z") == -1);
}

TEST_CASE("header-only input parses to an empty table") {
  const CsvTable t = parse_string("# c\nx,y\n");
  CHECK(t.names.size() == 2);
  CHECK(t.rows.empty());
}

TEST_CASE("parser reports the offending position") {
  CHECK_THROWS_AS((void)parse_string(""), bbp::parse_error);
  CHECK_THROWS_AS((void)parse_string("# only comments\n"), bbp::parse_error);

  try {
    (void)parse_string("x,y\n1,2\n3\n");
    FAIL("expected ragged-row error");
  } catch (const bbp::parse_error& e) {
    CHECK(e.row == 3);
  }

  try {
    (void)parse_string("# c\nx,y\n1,foo\n");
    FAIL("expected bad-cell error");
  } catch (const bbp::parse_error& e) {
    CHECK(e.row == 3);
    CHECK(e.col == 2);
  }

  CHECK_THROWS_AS((void)parse_string("x\ninf\n"), bbp::parse_error);
  CHECK_THROWS_AS((void)parse_string("x,y\n1,\n"), bbp::parse_error);
}

TEST_CASE("draw serialization") {
  bbp::BetaProcessDraw draw;
  draw.weights = {0.5, 0.125};
  draw.rounds = {1, 2};
  draw.atom_labels = {0.25, 0.75};
  draw.truncation_rounds = 2;
  std::ostringstream out;
  bbp::write_draw_csv(out, draw, 9);
  CHECK(out.str() ==
        "# bbp 0.1.0 seed=9\n"
        "round,weight,atom_label\n"
        "1,0.5,0.25\n"
        "2,0.125,0.75\n");
}

TEST_CASE("matrix serialization and reparse") {
  const FeatureMatrix z = from_rows({{1, 0}, {1, 1}});
  std::ostringstream out;
  bbp::write_matrix_csv(out, z, 3);
  CHECK(out.str() ==
        "# bbp 0.1.0 seed=3\n"
        "f0,f1\n"
        "1,0\n"
        "1,1\n");
  const CsvTable t = parse_string(out.str());
  CHECK(t.names == std::vector<std::string>{"f0", "f1"});
  CHECK(t.rows[0][0] == 1.0);
  CHECK(t.rows[0][1] == 0.0);
}

TEST_CASE("count statistics serialization") {
  const auto stats = bbp::count_stats(from_rows({{1, 1}, {0, 1}}));
  std::ostringstream out;
  bbp::write_count_stats_csv(out, stats, 5);
  CHECK(out.str() ==
        "# bbp 0.1.0 seed=5\n"
        "section,index,value\n"
        "prefix,1,2\n"
        "prefix,2,2\n"
        "histogram,1,1\n"
        "histogram,2,1\n"
        "row_count,1,2\n"
        "row_count,2,1\n");
}

TEST_CASE("curve and fit serialization") {
  bbp::MeanCurve curve;
  curve.kind = bbp::CurveKind::total_by_rows;
  curve.multiplicity = 0;
  curve.abscissae = {10.0, 100.0};
  curve.values = {1.5, 2.5};
  std::ostringstream out;
  const std::vector<double> asym{1.0, 2.0};
  bbp::write_curve_csv(out, curve, asym, 2);
  CHECK(out.str() ==
        "# bbp 0.1.0 seed=2\n"
        "x,exact,asymptotic\n"
        "10,1.5,1\n"
        "100,2.5,2\n");

  std::ostringstream bare;
  bbp::write_curve_csv(bare, curve, {}, 2);
  CHECK(bare.str() ==
        "# bbp 0.1.0 seed=2\n"
        "x,exact\n"
        "10,1.5\n"
        "100,2.5\n");

  std::ostringstream sink;
  const std::vector<double> wrong{1.0};
  CHECK_THROWS_AS(bbp::write_curve_csv(sink, curve, wrong, 2),
                  std::domain_error);

  std::ostringstream fit;
  bbp::write_fit_csv(fit, {2.0, 0.6, 0.0}, 1);
  CHECK(fit.str() ==
        "# bbp 0.1.0 seed=1\n"
        "constant,exponent,residual_rms\n"
        "2,0.59999999999999998,0\n");
}

TEST_CASE("file reads fail loudly and succeed quietly") {
  CHECK_THROWS_AS((void)bbp::read_csv_file("/nonexistent/path.csv"),
                  bbp::io_error);

  const std::string path = "/tmp/bbp_test_csv_roundtrip.csv";
  {
    std::ofstream out(path);
    const std::vector<std::string> names{"a"};
    bbp::write_table_csv(out, 11, names,
                         std::vector<std::vector<double>>{{3.5, 4.5}});
  }
  const CsvTable t = bbp::read_csv_file(path);
  CHECK(t.names == std::vector<std::string>{"a"});
  CHECK(t.rows[1][0] == 4.5);
  std::remove(path.c_str());
}

TEST_CASE("rewrite of a parsed table is byte-identical") {
  bbp::RandomStream rs(1234);
  std::vector<std::vector<double>> cols(3);
  for (auto& col : cols)
    for (int i = 0; i < 50; ++i) col.push_back(rs.next_uniform());
  const std::vector<std::string> names{"a", "b", "c"};
  std::ostringstream first;
  bbp::write_table_csv(first, 77, names, cols);

  const CsvTable parsed = parse_string(first.str());
  std::ostringstream second;
  bbp::write_table_csv(second, 77, parsed.names, transpose(parsed));
  CHECK(first.str() == second.str());
}
