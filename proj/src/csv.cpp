#include "bbp/csv.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "bbp/errors.hpp"
#include "bbp/version.hpp"

namespace bbp {

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_cell(const std::string& cell, std::int64_t row, std::int64_t col) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = first + cell.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last)
    throw parse_error("cell is not a number", row, col);
  if (!std::isfinite(value))
    throw parse_error("cell is not finite", row, col);
  return value;
}

}  // namespace

std::string csv_banner(std::uint64_t seed) {
  return std::string("# bbp ") + kVersion + " seed=" + std::to_string(seed);
}

void write_table_csv(std::ostream& os, std::uint64_t seed,
                     std::span<const std::string> names,
                     std::span<const std::vector<double>> columns) {
  if (names.size() != columns.size())
    throw std::domain_error("one name per column required");
  if (names.empty()) throw std::domain_error("table needs at least one column");
  const std::size_t n = columns[0].size();
  for (const auto& col : columns)
    if (col.size() != n) throw std::domain_error("columns differ in length");

  os << csv_banner(seed) << '\n';
  for (std::size_t c = 0; c < names.size(); ++c)
    os << (c ? "," : "") << names[c];
  os << '\n';
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c)
      os << (c ? "," : "") << fmt(columns[c][r]);
    os << '\n';
  }
}

void write_draw_csv(std::ostream& os, const BetaProcessDraw& draw,
                    std::uint64_t seed) {
  os << csv_banner(seed) << '\n' << "round,weight,atom_label\n";
  for (std::size_t i = 0; i < draw.weights.size(); ++i)
    os << draw.rounds[i] << ',' << fmt(draw.weights[i]) << ','
       << fmt(draw.atom_labels[i]) << '\n';
}

void write_matrix_csv(std::ostream& os, const FeatureMatrix& z,
                      std::uint64_t seed) {
  os << csv_banner(seed) << '\n';
  for (std::int64_t c = 0; c < z.cols; ++c) os << (c ? "," : "") << 'f' << c;
  os << '\n';
  for (std::int64_t r = 0; r < z.rows; ++r) {
    for (std::int64_t c = 0; c < z.cols; ++c)
      os << (c ? "," : "") << static_cast<int>(z.at(r, c));
    os << '\n';
  }
}

void write_count_stats_csv(std::ostream& os, const CountStats& stats,
                           std::uint64_t seed) {
  os << csv_banner(seed) << '\n' << "section,index,value\n";
  for (std::size_t n = 0; n < stats.cumulative_features.size(); ++n)
    os << "prefix," << n + 1 << ',' << stats.cumulative_features[n] << '\n';
  for (const auto& [mult, count] : stats.multiplicity_hist)
    os << "histogram," << mult << ',' << count << '\n';
  for (std::size_t r = 0; r < stats.row_counts.size(); ++r)
    os << "row_count," << r + 1 << ',' << stats.row_counts[r] << '\n';
}

void write_curve_csv(std::ostream& os, const MeanCurve& curve,
                     std::span<const double> asymptotic, std::uint64_t seed) {
  std::vector<std::string> names{"x", "exact"};
  std::vector<std::vector<double>> cols{curve.abscissae, curve.values};
  if (!asymptotic.empty()) {
    if (asymptotic.size() != curve.abscissae.size())
      throw std::domain_error("asymptotic column length mismatch");
    names.emplace_back("asymptotic");
    cols.emplace_back(asymptotic.begin(), asymptotic.end());
  }
  write_table_csv(os, seed, names, cols);
}

void write_fit_csv(std::ostream& os, const AsymptoticLaw& law,
                   std::uint64_t seed) {
  const std::vector<std::string> names{"constant", "exponent", "residual_rms"};
  const std::vector<std::vector<double>> cols{
      {law.constant}, {law.exponent}, {law.residual_rms}};
  write_table_csv(os, seed, names, cols);
}

std::int64_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<std::int64_t>(i);
  return -1;
}

CsvTable parse_csv(std::istream& is) {
  CsvTable table;
  std::string line;
  std::int64_t lineno = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cells = split_cells(line);
    if (!have_header) {
      table.names = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != table.names.size())
      throw parse_error("row width differs from header", lineno,
                        static_cast<std::int64_t>(cells.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c)
      row.push_back(parse_cell(cells[c], lineno,
                               static_cast<std::int64_t>(c) + 1));
    table.rows.push_back(std::move(row));
  }
  if (!have_header) throw parse_error("missing header row", lineno + 1, 1);
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);
  return parse_csv(in);
}

}  // namespace bbp
