#pragma once

// CSV emit and parse. Every emitted file starts with a comment line carrying
// the tool version and the seed, then a header row. Cells print with "%.17g"
// so parsing an emitted file recovers every double bit for bit, which is what
// makes byte-identical replay feasible.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bbp/bernoulli_process.hpp"
#include "bbp/beta_process.hpp"
#include "bbp/power_law.hpp"

namespace bbp {

std::string csv_banner(std::uint64_t seed);

// Columns of equal length under the given names.
void write_table_csv(std::ostream& os, std::uint64_t seed,
                     std::span<const std::string> names,
                     std::span<const std::vector<double>> columns);

void write_draw_csv(std::ostream& os, const BetaProcessDraw& draw,
                    std::uint64_t seed);
void write_matrix_csv(std::ostream& os, const FeatureMatrix& z,
                      std::uint64_t seed);
void write_count_stats_csv(std::ostream& os, const CountStats& stats,
                           std::uint64_t seed);

// Curve table: abscissa and exact value, plus an asymptotic column when one
// is supplied (empty span omits it; any other length mismatch is an error).
void write_curve_csv(std::ostream& os, const MeanCurve& curve,
                     std::span<const double> asymptotic, std::uint64_t seed);
void write_fit_csv(std::ostream& os, const AsymptoticLaw& law,
                   std::uint64_t seed);

// Parsed numeric CSV: comments dropped, one header row, rectangular finite
// rows. Violations raise parse_error with the 1-based line and column.
struct CsvTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;

  // Index of the named column, -1 when absent.
  std::int64_t column(const std::string& name) const;
};

CsvTable parse_csv(std::istream& is);
CsvTable read_csv_file(const std::string& path);

}  // namespace bbp
