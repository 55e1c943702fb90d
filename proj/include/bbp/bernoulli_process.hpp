#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "bbp/beta_process.hpp"
#include "bbp/random.hpp"

namespace bbp {

// Binary feature assignments: rows are data points, columns are the retained
// atoms in generation order. Unrepresented columns are never stored.
struct FeatureMatrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<std::uint8_t> entries;  // row-major, rows * cols
  std::vector<std::int64_t> column_counts;

  std::uint8_t at(std::int64_t r, std::int64_t c) const {
    return entries[static_cast<std::size_t>(r * cols + c)];
  }
  void set(std::int64_t r, std::int64_t c, std::uint8_t v) {
    entries[static_cast<std::size_t>(r * cols + c)] = v;
  }
};

struct CountStats {
  // cumulative_features[n-1] = distinct features seen in the first n rows.
  std::vector<std::int64_t> cumulative_features;
  // multiplicity -> number of columns represented exactly that many times.
  std::map<std::int64_t, std::int64_t> multiplicity_hist;
  std::vector<std::int64_t> row_counts;  // features per row
};

// One independent Bernoulli(weight) flip per atom of the draw.
std::vector<std::uint8_t> bernoulli_draw(const BetaProcessDraw& draw,
                                         RandomStream& stream);

// One underlying process draw followed by n_rows Bernoulli rows; columns with
// no successes are dropped, the rest keep generation order.
FeatureMatrix draw_feature_matrix(const BpParams& params, std::int64_t n_rows,
                                  std::int64_t rounds, RandomStream& stream);

CountStats count_stats(const FeatureMatrix& z);

}  // namespace bbp
