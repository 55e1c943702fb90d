#include "bbp/bernoulli_process.hpp"

#include <stdexcept>

namespace bbp {

std::vector<std::uint8_t> bernoulli_draw(const BetaProcessDraw& draw,
                                         RandomStream& stream) {
  std::vector<std::uint8_t> bits(draw.size());
  for (std::size_t i = 0; i < draw.size(); ++i)
    bits[i] = static_cast<std::uint8_t>(sample_bernoulli(draw.weights[i], stream));
  return bits;
}

FeatureMatrix draw_feature_matrix(const BpParams& params, std::int64_t n_rows,
                                  std::int64_t rounds, RandomStream& stream) {
  if (n_rows < 1) throw std::domain_error("n_rows must be >= 1");
  const BetaProcessDraw draw = stick_break(params, rounds, stream);

  // Column-wise generation so empty columns can be skipped cheaply.
  std::vector<std::vector<std::uint8_t>> kept;
  std::vector<std::int64_t> counts;
  std::vector<std::uint8_t> column(static_cast<std::size_t>(n_rows));
  for (std::size_t a = 0; a < draw.size(); ++a) {
    const double w = draw.weights[a];
    std::int64_t count = 0;
    for (std::int64_t n = 0; n < n_rows; ++n) {
      column[static_cast<std::size_t>(n)] =
          static_cast<std::uint8_t>(sample_bernoulli(w, stream));
      count += column[static_cast<std::size_t>(n)];
    }
    if (count > 0) {
      kept.push_back(column);
      counts.push_back(count);
    }
  }

  FeatureMatrix z;
  z.rows = n_rows;
  z.cols = static_cast<std::int64_t>(kept.size());
  z.column_counts = std::move(counts);
  z.entries.assign(static_cast<std::size_t>(z.rows * z.cols), 0);
  for (std::int64_t c = 0; c < z.cols; ++c)
    for (std::int64_t r = 0; r < z.rows; ++r)
      z.set(r, c, kept[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)]);
  return z;
}

CountStats count_stats(const FeatureMatrix& z) {
  CountStats stats;
  stats.cumulative_features.resize(static_cast<std::size_t>(z.rows));
  stats.row_counts.resize(static_cast<std::size_t>(z.rows));
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(z.cols), 0);
  std::int64_t distinct = 0;
  for (std::int64_t r = 0; r < z.rows; ++r) {
    std::int64_t in_row = 0;
    for (std::int64_t c = 0; c < z.cols; ++c) {
      if (!z.at(r, c)) continue;
      ++in_row;
      if (!seen[static_cast<std::size_t>(c)]) {
        seen[static_cast<std::size_t>(c)] = 1;
        ++distinct;
      }
    }
    stats.row_counts[static_cast<std::size_t>(r)] = in_row;
    stats.cumulative_features[static_cast<std::size_t>(r)] = distinct;
  }
  for (std::int64_t c = 0; c < z.cols; ++c)
    ++stats.multiplicity_hist[z.column_counts[static_cast<std::size_t>(c)]];
  return stats;
}

}  // namespace bbp
