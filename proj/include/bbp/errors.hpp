#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bbp {

// Quadrature failed to converge, a factorization broke down, probabilities
// underflowed past recovery, and so on. Domain/argument problems use
// std::domain_error instead.
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input data; carries the 1-based position when known.
struct parse_error : io_error {
  parse_error(const std::string& msg, std::int64_t row, std::int64_t col)
      : io_error(msg + " (row " + std::to_string(row) + ", column " +
                 std::to_string(col) + ")"),
        row(row),
        col(col) {}
  std::int64_t row;
  std::int64_t col;
};

}  // namespace bbp
