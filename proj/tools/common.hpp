#pragma once

// Exceptions carry the process exit code: 1 usage, 2 numerical, 3 I/O.

#include <stdexcept>

namespace cli {

struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct numeric_failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct io_failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cli
