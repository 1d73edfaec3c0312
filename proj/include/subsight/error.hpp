#pragma once

#include <stdexcept>
#include <string>

namespace subsight {

// Data or contract violation: malformed files, invariant breaks, numerics
// that cannot proceed. The CLI maps these to exit code 2.
class data_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class parse_error : public data_error {
 public:
  using data_error::data_error;
};

class masked_read_error : public data_error {
 public:
  using data_error::data_error;
};

class geometry_error : public data_error {
 public:
  using data_error::data_error;
};

class connectivity_error : public data_error {
 public:
  using data_error::data_error;
};

class rank_error : public data_error {
 public:
  using data_error::data_error;
};

class extrapolation_error : public data_error {
 public:
  using data_error::data_error;
};

class divergence_error : public data_error {
 public:
  using data_error::data_error;
};

// Bad invocation or configuration. Exit code 1.
class usage_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace subsight
