#ifndef CFSPLIT_ERRORS_HPP_
#define CFSPLIT_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace cfsplit {

struct InvalidPartitionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct CacheInvalidError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnsupportedGeometryError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cfsplit

#endif  // CFSPLIT_ERRORS_HPP_
