#ifndef HOI_ERROR_HPP
#define HOI_ERROR_HPP

#include <stdexcept>
#include <string>

namespace hoi {

/// Base for every recoverable failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed inputs or config; maps to CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace hoi

#endif  // HOI_ERROR_HPP
