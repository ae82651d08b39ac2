#pragma once

#include <stdexcept>
#include <string>

namespace pathdrift {

/// Invalid arguments or configuration (bad grid, out-of-range parameter,
/// horizon exceeded). The CLI maps this to exit code 2.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Non-finite values, failed factorizations and similar runtime numeric
/// failures. The CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The requested method does not apply to the given model.
class UnsupportedError : public DomainError {
 public:
  using DomainError::DomainError;
};

namespace detail {

inline void require(bool condition, const std::string& what) {
  if (!condition) throw DomainError(what);
}

}  // namespace detail
}  // namespace pathdrift
