#pragma once

// Precision selection and the project-wide namespace.
//
// The library is compiled twice: once with UFFIA_SINGLE_PRECISION (training,
// CLI) and once without (gradient checks, oracles). Each build lives in its own
// inline namespace so both variants can be linked into the same binary.

#include <cstdint>
#include <stdexcept>
#include <string>

#if defined(UFFIA_SINGLE_PRECISION)
#define UFFIA_PRECISION_NS f32
#else
#define UFFIA_PRECISION_NS f64
#endif

#define UFFIA_NAMESPACE_BEGIN \
  namespace uffia {           \
  inline namespace UFFIA_PRECISION_NS {
#define UFFIA_NAMESPACE_END \
  }                         \
  }

UFFIA_NAMESPACE_BEGIN

#if defined(UFFIA_SINGLE_PRECISION)
using Real = float;
inline constexpr const char* kRealDtype = "f32";
#else
using Real = double;
inline constexpr const char* kRealDtype = "f64";
#endif

/// Base of every domain error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};
class NumericError : public Error {
 public:
  using Error::Error;
};
class IndexError : public Error {
 public:
  using Error::Error;
};
class ContractError : public Error {
 public:
  using Error::Error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};
class InputError : public Error {
 public:
  using Error::Error;
};
class ParseError : public Error {
 public:
  using Error::Error;
};
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

UFFIA_NAMESPACE_END
