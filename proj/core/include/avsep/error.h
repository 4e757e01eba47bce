// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace avsep {

/// Base class for all avsep errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad inputs, violated invariants, malformed files.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered where finite values are required.
class NumericalDivergence : public Error {
 public:
  using Error::Error;
};

/// Filesystem or external-tool failures.
class IoError : public Error {
 public:
  using Error::Error;
};

namespace detail {

// Stream-based message builder so checks can say
// AVSEP_CHECK(x > 0, "x must be positive, got " << x);
class MessageStream {
 public:
  template <typename T>
  MessageStream& operator<<(const T& v) {
    os_ << v;
    return *this;
  }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

}  // namespace detail

}  // namespace avsep

#define AVSEP_CHECK(cond, msg)                                        \
  do {                                                                \
    if (!(cond)) {                                                    \
      throw ::avsep::ValidationError(                                 \
          (::avsep::detail::MessageStream() << msg).str());           \
    }                                                                 \
  } while (0)

#define AVSEP_CHECK_FINITE(cond, msg)                                 \
  do {                                                                \
    if (!(cond)) {                                                    \
      throw ::avsep::NumericalDivergence(                             \
          (::avsep::detail::MessageStream() << msg).str());           \
    }                                                                 \
  } while (0)
