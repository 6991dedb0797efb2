#pragma once

#include <stdexcept>
#include <string>

namespace biasprobe {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller passed something malformed (unknown node, missing mask, bad degree).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Parameters or configuration that cannot produce a valid run.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

/// Both access probabilities are zero at some axis level.
class UndefinedPosteriorError : public Error {
 public:
  using Error::Error;
};

/// A statistic is undefined for the data (single-level variable, zero variance).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

class UnknownAxisValueError : public InputError {
 public:
  using InputError::InputError;
};

/// A scoring backend failed. `retriable()` tells callers whether another
/// attempt can succeed (rate limits, 5xx, timeouts).
class ScorerError : public Error {
 public:
  ScorerError(const std::string& what, bool retriable)
      : Error(what), retriable_(retriable) {}

  bool retriable() const noexcept { return retriable_; }

 private:
  bool retriable_;
};

/// The backend answered, but not in the expected wire shape.
class ProtocolError : public ScorerError {
 public:
  explicit ProtocolError(const std::string& what) : ScorerError(what, false) {}
};

}  // namespace biasprobe
