#pragma once

#include <stdexcept>
#include <string>

namespace torcont {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Caller passed arguments of the wrong shape or outside the documented domain.
class InputError : public Error {
public:
  using Error::Error;
};

/// A run configuration (or problem setup) is inconsistent.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Newton or continuation failed to converge.
class ConvergenceError : public Error {
public:
  using Error::Error;
};

class NotFoundError : public Error {
public:
  using Error::Error;
};

/// Stored file has an unknown format or version.
class FormatError : public Error {
public:
  using Error::Error;
};

/// A stored snapshot has the wrong kind for the requested operation
/// (e.g. a periodic orbit where a torus is needed, or a label that is not TR/BP).
class KindError : public Error {
public:
  using Error::Error;
};

/// Initial-value integration stopped early; last_time is the last successfully reached time.
class IntegrationError : public Error {
public:
  IntegrationError(const std::string& what, double last_time)
      : Error(what), last_time_(last_time) {}
  double last_time() const noexcept { return last_time_; }

private:
  double last_time_;
};

}  // namespace torcont
