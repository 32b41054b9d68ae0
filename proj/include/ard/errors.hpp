#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ard {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Endpoint outside [0,1], lo > hi, malformed branch.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Distance to (or between) empty sets.
class UndefinedDistanceError : public Error {
 public:
  using Error::Error;
};

// Orbit or evaluation hit a Lorenz critical point with no side given.
class AmbiguousCriticalPointError : public Error {
 public:
  AmbiguousCriticalPointError(const std::string& what, std::size_t hit_index)
      : Error(what), hit_index_(hit_index) {}
  std::size_t hit_index() const { return hit_index_; }

 private:
  std::size_t hit_index_;
};

// The two resolutions of a refined cover disagree.
class ResolutionError : public Error {
 public:
  ResolutionError(const std::string& what, std::size_t level)
      : Error(what), level_(level) {}
  std::size_t level() const { return level_; }

 private:
  std::size_t level_;
};

// Result that can only be empty when something upstream is inconsistent.
class InconsistencyError : public Error {
 public:
  using Error::Error;
};

// Preimage tree became empty before the requested depth.
class PreimageTreeDiedError : public Error {
 public:
  PreimageTreeDiedError(const std::string& what, std::size_t last_depth)
      : Error(what), last_nonempty_depth_(last_depth) {}
  std::size_t last_nonempty_depth() const { return last_nonempty_depth_; }

 private:
  std::size_t last_nonempty_depth_;
};

// Lyapunov evaluation too close to the overlap set L.
class OnOverlapError : public Error {
 public:
  OnOverlapError(const std::string& what, std::size_t hit_index)
      : Error(what), hit_index_(hit_index) {}
  std::size_t hit_index() const { return hit_index_; }

 private:
  std::size_t hit_index_;
};

// A Lyapunov value that falls in no band and no open gap.
class AmbiguousLevelError : public Error {
 public:
  using Error::Error;
};

// Map definition / config file does not match its schema.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ard
