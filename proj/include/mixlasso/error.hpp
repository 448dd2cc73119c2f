#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mixlasso {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent vector/matrix dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value outside the mathematical domain of an operation (non-SPD matrix, zero density, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An infeasible or inconsistent configuration (empty parameter box, bad spec).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A caller-supplied argument outside the accepted range.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

class DegenerateComponentError : public Error {
 public:
  DegenerateComponentError(int component, double mass)
      : Error("component " + std::to_string(component) + " has total responsibility " +
              std::to_string(mass) + " below the degeneracy floor"),
        component_(component) {}
  int component() const noexcept { return component_; }

 private:
  int component_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A replicate of an experiment failed; carries what is needed to replay it.
class ReplicateFailure : public Error {
 public:
  ReplicateFailure(int replicate, std::uint64_t seed, const std::string& what)
      : Error("replicate " + std::to_string(replicate) + " (seed " + std::to_string(seed) +
              ") failed: " + what),
        replicate_(replicate),
        seed_(seed) {}
  int replicate() const noexcept { return replicate_; }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  int replicate_;
  std::uint64_t seed_;
};

}  // namespace mixlasso
