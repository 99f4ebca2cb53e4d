#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rdlearn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got)
      : Error("dimension mismatch: expected " + std::to_string(expected) +
              ", got " + std::to_string(got)) {}
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// Raised when the explicit reaction step would violate dt * L <= 0.5.
class StabilityError : public Error {
 public:
  StabilityError(const std::string& what, double suggested_dt)
      : Error(what), suggested_dt_(suggested_dt) {}
  double suggested_dt() const { return suggested_dt_; }

 private:
  double suggested_dt_;
};

class BlowUpError : public Error {
 public:
  BlowUpError(const std::string& what, std::size_t step) : Error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Configuration problem; `key()` names the offending entry.
class ValidationError : public Error {
 public:
  ValidationError(std::string key, const std::string& constraint)
      : Error(key + ": " + constraint), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

}  // namespace rdlearn
