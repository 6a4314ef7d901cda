#pragma once

#include <stdexcept>
#include <string>

namespace knpg {

// Base for every library error. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or dimension mismatch.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Singular or ill-conditioned linear system, failed postcondition.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Iterative TD blew up. Carries the spectral radius estimate of the iteration matrix.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, double rho) : NumericalError(what), rho_(rho) {}
  double spectral_radius() const noexcept { return rho_; }

 private:
  double rho_;
};

// Environment produced a non-finite state while sampling.
class SamplingError : public Error {
 public:
  SamplingError(const std::string& what, std::string state) : Error(what), state_(std::move(state)) {}
  const std::string& state() const noexcept { return state_; }

 private:
  std::string state_;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. line is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line) : Error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace knpg
