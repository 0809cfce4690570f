#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace moyal {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied parameter. The message names the offending field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Violated precondition between library values (shape mismatch, bad index).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// The requested evolution law cannot handle the given Hamiltonian.
class UnsupportedMethod : public Error {
 public:
  using Error::Error;
};

/// A nonlocal shift would wrap around the periodic domain.
class DomainWrapError : public Error {
 public:
  using Error::Error;
};

/// Too many samples fell outside the histogram grid.
class CoverageError : public Error {
 public:
  using Error::Error;
};

/// Projection onto a cell that carries (numerically) no probability.
class ImpossibleOutcome : public Error {
 public:
  using Error::Error;
};

/// Time integration produced non-finite or runaway values.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step, std::size_t last_good_snapshot)
      : Error(what), step_(step), last_good_snapshot_(last_good_snapshot) {}

  /// 1-based index of the step whose result was rejected.
  std::size_t step() const noexcept { return step_; }
  /// Index into the trajectory of the last snapshot recorded before failure.
  std::size_t last_good_snapshot() const noexcept { return last_good_snapshot_; }

 private:
  std::size_t step_;
  std::size_t last_good_snapshot_;
};

}  // namespace moyal
