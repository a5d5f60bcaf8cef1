#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace spfd {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed phantom, field-sample, report or Matrix Market input.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid geometry or argument values (shape outside grid, bad dims, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Biot-Savart evaluation on the wire.
class SingularPointError : public Error {
 public:
  using Error::Error;
};

/// No conductive node survives the restriction to the body.
class EmptySystemError : public Error {
 public:
  using Error::Error;
};

/// Tree-cotree elimination stalled or the recovered potential does not
/// reproduce the fluxes.
class GaugingError : public Error {
 public:
  using Error::Error;
};

/// Krylov or projection solve failed (non-convergence, NaN breakdown).
class SolverError : public Error {
 public:
  using Error::Error;
};

/// A pipeline step failed; `step()` names it.
class PipelineError : public Error {
 public:
  PipelineError(std::string step, const std::string& what)
      : Error("step '" + step + "' failed: " + what), step_(std::move(step)) {}
  const std::string& step() const noexcept { return step_; }

 private:
  std::string step_;
};

}  // namespace spfd
