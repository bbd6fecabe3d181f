#pragma once

#include <stdexcept>
#include <string>

namespace tripled {

// Every failure mode the library can raise, grouped by how the CLI maps
// them to exit codes: input (2), numeric/solver (3), config (4).
enum class ErrorKind {
  // input / data errors
  MissingInput,
  MissingColumn,
  ParseError,
  DuplicateKey,
  InconsistentUnitAttribute,
  UnbalancedPanel,
  EmptyAfterDrop,
  // numeric / solver errors
  EmptyCell,
  InsufficientCell,
  MissingCellFit,
  RankDeficient,
  CollinearDesign,
  DimensionMismatch,
  SolverNotConverged,
  ZeroDof,
  SingleCluster,
  TooFewControls,
  InsufficientPrePeriods,
  DegenerateResample,
  TooManyFailedReplicates,
  // configuration errors
  ConfigInvalid,
};

enum class ErrorCategory { Input, Numeric, Config };

const char* error_kind_name(ErrorKind kind);
ErrorCategory error_category(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind),
        message_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return error_category(kind_); }
  // message without the kind prefix, for structured error output
  const std::string& detail() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace tripled
