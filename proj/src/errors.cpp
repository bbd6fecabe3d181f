#include "tripled/errors.hpp"

namespace tripled {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingInput: return "MissingInput";
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DuplicateKey: return "DuplicateKey";
    case ErrorKind::InconsistentUnitAttribute: return "InconsistentUnitAttribute";
    case ErrorKind::UnbalancedPanel: return "UnbalancedPanel";
    case ErrorKind::EmptyAfterDrop: return "EmptyAfterDrop";
    case ErrorKind::EmptyCell: return "EmptyCell";
    case ErrorKind::InsufficientCell: return "InsufficientCell";
    case ErrorKind::MissingCellFit: return "MissingCellFit";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::CollinearDesign: return "CollinearDesign";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::SolverNotConverged: return "SolverNotConverged";
    case ErrorKind::ZeroDof: return "ZeroDof";
    case ErrorKind::SingleCluster: return "SingleCluster";
    case ErrorKind::TooFewControls: return "TooFewControls";
    case ErrorKind::InsufficientPrePeriods: return "InsufficientPrePeriods";
    case ErrorKind::DegenerateResample: return "DegenerateResample";
    case ErrorKind::TooManyFailedReplicates: return "TooManyFailedReplicates";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
  }
  return "UnknownError";
}

ErrorCategory error_category(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingInput:
    case ErrorKind::MissingColumn:
    case ErrorKind::ParseError:
    case ErrorKind::DuplicateKey:
    case ErrorKind::InconsistentUnitAttribute:
    case ErrorKind::UnbalancedPanel:
    case ErrorKind::EmptyAfterDrop:
      return ErrorCategory::Input;
    case ErrorKind::ConfigInvalid:
      return ErrorCategory::Config;
    default:
      return ErrorCategory::Numeric;
  }
}

}  // namespace tripled
