#include "oodlab/error.hpp"

namespace oodlab {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::InvalidConfig: return "invalid-config";
    case ErrorKind::UnsupportedVariant: return "unsupported-variant";
    case ErrorKind::DegenerateSubspace: return "degenerate-subspace";
    case ErrorKind::DegenerateBoundary: return "degenerate-boundary";
    case ErrorKind::DegenerateProtocol: return "degenerate-protocol";
    case ErrorKind::Numerical: return "numerical-failure";
    case ErrorKind::State: return "state";
    case ErrorKind::CorruptFile: return "corrupt-file";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::IncompleteBlock: return "incomplete-block";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

int Error::exit_code() const noexcept {
  switch (kind_) {
    case ErrorKind::InvalidConfig:
    case ErrorKind::UnsupportedVariant:
      return 2;
    case ErrorKind::Numerical:
    case ErrorKind::DegenerateSubspace:
    case ErrorKind::DegenerateBoundary:
      return 4;
    default:
      return 3;
  }
}

void fail(ErrorKind kind, const std::string& what) {
  if (kind == ErrorKind::DegenerateSubspace) throw DegenerateSubspaceError(what);
  throw Error(kind, what);
}

}  // namespace oodlab
