#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace oodlab {

enum class ErrorKind {
  InvalidInput,
  InvalidConfig,
  UnsupportedVariant,
  DegenerateSubspace,
  DegenerateBoundary,
  DegenerateProtocol,
  Numerical,
  State,
  CorruptFile,
  Schema,
  IncompleteBlock,
  Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library. The kind maps onto the CLI exit codes:
/// 2 for configuration problems, 3 for data problems, 4 for numerical failures.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept;

 private:
  ErrorKind kind_;
};

/// Raised by fit_pca on rank-0 data; carries the (zero) retained dimension.
class DegenerateSubspaceError : public Error {
 public:
  explicit DegenerateSubspaceError(const std::string& what)
      : Error(ErrorKind::DegenerateSubspace, what) {}
  int rank() const noexcept { return 0; }
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace oodlab
