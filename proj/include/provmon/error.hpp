#pragma once

#include <stdexcept>
#include <string>

namespace provmon {

// Error categories map onto CLI exit codes: input errors exit 2,
// configuration errors exit 3, everything else exits 1.
enum class ErrorKind { Internal, Input, Config };

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ErrorKind kind = ErrorKind::Internal)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ParseError : Error {
  explicit ParseError(const std::string& w) : Error(w, ErrorKind::Input) {}
};
struct IntegrityError : Error {
  explicit IntegrityError(const std::string& w) : Error(w, ErrorKind::Input) {}
};
struct LookupError : Error {
  explicit LookupError(const std::string& w) : Error(w, ErrorKind::Input) {}
};
struct CoverageError : Error {
  explicit CoverageError(const std::string& w) : Error(w, ErrorKind::Input) {}
};
struct PreconditionError : Error {
  explicit PreconditionError(const std::string& w) : Error(w, ErrorKind::Input) {}
};
struct ArgumentError : Error {
  explicit ArgumentError(const std::string& w) : Error(w, ErrorKind::Input) {}
};
// Operand of the wrong dtype for an integration operator.
struct TypeError : Error {
  explicit TypeError(const std::string& w) : Error(w, ErrorKind::Input) {}
};
// Integration leaf or plan stream that cannot be resolved.
struct ReferenceError : Error {
  explicit ReferenceError(const std::string& w) : Error(w, ErrorKind::Input) {}
};
struct BindingError : Error {
  explicit BindingError(const std::string& w) : Error(w) {}
};
struct ExtractionError : Error {
  explicit ExtractionError(const std::string& w) : Error(w) {}
};
struct TrainingError : Error {
  explicit TrainingError(const std::string& w) : Error(w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(w, ErrorKind::Config) {}
};

}  // namespace provmon
