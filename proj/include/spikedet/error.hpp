#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spikedet {

/// Failure category. The CLI maps these to exit codes and message prefixes.
enum class ErrorKind {
  Size,        // shape extent or element-count violation
  Shape,       // mismatched operand shapes
  Validation,  // value-level invariant broken (non-binary spikes, NaN, ...)
  Format,      // malformed tensor, weights or PGM file
  Config,      // graph config or layer configuration problem
  Weights,     // missing/unresolvable/ill-shaped parameters
  Io,          // filesystem failure
  Internal,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Size: return "size";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Format: return "format";
    case ErrorKind::Config: return "config";
    case ErrorKind::Weights: return "weights";
    case ErrorKind::Io: return "io";
    case ErrorKind::Internal: return "internal";
  }
  return "internal";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace spikedet
