#ifndef HGMD_ERROR_HPP
#define HGMD_ERROR_HPP

#include <stdexcept>
#include <string>

namespace hgmd {

// Categories map one-to-one onto the C API status codes and CLI exit codes.
enum class ErrorKind {
  Config,           // bad configuration, missing or malformed input files
  Numeric,          // NaN/Inf during training, divergence
  InvalidArgument,  // contract violation by the caller
  Io,               // filesystem failures on output
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void throw_config(const std::string& what);
[[noreturn]] void throw_numeric(const std::string& what);
[[noreturn]] void throw_invalid(const std::string& what);
[[noreturn]] void throw_io(const std::string& what);

}  // namespace hgmd

#endif  // HGMD_ERROR_HPP
