#pragma once

#include <stdexcept>
#include <string>

namespace advoice {

// Base for all recoverable engine errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed file contents (WAV headers, manifests, model records, packets).
struct FormatError : Error {
  using Error::Error;
};

// Invalid parameter value or combination.
struct ConfigError : Error {
  using Error::Error;
};

// A required external executable is not installed.
struct ToolUnavailableError : Error {
  using Error::Error;
};

// Filesystem failure (open, read, write).
struct IoError : Error {
  using Error::Error;
};

// Socket failure.
struct NetError : Error {
  using Error::Error;
};

}  // namespace advoice
