#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace amdl {

// Shape or argument violations (channel mismatch, bad label, bad preset).
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Non-finite values produced or consumed by an operator.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed file contents. Carries the byte offset where parsing failed.
struct FormatError : std::runtime_error {
    size_t offset;
    FormatError(const std::string& what, size_t at)
        : std::runtime_error(what + " (at byte offset " + std::to_string(at) + ")"), offset(at) {}
};

// Filesystem-level failures (open/read/write).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid run configuration or command usage.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace amdl
