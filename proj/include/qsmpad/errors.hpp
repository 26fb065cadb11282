#pragma once

#include <stdexcept>
#include <string>

namespace qsmpad {

// Bad arguments or contract violations caught before any work is done.
// The CLI maps these to exit code 2.
struct ValidationError : std::invalid_argument {
    explicit ValidationError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Malformed or truncated file content.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// File parses but describes a shape we do not handle (e.g. 4D NIfTI).
struct UnsupportedShapeError : FormatError {
    explicit UnsupportedShapeError(const std::string& msg) : FormatError(msg) {}
};

// Filesystem-level failure; message carries the path.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse, e.g. backward() before any forward pass was recorded.
struct StateError : std::logic_error {
    explicit StateError(const std::string& msg) : std::logic_error(msg) {}
};

// Training diverged (NaN loss); message names epoch and step.
struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace qsmpad
