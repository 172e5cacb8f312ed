#pragma once

#include <stdexcept>
#include <string>

namespace t2fit {

// Thrown for invalid user input: bad configs, out-of-range values,
// malformed region layouts. CLI exit code 2.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown for file problems: missing files, truncated payloads, bad magic.
// CLI exit code 3.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a numeric routine cannot proceed (non-finite loss, singular
// system with damping exhausted and no fallback). CLI exit code 4.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace t2fit
