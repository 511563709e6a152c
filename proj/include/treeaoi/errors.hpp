#pragma once

#include <stdexcept>
#include <string>

namespace treeaoi {

/// Invalid protocol or sweep configuration. Maps to CLI exit code 1.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not deliver a result at the requested accuracy
/// (sample budget exhausted, singular system, non-convergence).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace treeaoi
