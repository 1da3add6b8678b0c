#pragma once

#include <stdexcept>
#include <string>

namespace rastercast {

// Input files that do not conform to a documented format.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem-level failures (missing file, unwritable path).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Violated operation preconditions (bad thresholds, empty inputs, ...).
struct ContractError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Optimization failures (divergence, NaN objective).
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace rastercast
