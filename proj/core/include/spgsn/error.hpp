#pragma once

#include <stdexcept>
#include <string>

namespace spgsn {

// Error taxonomy. Every failure mode in the library maps onto one of these
// so callers (and tests) can tell misuse apart from bad data or bad files.

struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AxisError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Violated precondition or API contract.
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PartitionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised by verification oracles (e.g. the finite-difference checker) when
// the quantity under test cannot be evaluated.
struct OracleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace spgsn
