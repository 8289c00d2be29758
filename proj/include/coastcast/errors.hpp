#pragma once

#include <stdexcept>
#include <string>

namespace coastcast {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape/extent disagreements between tensors or against an op contract.
struct ShapeError : Error {
    using Error::Error;
};

// Invalid argument values (bad ranges, bad enum strings, degenerate stats).
struct ValueError : Error {
    using Error::Error;
};

// On-disk format violations: magic, version, truncation, dim overflow.
struct FormatError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Non-finite values where finite ones are required (NaN loss).
struct NumericError : Error {
    using Error::Error;
};

// Command-line misuse; maps to exit code 2.
struct UsageError : Error {
    using Error::Error;
};

}  // namespace coastcast
