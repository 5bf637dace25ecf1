#pragma once

#include <stdexcept>
#include <string>

namespace swinvid {

// Violated precondition or broken invariant. CLI maps these to exit code 1.
struct contract_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad record content (invalid annotation, incompatible checkpoint shape).
struct validation_error : contract_error {
    using contract_error::contract_error;
};

// Filesystem-level failure. CLI maps these to exit code 2.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed file content (bad magic, truncated payload, unparsable line).
struct format_error : io_error {
    using io_error::io_error;
};

}  // namespace swinvid
