#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dyad {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed session file; carries the byte offset where parsing failed.
struct ParseError : std::runtime_error {
    std::uint64_t byte_offset;
    ParseError(const std::string& msg, std::uint64_t offset)
        : std::runtime_error(msg + " (byte offset " + std::to_string(offset) + ")"),
          byte_offset(offset) {}
};

// Training produced a non-finite loss or gradient.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace dyad
