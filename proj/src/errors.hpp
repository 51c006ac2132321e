#pragma once

#include <stdexcept>
#include <string>

namespace cci {

// Stable failure categories; mirrored one-to-one by the C API status codes.
enum class ErrorCode {
    invalid_argument = 1,
    rank_deficient = 2,
    separation = 3,
    empty_class = 4,
    degenerate_outcome = 5,
    numeric_degeneracy = 6,
    io = 7,
    parse = 8,
    internal = 9,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string msg)
        : std::runtime_error(std::move(msg)), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
    throw Error(code, msg);
}

inline void require(bool cond, ErrorCode code, const std::string& msg) {
    if (!cond) fail(code, msg);
}

} // namespace cci
