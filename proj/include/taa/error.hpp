#pragma once

#include <stdexcept>
#include <string>

namespace taa {

enum class ErrorKind {
    parameter,   // invalid physical/algorithmic parameter
    numerical,   // solver divergence, factorization failure, non-finite values
    format,      // malformed or truncated file
    config,      // bad configuration / CLI usage
    io,          // filesystem failure
    structural,  // network assembly mismatch
};

inline const char* to_string(ErrorKind k) noexcept
{
    switch (k) {
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::format: return "format";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
    case ErrorKind::structural: return "structural";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what)
{
    if (!cond) fail(kind, what);
}

// CLI exit codes: 0 success, 2 config, 3 numerical, 4 I/O.
inline int exit_code(ErrorKind k) noexcept
{
    switch (k) {
    case ErrorKind::numerical: return 3;
    case ErrorKind::format:
    case ErrorKind::io: return 4;
    default: return 2;
    }
}

} // namespace taa
