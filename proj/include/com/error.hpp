#pragma once

#include <stdexcept>
#include <string>

namespace com {

// Error taxonomy. Each family maps onto one CLI exit code.
enum class ErrorKind { config = 2, io = 3, validation = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

// Database file failures. Distinct types so callers can tell them apart.
struct FormatError : ValidationError {
    using ValidationError::ValidationError;
};
struct VersionError : FormatError {
    using FormatError::FormatError;
};
struct TruncatedError : FormatError {
    using FormatError::FormatError;
};
struct ChecksumError : FormatError {
    using FormatError::FormatError;
};

inline const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return "config";
        case ErrorKind::io: return "io";
        case ErrorKind::validation: return "validation";
    }
    return "unknown";
}

}  // namespace com
