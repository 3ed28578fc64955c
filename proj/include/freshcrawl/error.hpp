#pragma once

#include <stdexcept>
#include <string>

namespace freshcrawl {

enum class ErrorKind {
    InvalidArgument,
    Data,
    Numerical,
    UnsupportedAnalysis,
    InsufficientData,
};

/// Base exception for the library. The kind drives CLI exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "invalid_argument";
        case ErrorKind::Data: return "data_error";
        case ErrorKind::Numerical: return "numerical_failure";
        case ErrorKind::UnsupportedAnalysis: return "unsupported_analysis";
        case ErrorKind::InsufficientData: return "insufficient_data";
    }
    return "unknown";
}

namespace detail {

inline void require(bool condition, const std::string& message) {
    if (!condition) throw Error(ErrorKind::InvalidArgument, message);
}

}  // namespace detail

}  // namespace freshcrawl
