#pragma once

#include <stdexcept>
#include <string>

namespace tasckit {

// Error categories double as CLI exit codes: 0 success, 1 usage,
// 2 format, 3 invariant, 4 metric-input mismatch.
enum class ErrorKind : int {
    format = 2,
    invariant = 3,
    mismatch = 4,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

// Malformed input: bad magic, unsupported version, truncated payload,
// unparseable JSON, wrong JSON structure.
class FormatError : public Error {
public:
    explicit FormatError(const std::string& what) : Error(ErrorKind::format, what) {}
};

// Structurally well-formed data that violates a documented invariant
// (value out of range, dangling segment id, inconsistent dimensions).
class InvariantError : public Error {
public:
    explicit InvariantError(const std::string& what) : Error(ErrorKind::invariant, what) {}
};

// Metric inputs that do not line up (e.g. prediction/ground-truth image
// id sets differ).
class MismatchError : public Error {
public:
    explicit MismatchError(const std::string& what) : Error(ErrorKind::mismatch, what) {}
};

}  // namespace tasckit
