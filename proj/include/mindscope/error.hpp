#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mindscope {

/// Root of every domain error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class SyntaxError : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

class ReferenceError : public Error {
public:
    using Error::Error;
};

/// A malformed record in a line-oriented file. Line numbers are 1-based.
class RecordError : public Error {
public:
    RecordError(std::size_t line_no, const std::string& what)
        : Error("line " + std::to_string(line_no) + ": " + what), line_no_(line_no) {}

    std::size_t line_no() const noexcept { return line_no_; }

private:
    std::size_t line_no_;
};

class NotFound : public Error {
public:
    using Error::Error;
};

class DuplicateIdError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class EmptyInput : public Error {
public:
    using Error::Error;
};

class LengthMismatch : public Error {
public:
    using Error::Error;
};

class DegenerateVariance : public Error {
public:
    using Error::Error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

// Backend failures. Callers that degrade gracefully catch BackendError.
class BackendError : public Error {
public:
    using Error::Error;
};

class CassetteMiss : public BackendError {
public:
    using BackendError::BackendError;
};

class AuthError : public BackendError {
public:
    using BackendError::BackendError;
};

class TransportError : public BackendError {
public:
    using BackendError::BackendError;
};

class FormatError : public BackendError {
public:
    using BackendError::BackendError;
};

}  // namespace mindscope
