#pragma once

#include <stdexcept>
#include <string>

namespace mmgr {

/// Base class for every error raised by the engine. `code()` is a stable
/// machine-readable identifier; the CLI forwards it verbatim.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), m_code(std::move(code)) {}

    const std::string& code() const noexcept { return m_code; }

    /// True for errors caused by bad input or usage rather than a failure
    /// during computation.
    virtual bool is_input_error() const noexcept { return true; }

private:
    std::string m_code;
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& message) : Error("shape_error", message) {}
};

class LookupError : public Error {
public:
    explicit LookupError(const std::string& message) : Error("lookup_error", message) {}
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& message) : Error("dimension_error", message) {}
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& message) : Error("format_error", message) {}
};

class ConsistencyError : public Error {
public:
    explicit ConsistencyError(const std::string& message)
        : Error("consistency_error", message) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error("config_error", message) {}
};

class EmptyBatchError : public Error {
public:
    explicit EmptyBatchError(const std::string& message) : Error("empty_batch", message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error("io_error", message) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& message) : Error("numeric_error", message) {}
    bool is_input_error() const noexcept override { return false; }
};

class InternalError : public Error {
public:
    explicit InternalError(const std::string& message) : Error("internal_error", message) {}
    bool is_input_error() const noexcept override { return false; }
};

}  // namespace mmgr
