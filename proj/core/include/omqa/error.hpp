#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace omqa {

// Base of every error raised by the library. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& msg)
        : Error("line " + std::to_string(line) + ": " + msg), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class SchemaError : public Error { using Error::Error; };
class LookupError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class InstantiationError : public Error { using Error::Error; };
class UnsupportedShape : public Error { using Error::Error; };
class SamplingError : public Error { using Error::Error; };
class ContractError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };

class NumericError : public Error {
public:
    NumericError(const std::string& param, const std::string& msg)
        : Error(param + ": " + msg), param_(param) {}
    const std::string& param() const { return param_; }

private:
    std::string param_;
};

}  // namespace omqa
