#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bicausal {

// Base for every error the toolkit throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of a function.
class DomainError : public Error {
public:
    using Error::Error;
};

// Invalid configuration value (alpha, probabilities, counts ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Input data violates a structural contract (templates, pairs, datasets).
class ValidationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Malformed record in a line-oriented file. Line numbers are 1-based.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace bicausal
