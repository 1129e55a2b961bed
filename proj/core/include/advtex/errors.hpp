#pragma once

#include <stdexcept>
#include <string>

namespace advtex {

// Error taxonomy shared by the library and the CLI. The CLI maps categories
// to exit codes: validation/parse -> 1, everything else -> 2.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& what)
        : std::runtime_error(what), category_(std::move(category)) {}

    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error("validation", what) {}
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error("parse", what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("io", what) {}
};

class JudgeError : public Error {
public:
    explicit JudgeError(const std::string& what) : Error("judge", what) {}
};

class NetworkError : public Error {
public:
    explicit NetworkError(const std::string& what) : Error("network", what) {}
};

}  // namespace advtex
