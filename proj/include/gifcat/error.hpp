#pragma once

#include <stdexcept>
#include <string>

namespace gifcat {

// Input that could not be decoded at all: malformed JSON, bad TSV shape, ...
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Well-formed input that violates a contract: duplicate idx, unknown
// category, dangling merge rule, shape mismatch, ...
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace gifcat
