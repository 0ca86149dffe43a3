#pragma once

#include <stdexcept>
#include <string>

namespace sktod {

// Root of every error the library raises on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file or document; the message carries the field path
// and, when available, the line number.
class ParseError : public Error {
public:
    using Error::Error;
};

// Well-formed input that breaks a data invariant (duplicate ids, empty
// traveler type, misaligned files, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

class ResolutionError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace sktod
