#pragma once

#include <stdexcept>
#include <string>

namespace cacc {

// Base for every error the library raises on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

// Residual series with zero RMS cannot be normalized.
class DegenerateResidual : public Error {
public:
    using Error::Error;
};

class OutOfHull : public Error {
public:
    using Error::Error;
};

class UnknownLabel : public Error {
public:
    using Error::Error;
};

// The shrunk linear input set U^l is empty.
class AuthorityError : public Error {
public:
    using Error::Error;
};

class EmptySlice : public Error {
public:
    using Error::Error;
};

class InsufficientHistory : public Error {
public:
    using Error::Error;
};

class NoSteadyState : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace cacc
