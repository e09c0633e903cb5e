#pragma once

#include <stdexcept>
#include <string>

namespace lsrf {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class BoundsError : public Error {
public:
    using Error::Error;
};

class EmptyModelError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

class FitError : public Error {
public:
    using Error::Error;
};

class InstabilityError : public Error {
public:
    using Error::Error;
};

class NotPositiveDefiniteError : public Error {
public:
    using Error::Error;
};

class DivergenceError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class CvError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace lsrf
