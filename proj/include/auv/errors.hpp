#pragma once

#include <stdexcept>
#include <string>

namespace auv {

/// Base of every error thrown by the library. `exit_code()` is what the
/// command-line front end returns when the error escapes a command.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 2; }
};

class FormatError : public Error { public: using Error::Error; };
class DataError : public Error { public: using Error::Error; };
class ShapeError : public Error { public: using Error::Error; };
class ClassError : public Error { public: using Error::Error; };
class ParameterError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };
class InputError : public Error { public: using Error::Error; };

class NumericalError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

namespace exit_codes {
inline constexpr int ok = 0;
inline constexpr int input = 2;
inline constexpr int numerical = 3;
inline constexpr int acceptance = 4;
}  // namespace exit_codes

}  // namespace auv
