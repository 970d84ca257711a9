#pragma once

#include <stdexcept>
#include <string>

namespace tcsim {

// Base for every failure raised by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid parameters, malformed config files, out-of-range arguments.
class ConfigError : public Error {
public:
    using Error::Error;
};

// File system and format problems (missing files, bad WAV headers, ...).
class IoError : public Error {
public:
    using Error::Error;
};

// A simulation produced a non-finite value.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, long step, double time)
        : Error(what + " at step " + std::to_string(step) + " (t=" + std::to_string(time) + " s)"),
          step_(step), time_(time) {}

    long step() const noexcept { return step_; }
    double time() const noexcept { return time_; }

private:
    long step_;
    double time_;
};

// Numerical degeneracy in signal processing or transfer-function arithmetic.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace tcsim
