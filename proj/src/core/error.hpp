#pragma once

#include <stdexcept>
#include <string>

namespace fvbnn {

enum class ErrorKind {
    Input,      // bad argument to a library call
    Config,     // experiment configuration is invalid
    Data,       // dataset contents or schema problem
    Io,         // file could not be read or written
    Numerical,  // factorization failure, divergence
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error(ErrorKind::Input, what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

/// Raised when the training loss becomes non-finite. `member` is -1 for a
/// standalone network and the ensemble index otherwise.
class TrainingError : public NumericalError {
public:
    TrainingError(const std::string& what, int epoch, int member = -1)
        : NumericalError(what), epoch_(epoch), member_(member) {}
    int epoch() const noexcept { return epoch_; }
    int member() const noexcept { return member_; }

private:
    int epoch_;
    int member_;
};

}  // namespace fvbnn
