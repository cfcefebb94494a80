#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace slim {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class RankError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

// KV cache is full.
class CapacityError : public Error {
public:
    using Error::Error;
};

// Weight layout does not fit on the device.
class MappingError : public Error {
public:
    using Error::Error;
};

class AccountingError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Predictor training diverged. Carries the loss history up to the failure.
class TrainingError : public Error {
public:
    TrainingError(const std::string& what, std::vector<double> history)
        : Error(what), history_(std::move(history)) {}

    const std::vector<double>& history() const noexcept { return history_; }

private:
    std::vector<double> history_;
};

}  // namespace slim
