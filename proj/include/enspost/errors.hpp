#pragma once

#include <stdexcept>
#include <string>

namespace enspost {

/// Base class for every recoverable error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad or insufficient input data (empty series, missing dates, ...).
class InputError : public Error {
public:
    using Error::Error;
};

/// Malformed file contents or inconsistent sampling.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss or gradient, or had too little data.
class TrainingError : public Error {
public:
    using Error::Error;
};

/// A score that is mathematically undefined for the given sample
/// (constant observations for NSE, zero reference Brier score, ...).
class UndefinedScoreError : public Error {
public:
    using Error::Error;
};

/// An optimizer failed to reach its stopping rule.
class FitError : public Error {
public:
    using Error::Error;
};

/// A pipeline stage failed; the message names the stage and the cause.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& cause)
        : Error("stage '" + stage + "' failed: " + cause), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

/// Programming error: shapes or caches that do not belong together.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace enspost
