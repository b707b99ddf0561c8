#pragma once

#include <stdexcept>
#include <string>

namespace calm {

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input text (CSV rows, config files). Messages carry line numbers.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Structurally valid input with values outside the allowed domain.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Loaded data violates a channel invariant (non-monotonic time, empty file).
class DataError : public Error {
public:
    using Error::Error;
};

/// A signal is too short or too empty for the requested operation.
class DegenerateSignalError : public Error {
public:
    using Error::Error;
};

/// Filter design request cannot be satisfied (e.g. cutoff at or above Nyquist).
class DesignError : public Error {
public:
    using Error::Error;
};

/// R-peak detection failed to find enough beats.
class DetectionError : public Error {
public:
    using Error::Error;
};

/// Feature assembly produced no rows.
class AssemblyError : public Error {
public:
    using Error::Error;
};

/// A scenario filter left one side of the split empty.
class ScenarioError : public Error {
public:
    using Error::Error;
};

/// Caller violated an API contract (schema mismatch, bad argument).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Stored model file has an unsupported format version.
class IncompatibilityError : public Error {
public:
    using Error::Error;
};

/// Stored model file failed its checksum.
class CorruptionError : public Error {
public:
    using Error::Error;
};

/// Filesystem failure while reading or writing outputs.
class IoError : public Error {
public:
    using Error::Error;
};

/// Loss diverged or another unrecoverable condition during model training.
class TrainingError : public Error {
public:
    using Error::Error;
};

} // namespace calm
