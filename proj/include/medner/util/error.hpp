#ifndef MEDNER_UTIL_ERROR_HPP
#define MEDNER_UTIL_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace medner {

/// Root of every error the library throws. The CLI maps each subclass to a
/// distinct exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (CoNLL, embedding file, schema, policy, config).
/// Carries the 1-based line number when one is known (0 otherwise).
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line), detail_(what) {}
    std::size_t line() const noexcept { return line_; }
    const std::string& detail() const noexcept { return detail_; }

    /// Same error, reported as "<file>:<line>: <detail>".
    ParseError in_file(const std::string& file) const {
        ParseError e(*this);
        static_cast<Error&>(e) = Error(file + (line_ ? ":" + std::to_string(line_) : std::string()) + ": " + detail_);
        return e;
    }

private:
    std::size_t line_;
    std::string detail_;
};

/// Tag or entity type not known to the active label schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Input that parses but violates a contract (IOB rules, overlapping spans,
/// misaligned corpora, bad ratios).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Loss or gradient became NaN/inf during training.
class NumericError : public Error {
public:
    using Error::Error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Model container problems. Each kind is distinguishable by type.
class ModelFormatError : public Error {
public:
    using Error::Error;
};
class VersionError : public ModelFormatError {
public:
    using ModelFormatError::ModelFormatError;
};
class ChecksumError : public ModelFormatError {
public:
    using ModelFormatError::ModelFormatError;
};
class ShapeError : public ModelFormatError {
public:
    using ModelFormatError::ModelFormatError;
};

}  // namespace medner

#endif  // MEDNER_UTIL_ERROR_HPP
