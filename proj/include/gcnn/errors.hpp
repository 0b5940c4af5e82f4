#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gcnn {

// Base class for all library errors. The kind string is a stable identifier
// used in CLI diagnostics; the what() message carries the details.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& msg)
        : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}

    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

#define GCNN_ERROR_TYPE(NAME)                                        \
    class NAME : public Error {                                     \
    public:                                                          \
        explicit NAME(const std::string& msg) : Error(#NAME, msg) {} \
    }

GCNN_ERROR_TYPE(ShapeMismatch);
GCNN_ERROR_TYPE(IndexOutOfRange);
GCNN_ERROR_TYPE(DuplicateEdge);
GCNN_ERROR_TYPE(ReservedSlice);
GCNN_ERROR_TYPE(NonFiniteValue);
GCNN_ERROR_TYPE(NotAGridSample);
GCNN_ERROR_TYPE(EmptyBatch);
GCNN_ERROR_TYPE(InvalidRate);
GCNN_ERROR_TYPE(EmptyMask);
GCNN_ERROR_TYPE(InvalidClass);
GCNN_ERROR_TYPE(TooFewSamples);
GCNN_ERROR_TYPE(NonFiniteLoss);
GCNN_ERROR_TYPE(EmptyEvalSet);
GCNN_ERROR_TYPE(DimensionError);
GCNN_ERROR_TYPE(EmptyPlan);
GCNN_ERROR_TYPE(IoError);

#undef GCNN_ERROR_TYPE

// Architecture-string parse failure. Carries the byte offset of the first
// offending character.
class SyntaxError : public Error {
public:
    SyntaxError(std::size_t offset, const std::string& msg)
        : Error("SyntaxError",
                "at byte " + std::to_string(offset) + ": " + msg),
          offset_(offset) {}

    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

// Dataset-file parse failure with a 1-based line number.
class ParseError : public Error {
public:
    ParseError(int line, const std::string& msg)
        : Error("ParseError", "line " + std::to_string(line) + ": " + msg),
          line_(line) {}

    int line() const { return line_; }

private:
    int line_;
};

}  // namespace gcnn
