#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ctour {

enum class ErrorCode {
    MalformedInput,
    EmptySelection,
    ParseError,
    UnknownFeature,
    InvalidRate,
    InvalidArgument,
    DimensionMismatch,
    DegenerateVector,
    InvalidCombination,
    TooFewRows,
    PerplexityTooLarge,
    SingleCluster,
    LengthMismatch,
    NotApplicable,
    MissingLabels,
    TooFewFeatures,
    UnknownCluster,
    AllParamsFixed,
    NoViableCandidate,
    NothingToUndo,
    NothingToRedo,
    SchemaMismatch,
    CorruptPayload,
    NotFound,
    PortInUse,
};

std::string_view to_string(ErrorCode code);

// Input errors are caused by what the caller supplied; everything else is a
// failure during computation. The CLI maps these onto exit codes 2 and 3.
bool is_input_error(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Parse errors carry the byte offset of the offending token so a frontend can
// place a caret under it.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t position)
        : Error(ErrorCode::ParseError, message + " at position " + std::to_string(position)),
          position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

}  // namespace ctour
