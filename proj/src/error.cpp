#include "ctour/error.hpp"

namespace ctour {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MalformedInput: return "MalformedInput";
        case ErrorCode::EmptySelection: return "EmptySelection";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::UnknownFeature: return "UnknownFeature";
        case ErrorCode::InvalidRate: return "InvalidRate";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::DegenerateVector: return "DegenerateVector";
        case ErrorCode::InvalidCombination: return "InvalidCombination";
        case ErrorCode::TooFewRows: return "TooFewRows";
        case ErrorCode::PerplexityTooLarge: return "PerplexityTooLarge";
        case ErrorCode::SingleCluster: return "SingleCluster";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::NotApplicable: return "NotApplicable";
        case ErrorCode::MissingLabels: return "MissingLabels";
        case ErrorCode::TooFewFeatures: return "TooFewFeatures";
        case ErrorCode::UnknownCluster: return "UnknownCluster";
        case ErrorCode::AllParamsFixed: return "AllParamsFixed";
        case ErrorCode::NoViableCandidate: return "NoViableCandidate";
        case ErrorCode::NothingToUndo: return "NothingToUndo";
        case ErrorCode::NothingToRedo: return "NothingToRedo";
        case ErrorCode::SchemaMismatch: return "SchemaMismatch";
        case ErrorCode::CorruptPayload: return "CorruptPayload";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::PortInUse: return "PortInUse";
    }
    return "Unknown";
}

bool is_input_error(ErrorCode code) {
    switch (code) {
        case ErrorCode::MalformedInput:
        case ErrorCode::EmptySelection:
        case ErrorCode::ParseError:
        case ErrorCode::UnknownFeature:
        case ErrorCode::InvalidRate:
        case ErrorCode::InvalidArgument:
        case ErrorCode::DimensionMismatch:
        case ErrorCode::InvalidCombination:
        case ErrorCode::LengthMismatch:
        case ErrorCode::NotApplicable:
        case ErrorCode::MissingLabels:
        case ErrorCode::UnknownCluster:
        case ErrorCode::AllParamsFixed:
        case ErrorCode::SchemaMismatch:
        case ErrorCode::CorruptPayload:
        case ErrorCode::NotFound:
        case ErrorCode::PortInUse:
            return true;
        default:
            return false;
    }
}

}  // namespace ctour
