#include "cream/error.hpp"

namespace cream {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingField: return "MissingField";
        case ErrorCode::MalformedTimestamp: return "MalformedTimestamp";
        case ErrorCode::NegativeCount: return "NegativeCount";
        case ErrorCode::EmptyText: return "EmptyText";
        case ErrorCode::InvalidField: return "InvalidField";
        case ErrorCode::MalformedRecord: return "MalformedRecord";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::UnknownTopic: return "UnknownTopic";
        case ErrorCode::TaggerUnavailable: return "TaggerUnavailable";
        case ErrorCode::MissingAnnotation: return "MissingAnnotation";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
        case ErrorCode::ProviderRefusal: return "ProviderRefusal";
        case ErrorCode::EmptyResponse: return "EmptyResponse";
        case ErrorCode::MissingExplanation: return "MissingExplanation";
        case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
        case ErrorCode::RemoteScorerUnavailable: return "RemoteScorerUnavailable";
        case ErrorCode::ModelFormat: return "ModelFormat";
        case ErrorCode::ParaphraserUnavailable: return "ParaphraserUnavailable";
        case ErrorCode::EmptyDraft: return "EmptyDraft";
        case ErrorCode::EmptyCandidateList: return "EmptyCandidateList";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::EmptySet: return "EmptySet";
        case ErrorCode::UnmatchedPairId: return "UnmatchedPairId";
        case ErrorCode::MissingPrediction: return "MissingPrediction";
        case ErrorCode::CoverageMismatch: return "CoverageMismatch";
        case ErrorCode::ModelNotLoaded: return "ModelNotLoaded";
        case ErrorCode::ValidationError: return "ValidationError";
        case ErrorCode::Conflict: return "Conflict";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace cream
