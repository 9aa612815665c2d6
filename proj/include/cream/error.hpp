#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cream {

enum class ErrorCode {
    // corpus
    MissingField,
    MalformedTimestamp,
    NegativeCount,
    EmptyText,
    InvalidField,
    MalformedRecord,
    DuplicateId,
    UnknownTopic,
    TaggerUnavailable,
    // pairing
    MissingAnnotation,
    InvalidConfig,
    // generator
    ProviderUnavailable,
    ProviderRefusal,
    EmptyResponse,
    // scorer
    MissingExplanation,
    EmptyTrainingSet,
    RemoteScorerUnavailable,
    ModelFormat,
    // tournament
    ParaphraserUnavailable,
    EmptyDraft,
    EmptyCandidateList,
    // eval
    LengthMismatch,
    EmptySet,
    UnmatchedPairId,
    MissingPrediction,
    CoverageMismatch,
    // server
    ModelNotLoaded,
    ValidationError,
    Conflict,
    Io,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every failure raised by the engine.
///
/// `field` and `index` are set when the failure is attributable to a single
/// input record (e.g. a malformed line of a tweet dump).
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message, std::string detail = {})
        : std::runtime_error(std::move(message)), code_(code), detail_(std::move(detail)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

    const std::optional<std::string>& field() const noexcept { return field_; }
    const std::optional<std::size_t>& index() const noexcept { return index_; }

    Error& at(std::string field, std::optional<std::size_t> index = std::nullopt) {
        field_ = std::move(field);
        index_ = index;
        return *this;
    }

private:
    ErrorCode code_;
    std::string detail_;
    std::optional<std::string> field_;
    std::optional<std::size_t> index_;
};

}  // namespace cream
