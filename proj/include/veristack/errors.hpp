#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace veristack {

enum class ErrorCode {
    InvalidArgument,
    LabelInvalid,
    ConfigInvalid,
    UrlInvalid,
    ExtractEmpty,
    FetchFailed,
    StatsEmptyInput,
    DimensionMismatch,
    ChunkNotInDocument,
    BackendUnavailable,
    BackendMalformed,
    BackendRejected,
    MissingEvidenceSet,
    ParseFailure,
    QaGenerationFailed,
    VerdictFailed,
    SelectedNotInSet,
    EmptyInstances,
    MissingGold,
    IoError,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. Every failure the contracts name maps onto one code.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message)
    {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

  private:
    ErrorCode code_;
    std::string detail_;
};

/// A pipeline failure attributed to the stage that raised it.
class StageError : public Error {
  public:
    StageError(std::string stage, ErrorCode code, const std::string& message)
        : Error(code, message), stage_(std::move(stage))
    {}

    const std::string& stage() const noexcept { return stage_; }

  private:
    std::string stage_;
};

}  // namespace veristack
