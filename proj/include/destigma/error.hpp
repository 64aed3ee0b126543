#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace destigma {

enum class Errc {
    Io,
    MalformedInput,
    MissingSlot,
    UnknownTemplate,
    ProviderUnavailable,
    AuthError,
    MockMiss,
    UnknownModelRate,
    UnknownProvider,
    ParseFailure,
    Precondition,
    ExplanationMissing,
    RewriteFailure,
    EmptyText,
    InsufficientVariation,
    EmptyConfusion,
    LengthMismatch,
    DegenerateMarginals,
    TooFewPairs,
    ZeroVariance,
    EmptyGold,
    InsufficientPairs,
    DuplicateJudgment,
    InvalidCandidate,
    UnknownTask,
    Config,
    StageFailure,
};

std::string_view errc_name(Errc code) noexcept;

// Every recoverable failure in the library is reported as an Error carrying
// one of the codes above; the message adds context (slot name, post id, ...).
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& detail);

    Errc code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    Errc code_;
    std::string detail_;
};

}  // namespace destigma
