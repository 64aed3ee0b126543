#include "destigma/error.hpp"

namespace destigma {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
    case Errc::Io: return "Io";
    case Errc::MalformedInput: return "MalformedInput";
    case Errc::MissingSlot: return "MissingSlot";
    case Errc::UnknownTemplate: return "UnknownTemplate";
    case Errc::ProviderUnavailable: return "ProviderUnavailable";
    case Errc::AuthError: return "AuthError";
    case Errc::MockMiss: return "MockMiss";
    case Errc::UnknownModelRate: return "UnknownModelRate";
    case Errc::UnknownProvider: return "UnknownProvider";
    case Errc::ParseFailure: return "ParseFailure";
    case Errc::Precondition: return "Precondition";
    case Errc::ExplanationMissing: return "ExplanationMissing";
    case Errc::RewriteFailure: return "RewriteFailure";
    case Errc::EmptyText: return "EmptyText";
    case Errc::InsufficientVariation: return "InsufficientVariation";
    case Errc::EmptyConfusion: return "EmptyConfusion";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::DegenerateMarginals: return "DegenerateMarginals";
    case Errc::TooFewPairs: return "TooFewPairs";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::EmptyGold: return "EmptyGold";
    case Errc::InsufficientPairs: return "InsufficientPairs";
    case Errc::DuplicateJudgment: return "DuplicateJudgment";
    case Errc::InvalidCandidate: return "InvalidCandidate";
    case Errc::UnknownTask: return "UnknownTask";
    case Errc::Config: return "Config";
    case Errc::StageFailure: return "StageFailure";
    }
    return "Unknown";
}

Error::Error(Errc code, const std::string& detail)
    : std::runtime_error(std::string(errc_name(code)) + (detail.empty() ? "" : ": " + detail)),
      code_(code),
      detail_(detail) {}

}  // namespace destigma
