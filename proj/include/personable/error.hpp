#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace personable {

enum class ErrorCode {
    InconsistentAssignment,
    UnknownVariable,
    NoSuchEdge,
    ConflictingSteps,
    InvalidActivity,
    Contradiction,
    AllTermsUnknown,
    LexiconError,
    RuleCycle,
    AmbiguousLeaf,
    ParseError,
    SchemaError,
    DuplicateAttributeInLabel,
    SizeLimitExceeded,
    NoProof,
    InvalidTheory,
    InvalidCut,
    ScopeViolation,
    UnknownSite,
    UnknownTemplate,
    UnknownSession,
    UnknownAttribute,
    ScopeMismatch,
    SessionNotActive,
    NotSaved,
    NotCompleted,
    CorruptRecord,
    InvariantViolation,
};

std::string_view to_string(ErrorCode code);

// All library failures surface as this exception. `details` carries
// structured context such as a derivation chain or a list of missing items.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::vector<std::string> details = {})
        : std::runtime_error(message), code_(code), details_(std::move(details)) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    [[nodiscard]] const std::vector<std::string>& details() const noexcept { return details_; }

private:
    ErrorCode code_;
    std::vector<std::string> details_;
};

} // namespace personable
