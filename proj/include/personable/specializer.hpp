#pragma once

// Partial evaluation of interaction programs.
//
// Specializing a program with respect to an assignment deletes every edge
// whose variable is false, marks edges whose variable is true as resolved,
// splices a branch away when its only surviving edge is resolved, and removes
// dead ends (branches left with no edges and no content) to a fixpoint.
//
// Contract: the leaves of the result are exactly the leaves of the input whose
// path valuations are consistent with the assignment.

#include "personable/program.hpp"

#include <optional>
#include <set>
#include <span>
#include <string>

namespace personable {

enum class SpecializationKind { Partial, Complete, Empty };

std::string_view to_string(SpecializationKind kind);

struct SpecializationResult {
    SpecializationKind kind = SpecializationKind::Empty;
    // Absent exactly when kind == Empty.
    std::optional<InteractionProgram> program;
    // Pages present in the input but not in the output.
    std::set<std::string> eliminated;

    [[nodiscard]] bool empty() const noexcept { return kind == SpecializationKind::Empty; }
    [[nodiscard]] bool complete() const noexcept { return kind == SpecializationKind::Complete; }
    // Throws Error(InvariantViolation) on an Empty result.
    [[nodiscard]] const InteractionProgram& specialized() const;
};

// Throws Error(UnknownVariable) if `a` mentions a variable outside the
// program's schema and Error(InconsistentAssignment) if it is not consistent.
// The assignment is closed under exclusivity before use.
[[nodiscard]] SpecializationResult partial_evaluate(const InteractionProgram& p, const Assignment& a);

// A click on an edge of the current root page. Throws Error(NoSuchEdge) if
// `page_id` is not the root or no root edge carries `variable`.
[[nodiscard]] SpecializationResult click(const InteractionProgram& p, std::string_view page_id,
                                         const Variable& variable);

// Folds partial_evaluate over `steps`. Throws Error(ConflictingSteps) when
// the union of the steps is inconsistent.
[[nodiscard]] SpecializationResult apply_sequence(const InteractionProgram& p, std::span<const Assignment> steps);

} // namespace personable
