#pragma once

#include "personable/program.hpp"
#include "personable/specializer.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace personable {

// Acceptable leaves of an activity: leaves whose page id or content reference
// is listed, or whose path valuation satisfies every constraint.
struct Goal {
    std::set<std::string> items;
    Assignment constraints;

    [[nodiscard]] bool unspecified() const noexcept { return items.empty() && constraints.empty(); }
    [[nodiscard]] bool accepts(const Node& leaf, const Assignment& path_valuation) const;
};

enum class ActivityKind {
    Selection,
    // A request to discuss the available values of an attribute rather than
    // pick one. Partial evaluation cannot express it; see list_choices.
    MetaEnquiry,
};

struct ActivitySpec {
    std::string name;
    ActivityKind kind = ActivityKind::Selection;
    Assignment expressible;
    Goal goal;
    std::string enquiry_attribute;
};

enum class VerdictKind { Personable, UnpersonableMissingVariables, UnpersonableCompleteOnly, OutOfScope };

std::string_view to_string(VerdictKind kind);

struct PersonabilityVerdict {
    VerdictKind kind = VerdictKind::Personable;
    // UnpersonableMissingVariables: expressible variables no edge carries.
    std::vector<Variable> missing;
    // Personable: the assignment that realizes the activity.
    Assignment realizing;
    // UnpersonableCompleteOnly: the valuation that decides the whole goal path.
    Assignment complete_valuation;
    std::string note;
};

// Throws Error(InvalidActivity) if the expressible assignment is inconsistent
// or the goal is unspecified for a selection activity.
[[nodiscard]] PersonabilityVerdict assess(const InteractionProgram& p, const ActivitySpec& activity);

struct FrozenDiagnosis {
    bool frozen = false;
    std::size_t depth = 0;
    std::vector<Variable> single_level_edges;
};

[[nodiscard]] FrozenDiagnosis detect_frozen(const InteractionProgram& p);

struct AudienceRow {
    std::string activity;
    PersonabilityVerdict verdict;
};

struct AudienceReport {
    std::vector<AudienceRow> rows;
    std::map<VerdictKind, std::size_t> counts;
};

[[nodiscard]] AudienceReport audience(const InteractionProgram& p, std::span<const ActivitySpec> activities);

// Activity files: {"activities": [{"name", "kind": "selection" | "enquiry",
// "expressible": ["attr=value", ...] or {"attr=value": bool}, "goal": {"items": [...],
// "constraints": [...]}, "attribute": enquiry attribute}]}
[[nodiscard]] std::vector<ActivitySpec> parse_activities(const nlohmann::json& doc);
[[nodiscard]] std::vector<ActivitySpec> load_activities(const std::filesystem::path& file);

[[nodiscard]] nlohmann::json to_json(const PersonabilityVerdict& v);
[[nodiscard]] nlohmann::json to_json(const FrozenDiagnosis& d);
[[nodiscard]] nlohmann::json to_json(const AudienceReport& r);

} // namespace personable
