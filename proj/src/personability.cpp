#include "personable/personability.hpp"
#include "personable/site.hpp"

#include <algorithm>
#include <fstream>

namespace personable {

std::string_view to_string(VerdictKind kind)
{
    switch (kind) {
    case VerdictKind::Personable: return "personable";
    case VerdictKind::UnpersonableMissingVariables: return "unpersonable-missing-variables";
    case VerdictKind::UnpersonableCompleteOnly: return "unpersonable-complete-only";
    case VerdictKind::OutOfScope: return "out-of-scope";
    }
    return "unknown";
}

bool Goal::accepts(const Node& leaf, const Assignment& path_valuation) const
{
    if (!items.empty()) {
        if (items.contains(leaf.page_id) || (leaf.content && items.contains(*leaf.content)))
            return true;
        if (constraints.empty())
            return false;
    }
    for (const auto& [v, value] : constraints.entries()) {
        if (value && !path_valuation.is_true(v))
            return false;
        if (!value && path_valuation.is_true(v))
            return false;
    }
    return true;
}

namespace {

// Leaves of `root` keyed by page id.
void index_leaves(const Node& n, std::map<std::string, const Node*>& out)
{
    if (n.is_leaf())
        out.emplace(n.page_id, &n);
    for (const auto& e : n.edges)
        index_leaves(e.child, out);
}

struct GoalIndex {
    std::set<std::string> goal_leaves;
    std::map<std::string, Assignment> valuations;
};

GoalIndex index_goal(const InteractionProgram& p, const Goal& goal)
{
    GoalIndex idx;
    std::map<std::string, const Node*> leaves;
    index_leaves(p.root, leaves);
    for (auto& path : enumerate_paths(p)) {
        if (goal.accepts(*leaves.at(path.leaf), path.valuation))
            idx.goal_leaves.insert(path.leaf);
        idx.valuations.emplace(path.leaf, std::move(path.valuation));
    }
    return idx;
}

std::vector<std::string> surviving_leaves(const SpecializationResult& r)
{
    if (r.empty())
        return {};
    return leaf_ids(r.program->root);
}

bool only_goal_leaves(const SpecializationResult& r, const GoalIndex& idx)
{
    const auto leaves = surviving_leaves(r);
    return !leaves.empty() &&
           std::all_of(leaves.begin(), leaves.end(), [&](const std::string& l) { return idx.goal_leaves.contains(l); });
}

} // namespace

PersonabilityVerdict assess(const InteractionProgram& p, const ActivitySpec& activity)
{
    PersonabilityVerdict verdict;
    if (activity.kind == ActivityKind::MetaEnquiry) {
        verdict.kind = VerdictKind::OutOfScope;
        verdict.note = "enquiry about the values of '" + activity.enquiry_attribute +
                       "' is not a selection; answer it with list_choices";
        return verdict;
    }
    if (activity.goal.unspecified())
        throw Error(ErrorCode::InvalidActivity, "activity '" + activity.name + "' has no goal");
    if (!is_consistent(p.schema, activity.expressible))
        throw Error(ErrorCode::InvalidActivity,
                    "activity '" + activity.name + "' expresses an inconsistent assignment " + activity.expressible.str());

    const std::set<Variable> in_use = variables_in_use(p.root);
    for (const Variable& v : activity.expressible.true_variables())
        if (!in_use.contains(v))
            verdict.missing.push_back(v);
    if (!verdict.missing.empty()) {
        verdict.kind = VerdictKind::UnpersonableMissingVariables;
        verdict.note = "no program variable lets the user express it";
        return verdict;
    }

    std::vector<Variable> asserted;
    Assignment known;
    for (const auto& [v, value] : activity.expressible.entries()) {
        if (!p.schema.contains(v))
            continue;
        known.set(v, value);
        if (value)
            asserted.push_back(v);
    }
    Assignment expressible;
    try {
        expressible = close_under_exclusivity(p.schema, known);
    } catch (const Error& e) {
        throw Error(ErrorCode::InvalidActivity, "activity '" + activity.name + "': " + e.what());
    }

    const GoalIndex goal = index_goal(p, activity.goal);
    const SpecializationResult r = partial_evaluate(p, expressible);
    const auto leaves = surviving_leaves(r);
    const bool reaches_goal =
        std::any_of(leaves.begin(), leaves.end(), [&](const std::string& l) { return goal.goal_leaves.contains(l); });
    if (!reaches_goal) {
        verdict.kind = VerdictKind::UnpersonableMissingVariables;
        verdict.note = r.empty() ? "the expressed information admits no leaf"
                                 : "no goal leaf survives the expressed information";
        return verdict;
    }

    if (!r.complete()) {
        verdict.kind = VerdictKind::Personable;
        verdict.realizing = expressible;
        return verdict;
    }

    // Complete evaluation: look for the smallest proper subset of the
    // asserted variables that already narrows the program to goal leaves while
    // leaving interaction.
    const std::size_t n = asserted.size();
    for (std::size_t size = 0; size < n; ++size) {
        std::vector<bool> pick(n, false);
        std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(size), true);
        do {
            Assignment subset;
            for (std::size_t i = 0; i < n; ++i)
                if (pick[i])
                    subset.set(asserted[i], true);
            subset = close_under_exclusivity(p.schema, subset);
            const SpecializationResult sub = partial_evaluate(p, subset);
            if (!sub.empty() && !sub.complete() && only_goal_leaves(sub, goal)) {
                verdict.kind = VerdictKind::Personable;
                verdict.realizing = subset;
                verdict.note = "a proper subset of the expressed information suffices";
                return verdict;
            }
        } while (std::prev_permutation(pick.begin(), pick.end()));
    }

    verdict.kind = VerdictKind::UnpersonableCompleteOnly;
    verdict.complete_valuation = goal.valuations.at(r.program->root.page_id);
    verdict.note = "the activity is realized only by deciding every variable on the goal path";
    return verdict;
}

FrozenDiagnosis detect_frozen(const InteractionProgram& p)
{
    FrozenDiagnosis d;
    d.depth = depth(p.root);
    d.frozen = d.depth <= 1;
    if (d.frozen)
        for (const auto& e : p.root.edges)
            d.single_level_edges.push_back(e.variable);
    return d;
}

AudienceReport audience(const InteractionProgram& p, std::span<const ActivitySpec> activities)
{
    AudienceReport report;
    for (const auto& a : activities) {
        AudienceRow row{a.name, assess(p, a)};
        ++report.counts[row.verdict.kind];
        report.rows.push_back(std::move(row));
    }
    return report;
}

namespace {

using nlohmann::json;

Assignment assignment_field(const json& j)
{
    if (j.is_array()) {
        Assignment a;
        for (const auto& v : j)
            a.set(Variable::parse(v.get<std::string>()), true);
        return a;
    }
    return assignment_from_json(j);
}

json variables_json(const std::vector<Variable>& vs)
{
    json out = json::array();
    for (const auto& v : vs)
        out.push_back(v.str());
    return out;
}

} // namespace

std::vector<ActivitySpec> parse_activities(const json& doc)
{
    try {
        std::vector<ActivitySpec> out;
        for (const auto& a : doc.at("activities")) {
            ActivitySpec spec;
            spec.name = a.at("name").get<std::string>();
            const std::string kind = a.value("kind", std::string("selection"));
            if (kind == "enquiry") {
                spec.kind = ActivityKind::MetaEnquiry;
                spec.enquiry_attribute = a.at("attribute").get<std::string>();
            } else if (kind != "selection") {
                throw Error(ErrorCode::InvalidActivity, "unknown activity kind '" + kind + "'");
            }
            if (a.contains("expressible"))
                spec.expressible = assignment_field(a.at("expressible"));
            if (a.contains("goal")) {
                const json& g = a.at("goal");
                for (const auto& item : g.value("items", json::array()))
                    spec.goal.items.insert(item.get<std::string>());
                if (g.contains("constraints"))
                    spec.goal.constraints = assignment_field(g.at("constraints"));
            }
            out.push_back(std::move(spec));
        }
        return out;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidActivity, std::string("malformed activities: ") + e.what());
    }
}

std::vector<ActivitySpec> load_activities(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in)
        throw Error(ErrorCode::ParseError, "cannot open activities " + file.string());
    try {
        return parse_activities(json::parse(in));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, file.string() + ": " + e.what());
    }
}

json to_json(const PersonabilityVerdict& v)
{
    json j{{"verdict", std::string(to_string(v.kind))}, {"note", v.note}};
    if (!v.missing.empty())
        j["missing"] = variables_json(v.missing);
    if (v.kind == VerdictKind::Personable)
        j["realizing"] = to_json(v.realizing);
    if (v.kind == VerdictKind::UnpersonableCompleteOnly)
        j["complete_valuation"] = to_json(v.complete_valuation);
    return j;
}

json to_json(const FrozenDiagnosis& d)
{
    return json{{"frozen", d.frozen}, {"depth", d.depth}, {"single_level_edges", variables_json(d.single_level_edges)}};
}

json to_json(const AudienceReport& r)
{
    json rows = json::array();
    for (const auto& row : r.rows) {
        json j = to_json(row.verdict);
        j["activity"] = row.activity;
        rows.push_back(std::move(j));
    }
    json counts = json::object();
    for (const auto& [kind, n] : r.counts)
        counts[std::string(to_string(kind))] = n;
    return json{{"rows", rows}, {"counts", counts}};
}

} // namespace personable
