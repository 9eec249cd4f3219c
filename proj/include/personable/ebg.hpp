#pragma once

// Explanation-based generalization over interaction traces.
//
// A trace is explained against a small domain theory by ordered backward
// chaining; the proof is an explanation tree whose leaves are trace events.
// An operationality cut is an antichain frontier through that tree. Frontier
// leaves are subsumed by the system (their values are baked into a template);
// frontier interior nodes remain obligations the user discharges while
// browsing. The root-level cut yields the vanilla template.

#include "personable/program.hpp"
#include "personable/specializer.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace personable {

// predicate(arg, ...). Arguments beginning with '?' are variables.
struct Literal {
    std::string predicate;
    std::vector<std::string> args;

    [[nodiscard]] std::string str() const;
    [[nodiscard]] bool ground() const;
    static Literal parse(std::string_view text);

    auto operator<=>(const Literal&) const = default;
};

struct TheoryRule {
    std::string name;
    Literal consequent;
    std::vector<Literal> antecedents;
};

struct DomainTheory {
    Literal top{"successful_interaction", {}};
    std::vector<TheoryRule> rules;
    // Slots whose values belong to one user (payment details and the like).
    std::set<std::string> user_specific_slots;
    // Slots remembrance may store per user.
    std::set<std::string> rememberable_slots;

    // Throws Error(InvalidTheory) unless some rule concludes the top goal, no
    // rule uses it as an antecedent, and the rule graph is acyclic.
    void validate() const;
};

[[nodiscard]] DomainTheory parse_theory(const nlohmann::json& doc);
[[nodiscard]] nlohmann::json to_json(const DomainTheory& t);
[[nodiscard]] DomainTheory load_theory(const std::filesystem::path& file);

enum class EventKind { Click, OutOfTurn, FormFill, Template };

std::string_view to_string(EventKind kind);
EventKind event_kind_from_string(std::string_view text);

struct TraceEvent {
    EventKind kind = EventKind::Click;
    // Attribute for browse events, slot name for form fills.
    std::string name;
    std::string value;
    std::int64_t timestamp = 0;

    // selected(attr, value) for browse events, provided(slot, value) for form fills.
    [[nodiscard]] Literal as_literal() const;
    [[nodiscard]] bool browse() const noexcept { return kind == EventKind::Click || kind == EventKind::OutOfTurn; }

    friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct Trace {
    std::string user_id;
    std::string session_id;
    std::vector<TraceEvent> events;

    friend bool operator==(const Trace&, const Trace&) = default;
};

// Trace log: one event per line, tab separated:
//   user  session  kind  name  value  timestamp
// Blank lines and lines starting with '#' are ignored. Events are grouped into
// traces by (user, session) in order of first appearance.
[[nodiscard]] std::vector<Trace> parse_trace_log(std::istream& in);
[[nodiscard]] std::vector<Trace> load_trace_log(const std::filesystem::path& file);
void write_trace_log(std::ostream& out, std::span<const Trace> traces);

struct ExplanationNode {
    std::size_t id = 0;
    Literal literal;
    // Rule applied at an interior node; empty at leaves.
    std::string rule;
    // Index into the trace's events at leaves.
    std::optional<std::size_t> event;
    std::optional<std::size_t> parent;
    std::vector<std::size_t> children;
    // Other rules that would also have proved this node.
    std::vector<std::string> alternatives;

    [[nodiscard]] bool leaf() const noexcept { return event.has_value(); }
};

struct ExplanationTree {
    Trace trace;
    // Preorder; nodes[0] is the root.
    std::vector<ExplanationNode> nodes;
    std::vector<std::size_t> unexplained_events;

    [[nodiscard]] const ExplanationNode& root() const { return nodes.front(); }
    [[nodiscard]] const ExplanationNode& node(std::size_t id) const { return nodes.at(id); }
    [[nodiscard]] std::vector<std::size_t> leaves() const;
    // True when `descendant` equals `ancestor` or lies in its subtree.
    [[nodiscard]] bool dominates(std::size_t ancestor, std::size_t descendant) const;
};

// Throws Error(NoProof) listing the antecedents no event satisfies.
[[nodiscard]] ExplanationTree explain(const Trace& trace, const DomainTheory& theory);

struct OperationalityCut {
    // Sorted node ids.
    std::vector<std::size_t> frontier;

    friend bool operator==(const OperationalityCut&, const OperationalityCut&) = default;
};

[[nodiscard]] bool is_valid_cut(const ExplanationTree& t, const OperationalityCut& cut);
[[nodiscard]] OperationalityCut root_cut(const ExplanationTree& t);
[[nodiscard]] OperationalityCut leaf_cut(const ExplanationTree& t);
// `lower` lies at or below `upper`: every frontier node of `lower` is
// dominated by some frontier node of `upper`.
[[nodiscard]] bool cut_at_or_below(const ExplanationTree& t, const OperationalityCut& lower,
                                   const OperationalityCut& upper);

// All antichain frontiers with at most `max_frontier` nodes, root cut first.
// The root and leaf cuts are always included.
[[nodiscard]] std::vector<OperationalityCut> enumerate_cuts(const ExplanationTree& t,
                                                            std::size_t max_frontier = SIZE_MAX);

struct TemplateScope {
    // Empty for a global template.
    std::string user_id;

    [[nodiscard]] bool global() const noexcept { return user_id.empty(); }
    static TemplateScope everyone() { return {}; }
    static TemplateScope user(std::string id) { return {std::move(id)}; }

    friend bool operator==(const TemplateScope&, const TemplateScope&) = default;
};

struct Template {
    std::string name;
    std::string site_id;
    TemplateScope scope;
    // Browse variables fixed by the system, closed under exclusivity.
    Assignment baked;
    std::map<std::string, std::string> baked_slots;
    // Obligations left to the user, as literals.
    std::vector<std::string> free;
    SpecializationResult entry;

    [[nodiscard]] bool vanilla() const noexcept { return baked.empty() && baked_slots.empty(); }
    [[nodiscard]] std::size_t baked_event_count() const;
};

// Throws Error(ScopeViolation) when a global template would bake a
// user-specific slot and Error(InvalidCut) for a malformed cut.
[[nodiscard]] Template operationalize(const ExplanationTree& t, const OperationalityCut& cut,
                                      const TemplateScope& scope, const DomainTheory& theory,
                                      const InteractionProgram& base);

// A trace event is covered by a template when the template fixes the same
// name to the same value.
[[nodiscard]] bool template_consistent_with(const Template& tpl, const Trace& trace);
[[nodiscard]] std::size_t events_subsumed(const Template& tpl, const Trace& trace);

struct TemplateScore {
    std::size_t index = 0;  // into the scored template list
    std::string name;
    std::size_t applicable = 0;
    double coverage = 0.0;
    double savings = 0.0;

    [[nodiscard]] double utility() const noexcept { return coverage * savings; }
};

inline constexpr std::size_t kDefaultTopK = 5;

// Sorted by coverage x savings, capped at `top_k`; vanilla templates are
// always kept, appended after the cap when they did not make it.
[[nodiscard]] std::vector<TemplateScore> score_templates(std::span<const Template> templates,
                                                         std::span<const Trace> corpus,
                                                         std::size_t top_k = kDefaultTopK);

// Replays the trace's browse events that the template did not subsume on top
// of its entry program and returns the leaf reached, if the replay completes.
[[nodiscard]] std::optional<std::string> complete_with_template(const Template& tpl, const Trace& trace);
// The leaf the trace reaches on the unpersonalized program.
[[nodiscard]] std::optional<std::string> leaf_reached(const InteractionProgram& base, const Trace& trace);

// Every template for one trace: each cut, scoped per user and globally, with
// scope violations dropped and duplicates removed.
[[nodiscard]] std::vector<Template> derive_templates(const Trace& trace, const DomainTheory& theory,
                                                     const InteractionProgram& base,
                                                     std::size_t max_frontier = SIZE_MAX);

// Per-user remembrance of simple slot values, most recent value winning.
class Remembrance {
public:
    explicit Remembrance(DomainTheory theory, InteractionProgram base, std::size_t threshold = 1);

    // Explains the trace and records its rememberable slot values.
    void observe(const Trace& trace);

    // Leaf-level per-user template restricted to the rememberable slots, once
    // the user has at least `threshold` observed traces.
    [[nodiscard]] std::optional<Template> recall(const std::string& user_id) const;
    [[nodiscard]] std::size_t observed(const std::string& user_id) const;
    [[nodiscard]] std::vector<std::string> users() const;

private:
    struct Memory {
        std::size_t traces = 0;
        std::map<std::string, std::pair<std::int64_t, std::string>> slots;
    };

    DomainTheory theory_;
    InteractionProgram base_;
    std::size_t threshold_;
    std::map<std::string, Memory> users_;
};

[[nodiscard]] nlohmann::json to_json(const Template& t);
[[nodiscard]] Template template_from_json(const nlohmann::json& j, const InteractionProgram& base);
[[nodiscard]] nlohmann::json to_json(const ExplanationTree& t);
[[nodiscard]] nlohmann::json to_json(const Trace& t);
[[nodiscard]] Trace trace_from_json(const nlohmann::json& j);

} // namespace personable
