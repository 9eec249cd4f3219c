#include "personable/specializer.hpp"

namespace personable {

std::string_view to_string(SpecializationKind kind)
{
    switch (kind) {
    case SpecializationKind::Partial: return "partial";
    case SpecializationKind::Complete: return "complete";
    case SpecializationKind::Empty: return "empty";
    }
    return "unknown";
}

const InteractionProgram& SpecializationResult::specialized() const
{
    if (!program)
        throw Error(ErrorCode::InvariantViolation, "empty specialization has no program");
    return *program;
}

namespace {

void collect_pages(const Node& n, std::set<std::string>& out)
{
    out.insert(n.page_id);
    for (const auto& e : n.edges)
        collect_pages(e.child, out);
}

class Specializer {
public:
    Specializer(const Assignment& a, std::set<std::string>& eliminated) : assignment_(a), eliminated_(eliminated) {}

    // nullopt means the node is a dead end and must be dropped by its parent.
    std::optional<Node> run(const Node& n)
    {
        if (n.is_leaf())
            return n;

        std::vector<Edge> kept;
        kept.reserve(n.edges.size());
        for (const auto& e : n.edges) {
            const std::optional<bool> decided = assignment_.get(e.variable);
            if (decided == false) {
                collect_pages(e.child, eliminated_);
                continue;
            }
            std::optional<Node> child = run(e.child);
            if (!child)
                continue;
            kept.push_back(Edge{e.variable, e.anchor, e.resolved || decided == true, std::move(*child)});
        }

        if (kept.empty()) {
            // A page written without links but with content is a content page.
            if (n.edges.empty() && n.content)
                return Node::leaf(n.page_id, *n.content);
            eliminated_.insert(n.page_id);
            return std::nullopt;
        }
        if (kept.size() == 1 && kept.front().resolved) {
            eliminated_.insert(n.page_id);
            return std::move(kept.front().child);
        }
        Node out = Node::branch(n.page_id, std::move(kept));
        out.content = n.content;
        return out;
    }

private:
    const Assignment& assignment_;
    std::set<std::string>& eliminated_;
};

Assignment checked_closure(const Schema& schema, const Assignment& a)
{
    for (const auto& [v, value] : a.entries())
        if (!schema.contains(v))
            throw Error(ErrorCode::UnknownVariable, "variable " + v.str() + " is not part of the program schema",
                        {v.str()});
    return close_under_exclusivity(schema, a);
}

} // namespace

SpecializationResult partial_evaluate(const InteractionProgram& p, const Assignment& a)
{
    const Assignment closed = checked_closure(p.schema, a);

    SpecializationResult result;
    Specializer specializer(closed, result.eliminated);
    std::optional<Node> root = specializer.run(p.root);
    if (!root) {
        result.kind = SpecializationKind::Empty;
        return result;
    }
    result.kind = root->is_leaf() ? SpecializationKind::Complete : SpecializationKind::Partial;
    result.program = InteractionProgram{p.schema, std::move(*root)};
    return result;
}

SpecializationResult click(const InteractionProgram& p, std::string_view page_id, const Variable& variable)
{
    if (p.root.page_id != page_id)
        throw Error(ErrorCode::NoSuchEdge,
                    "page '" + std::string(page_id) + "' is not the current page '" + p.root.page_id + "'");
    bool found = false;
    for (const auto& e : p.root.edges)
        found = found || e.variable == variable;
    if (!found)
        throw Error(ErrorCode::NoSuchEdge,
                    "page '" + p.root.page_id + "' has no edge labelled " + variable.str());
    return partial_evaluate(p, assert_true(p.schema, variable));
}

SpecializationResult apply_sequence(const InteractionProgram& p, std::span<const Assignment> steps)
{
    Assignment all;
    for (const auto& step : steps) {
        for (const auto& [v, value] : step.entries())
            if (!p.schema.contains(v))
                throw Error(ErrorCode::UnknownVariable, "variable " + v.str() + " is not part of the program schema",
                            {v.str()});
        if (!all.merge(step))
            throw Error(ErrorCode::ConflictingSteps, "steps assign a variable both true and false");
    }
    if (!is_consistent(p.schema, all))
        throw Error(ErrorCode::ConflictingSteps, "steps are jointly inconsistent: " + all.str());
    try {
        (void)close_under_exclusivity(p.schema, all);
    } catch (const Error&) {
        throw Error(ErrorCode::ConflictingSteps, "steps are jointly inconsistent: " + all.str());
    }

    SpecializationResult acc;
    acc.kind = p.root.is_leaf() ? SpecializationKind::Complete : SpecializationKind::Partial;
    acc.program = p;
    for (const auto& step : steps) {
        SpecializationResult next = partial_evaluate(*acc.program, step);
        next.eliminated.insert(acc.eliminated.begin(), acc.eliminated.end());
        acc = std::move(next);
        if (acc.empty()) {
            collect_pages(p.root, acc.eliminated);
            break;
        }
    }
    return acc;
}

} // namespace personable
