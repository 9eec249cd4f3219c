#include "personable/program.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace personable {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::InconsistentAssignment: return "InconsistentAssignment";
    case ErrorCode::UnknownVariable: return "UnknownVariable";
    case ErrorCode::NoSuchEdge: return "NoSuchEdge";
    case ErrorCode::ConflictingSteps: return "ConflictingSteps";
    case ErrorCode::InvalidActivity: return "InvalidActivity";
    case ErrorCode::Contradiction: return "Contradiction";
    case ErrorCode::AllTermsUnknown: return "AllTermsUnknown";
    case ErrorCode::LexiconError: return "LexiconError";
    case ErrorCode::RuleCycle: return "RuleCycle";
    case ErrorCode::AmbiguousLeaf: return "AmbiguousLeaf";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::DuplicateAttributeInLabel: return "DuplicateAttributeInLabel";
    case ErrorCode::SizeLimitExceeded: return "SizeLimitExceeded";
    case ErrorCode::NoProof: return "NoProof";
    case ErrorCode::InvalidTheory: return "InvalidTheory";
    case ErrorCode::InvalidCut: return "InvalidCut";
    case ErrorCode::ScopeViolation: return "ScopeViolation";
    case ErrorCode::UnknownSite: return "UnknownSite";
    case ErrorCode::UnknownTemplate: return "UnknownTemplate";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::UnknownAttribute: return "UnknownAttribute";
    case ErrorCode::ScopeMismatch: return "ScopeMismatch";
    case ErrorCode::SessionNotActive: return "SessionNotActive";
    case ErrorCode::NotSaved: return "NotSaved";
    case ErrorCode::NotCompleted: return "NotCompleted";
    case ErrorCode::CorruptRecord: return "CorruptRecord";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    }
    return "Unknown";
}

std::string_view to_string(ViolationCode code)
{
    switch (code) {
    case ViolationCode::EmptyPageId: return "empty-page-id";
    case ViolationCode::DuplicatePageId: return "duplicate-page-id";
    case ViolationCode::DuplicateSiblingVariable: return "duplicate-sibling-variable";
    case ViolationCode::UnknownVariable: return "unknown-variable";
    case ViolationCode::PathConflict: return "path-conflict";
    case ViolationCode::EmptyBranch: return "empty-branch";
    case ViolationCode::LeafWithEdges: return "leaf-with-edges";
    case ViolationCode::LeafWithoutContent: return "leaf-without-content";
    }
    return "unknown";
}

Variable Variable::parse(std::string_view text)
{
    const auto eq = text.find('=');
    if (eq == std::string_view::npos || eq == 0 || eq + 1 == text.size())
        throw Error(ErrorCode::ParseError, "expected attribute=value, got '" + std::string(text) + "'");
    return Variable{std::string(text.substr(0, eq)), std::string(text.substr(eq + 1))};
}

bool Attribute::has_value(std::string_view value) const
{
    return std::find(values.begin(), values.end(), value) != values.end();
}

Schema::Schema(std::vector<Attribute> attributes) : attributes_(std::move(attributes))
{
    std::set<std::string> names;
    for (const auto& attr : attributes_) {
        if (attr.name.empty())
            throw Error(ErrorCode::SchemaError, "attribute with empty name");
        if (!names.insert(attr.name).second)
            throw Error(ErrorCode::SchemaError, "duplicate attribute '" + attr.name + "'");
        if (attr.values.empty())
            throw Error(ErrorCode::SchemaError, "attribute '" + attr.name + "' has no values");
        std::set<std::string> seen;
        for (const auto& v : attr.values)
            if (!seen.insert(v).second)
                throw Error(ErrorCode::SchemaError, "duplicate value '" + v + "' in attribute '" + attr.name + "'");
    }
}

const Attribute* Schema::find(std::string_view name) const
{
    for (const auto& attr : attributes_)
        if (attr.name == name)
            return &attr;
    return nullptr;
}

bool Schema::contains(const Variable& v) const
{
    const Attribute* attr = find(v.attribute);
    return attr != nullptr && attr->has_value(v.value);
}

std::optional<std::size_t> Schema::index_of(std::string_view name) const
{
    for (std::size_t i = 0; i < attributes_.size(); ++i)
        if (attributes_[i].name == name)
            return i;
    return std::nullopt;
}

std::optional<bool> Assignment::get(const Variable& v) const
{
    auto it = entries_.find(v);
    if (it == entries_.end())
        return std::nullopt;
    return it->second;
}

bool Assignment::is_true(const Variable& v) const
{
    auto it = entries_.find(v);
    return it != entries_.end() && it->second;
}

bool Assignment::is_false(const Variable& v) const
{
    auto it = entries_.find(v);
    return it != entries_.end() && !it->second;
}

std::vector<Variable> Assignment::true_variables() const
{
    std::vector<Variable> out;
    for (const auto& [v, value] : entries_)
        if (value)
            out.push_back(v);
    return out;
}

std::optional<std::string> Assignment::true_value_of(std::string_view attribute) const
{
    for (const auto& [v, value] : entries_)
        if (value && v.attribute == attribute)
            return v.value;
    return std::nullopt;
}

bool Assignment::merge(const Assignment& other)
{
    for (const auto& [v, value] : other.entries_) {
        auto it = entries_.find(v);
        if (it != entries_.end() && it->second != value)
            return false;
    }
    for (const auto& [v, value] : other.entries_)
        entries_[v] = value;
    return true;
}

Assignment Assignment::without(const Assignment& decided) const
{
    Assignment out;
    for (const auto& [v, value] : entries_)
        if (!decided.decides(v))
            out.entries_.emplace(v, value);
    return out;
}

std::string Assignment::str() const
{
    std::ostringstream os;
    os << '{';
    bool first = true;
    for (const auto& [v, value] : entries_) {
        if (!first)
            os << ", ";
        first = false;
        os << v.str() << ':' << (value ? "true" : "false");
    }
    os << '}';
    return os.str();
}

bool is_consistent(const Schema& schema, const Assignment& a)
{
    std::set<std::string> seen;
    for (const auto& [v, value] : a.entries()) {
        if (!value)
            continue;
        const Attribute* attr = schema.find(v.attribute);
        if (attr == nullptr || !attr->exclusive)
            continue;
        if (!seen.insert(v.attribute).second)
            return false;
    }
    return true;
}

Assignment close_under_exclusivity(const Schema& schema, Assignment a)
{
    if (!is_consistent(schema, a))
        throw Error(ErrorCode::InconsistentAssignment,
                    "assignment sets two values of an exclusive attribute: " + a.str());
    for (const Variable& v : a.true_variables()) {
        const Attribute* attr = schema.find(v.attribute);
        if (attr == nullptr || !attr->exclusive)
            continue;
        for (const auto& other : attr->values) {
            if (other == v.value)
                continue;
            Variable conflicting{v.attribute, other};
            if (a.is_true(conflicting))
                throw Error(ErrorCode::InconsistentAssignment,
                            "closure of " + v.str() + " contradicts " + conflicting.str());
            a.set(conflicting, false);
        }
    }
    return a;
}

Assignment assert_true(const Schema& schema, const Variable& v)
{
    Assignment a;
    a.set(v, true);
    return close_under_exclusivity(schema, std::move(a));
}

Node Node::leaf(std::string page_id, std::string content)
{
    Node n;
    n.kind = NodeKind::Leaf;
    n.page_id = std::move(page_id);
    n.content = std::move(content);
    return n;
}

Node Node::branch(std::string page_id, std::vector<Edge> edges)
{
    Node n;
    n.kind = NodeKind::Branch;
    n.page_id = std::move(page_id);
    n.edges = std::move(edges);
    return n;
}

void validate_catalog(const Schema& schema, const Catalog& catalog)
{
    std::set<std::string> ids;
    for (const auto& item : catalog.items) {
        if (item.id.empty())
            throw Error(ErrorCode::SchemaError, "catalog item with empty id");
        if (!ids.insert(item.id).second)
            throw Error(ErrorCode::SchemaError, "duplicate catalog item id '" + item.id + "'");
        for (const auto& [attr, value] : item.values)
            if (!schema.contains(Variable{attr, value}))
                throw Error(ErrorCode::SchemaError,
                            "catalog item '" + item.id + "' uses unknown variable " + attr + "=" + value);
    }
}

namespace {

void validate_node(const InteractionProgram& p, const Node& n, std::map<std::string, std::string>& path_values,
                   std::set<std::string>& pages, ValidationReport& report)
{
    if (n.page_id.empty())
        report.push_back({ViolationCode::EmptyPageId, n.page_id, "page without id"});
    else if (!pages.insert(n.page_id).second)
        report.push_back({ViolationCode::DuplicatePageId, n.page_id, "page id '" + n.page_id + "' repeats"});

    if (n.is_leaf()) {
        if (!n.edges.empty())
            report.push_back({ViolationCode::LeafWithEdges, n.page_id, "leaf '" + n.page_id + "' has outgoing edges"});
        if (!n.content || n.content->empty())
            report.push_back(
                {ViolationCode::LeafWithoutContent, n.page_id, "leaf '" + n.page_id + "' has no content reference"});
        return;
    }

    if (n.edges.empty())
        report.push_back({ViolationCode::EmptyBranch, n.page_id, "branch '" + n.page_id + "' has no edges"});

    std::set<Variable> siblings;
    for (const auto& e : n.edges) {
        if (!siblings.insert(e.variable).second)
            report.push_back({ViolationCode::DuplicateSiblingVariable, n.page_id,
                              "branch '" + n.page_id + "' has two edges labelled " + e.variable.str()});
        const Attribute* attr = p.schema.find(e.variable.attribute);
        if (attr == nullptr || !attr->has_value(e.variable.value)) {
            report.push_back({ViolationCode::UnknownVariable, n.page_id,
                              "edge " + e.variable.str() + " under '" + n.page_id + "' is not in the schema"});
            validate_node(p, e.child, path_values, pages, report);
            continue;
        }
        bool pushed = false;
        if (attr->exclusive) {
            auto it = path_values.find(attr->name);
            if (it != path_values.end() && it->second != e.variable.value) {
                report.push_back({ViolationCode::PathConflict, e.child.page_id,
                                  "path to '" + e.child.page_id + "' sets " + attr->name + " to both " + it->second +
                                      " and " + e.variable.value});
            } else if (it == path_values.end()) {
                path_values.emplace(attr->name, e.variable.value);
                pushed = true;
            }
        }
        validate_node(p, e.child, path_values, pages, report);
        if (pushed)
            path_values.erase(attr->name);
    }
}

void collect_paths(const Schema& schema, const Node& n, Assignment& on_path, std::size_t length,
                   std::vector<PathValuation>& out)
{
    if (n.is_leaf() || n.edges.empty()) {
        if (n.is_leaf())
            out.push_back({n.page_id, close_under_exclusivity(schema, on_path), length});
        return;
    }
    for (const auto& e : n.edges) {
        const bool had = on_path.decides(e.variable);
        on_path.set(e.variable, true);
        collect_paths(schema, e.child, on_path, length + 1, out);
        if (!had)
            on_path.erase(e.variable);
    }
}

} // namespace

ValidationReport validate_program(const InteractionProgram& p)
{
    ValidationReport report;
    std::map<std::string, std::string> path_values;
    std::set<std::string> pages;
    validate_node(p, p.root, path_values, pages, report);
    return report;
}

std::vector<PathValuation> enumerate_paths(const InteractionProgram& p)
{
    std::vector<PathValuation> out;
    Assignment on_path;
    collect_paths(p.schema, p.root, on_path, 0, out);
    return out;
}

std::size_t depth(const Node& root)
{
    std::size_t best = 0;
    for (const auto& e : root.edges)
        best = std::max(best, 1 + depth(e.child));
    return best;
}

std::size_t leaf_count(const Node& root)
{
    if (root.is_leaf())
        return 1;
    std::size_t n = 0;
    for (const auto& e : root.edges)
        n += leaf_count(e.child);
    return n;
}

std::set<std::string> page_ids(const Node& root)
{
    std::set<std::string> out;
    std::function<void(const Node&)> walk = [&](const Node& n) {
        out.insert(n.page_id);
        for (const auto& e : n.edges)
            walk(e.child);
    };
    walk(root);
    return out;
}

std::vector<std::string> leaf_ids(const Node& root)
{
    std::vector<std::string> out;
    std::function<void(const Node&)> walk = [&](const Node& n) {
        if (n.is_leaf())
            out.push_back(n.page_id);
        for (const auto& e : n.edges)
            walk(e.child);
    };
    walk(root);
    return out;
}

std::set<Variable> variables_in_use(const Node& root)
{
    std::set<Variable> out;
    std::function<void(const Node&)> walk = [&](const Node& n) {
        for (const auto& e : n.edges) {
            out.insert(e.variable);
            walk(e.child);
        }
    };
    walk(root);
    return out;
}

const Node* find_page(const Node& root, std::string_view page_id)
{
    if (root.page_id == page_id)
        return &root;
    for (const auto& e : root.edges)
        if (const Node* hit = find_page(e.child, page_id))
            return hit;
    return nullptr;
}

namespace {

bool same_edge_header(const Edge& a, const Edge& b)
{
    return a.variable == b.variable && a.anchor == b.anchor && a.resolved == b.resolved;
}

} // namespace

bool structurally_equal(const Node& a, const Node& b, EdgeOrder order)
{
    if (a.kind != b.kind || a.page_id != b.page_id || a.content != b.content || a.edges.size() != b.edges.size())
        return false;
    if (order == EdgeOrder::Significant) {
        for (std::size_t i = 0; i < a.edges.size(); ++i) {
            if (!same_edge_header(a.edges[i], b.edges[i]))
                return false;
            if (!structurally_equal(a.edges[i].child, b.edges[i].child, order))
                return false;
        }
        return true;
    }
    // Sibling variables are distinct in valid programs, so match by variable.
    for (const auto& ea : a.edges) {
        auto it = std::find_if(b.edges.begin(), b.edges.end(),
                               [&](const Edge& eb) { return eb.variable == ea.variable; });
        if (it == b.edges.end() || !same_edge_header(ea, *it))
            return false;
        if (!structurally_equal(ea.child, it->child, order))
            return false;
    }
    return true;
}

bool structurally_equal(const InteractionProgram& a, const InteractionProgram& b, EdgeOrder order)
{
    return a.schema == b.schema && structurally_equal(a.root, b.root, order);
}

std::string render_outline(const Node& root)
{
    std::ostringstream os;
    std::function<void(const Node&, int)> walk = [&](const Node& n, int indent) {
        os << std::string(static_cast<std::size_t>(indent) * 2, ' ') << (n.is_leaf() ? "leaf " : "page ")
           << n.page_id;
        if (n.content)
            os << " [" << *n.content << ']';
        os << '\n';
        for (const auto& e : n.edges) {
            os << std::string(static_cast<std::size_t>(indent) * 2 + 2, ' ') << "-- " << e.variable.str();
            if (!e.anchor.empty() && e.anchor != e.variable.value)
                os << " \"" << e.anchor << '"';
            if (e.resolved)
                os << " (resolved)";
            os << '\n';
            walk(e.child, indent + 2);
        }
    };
    walk(root, 0);
    return os.str();
}

} // namespace personable
