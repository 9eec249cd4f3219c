#pragma once

// Core value types for interaction programs.
//
// An interaction program is a rooted decision tree. Each edge is guarded by a
// variable, i.e. an (attribute, value) pair, and following the edge means the
// user has communicated that value. Leaves carry an opaque content reference.
// All types here are plain values: transformations build new programs.

#include "personable/error.hpp"

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace personable {

struct Variable {
    std::string attribute;
    std::string value;

    auto operator<=>(const Variable&) const = default;

    [[nodiscard]] std::string str() const { return attribute + "=" + value; }

    // Parses "attribute=value". Throws Error(ParseError) on malformed text.
    static Variable parse(std::string_view text);
};

struct Attribute {
    std::string name;
    std::vector<std::string> values;
    bool exclusive = true;

    [[nodiscard]] bool has_value(std::string_view value) const;

    friend bool operator==(const Attribute&, const Attribute&) = default;
};

class Schema {
public:
    Schema() = default;
    // Throws Error(SchemaError) on duplicate attribute names, duplicate
    // values within an attribute, or an attribute without values.
    explicit Schema(std::vector<Attribute> attributes);

    [[nodiscard]] const std::vector<Attribute>& attributes() const noexcept { return attributes_; }
    [[nodiscard]] const Attribute* find(std::string_view name) const;
    [[nodiscard]] bool contains(const Variable& v) const;
    // Position of the attribute in declaration order, or nullopt.
    [[nodiscard]] std::optional<std::size_t> index_of(std::string_view name) const;

    friend bool operator==(const Schema&, const Schema&) = default;

private:
    std::vector<Attribute> attributes_;
};

// A partial valuation of variables. Consistency and closure depend on the
// schema, so they live in free functions below.
class Assignment {
public:
    using Map = std::map<Variable, bool>;

    Assignment() = default;
    Assignment(std::initializer_list<std::pair<const Variable, bool>> entries) : entries_(entries) {}

    void set(const Variable& v, bool value) { entries_[v] = value; }
    void erase(const Variable& v) { entries_.erase(v); }
    [[nodiscard]] std::optional<bool> get(const Variable& v) const;
    [[nodiscard]] bool decides(const Variable& v) const { return entries_.contains(v); }
    [[nodiscard]] bool is_true(const Variable& v) const;
    [[nodiscard]] bool is_false(const Variable& v) const;

    [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] const Map& entries() const noexcept { return entries_; }
    [[nodiscard]] std::vector<Variable> true_variables() const;

    // The value this assignment gives to `attribute`, if some value is true.
    [[nodiscard]] std::optional<std::string> true_value_of(std::string_view attribute) const;

    // Entries of `other` added to this one. Returns false, leaving *this
    // untouched, when a variable would receive both values.
    bool merge(const Assignment& other);

    // Entries whose variable is not decided by `decided`.
    [[nodiscard]] Assignment without(const Assignment& decided) const;

    [[nodiscard]] std::string str() const;

    friend bool operator==(const Assignment&, const Assignment&) = default;

private:
    Map entries_;
};

// No exclusive attribute has two values mapped true.
[[nodiscard]] bool is_consistent(const Schema& schema, const Assignment& a);

// Adds (a, v') -> false for every other value v' of an exclusive attribute a
// that has some (a, v) -> true. Throws Error(InconsistentAssignment) if that
// contradicts an existing entry.
[[nodiscard]] Assignment close_under_exclusivity(const Schema& schema, Assignment a);

// Closure of {v -> true}.
[[nodiscard]] Assignment assert_true(const Schema& schema, const Variable& v);

enum class NodeKind { Branch, Leaf };

struct Edge;

struct Node {
    NodeKind kind = NodeKind::Leaf;
    std::string page_id;
    // Required for leaves. Branches may carry content as well.
    std::optional<std::string> content;
    std::vector<Edge> edges;

    [[nodiscard]] bool is_leaf() const noexcept { return kind == NodeKind::Leaf; }

    static Node leaf(std::string page_id, std::string content);
    static Node branch(std::string page_id, std::vector<Edge> edges = {});
};

struct Edge {
    Variable variable;
    std::string anchor;
    // Set once the variable has been decided true by specialization while the
    // edge still has surviving siblings.
    bool resolved = false;
    Node child;
};

struct InteractionProgram {
    Schema schema;
    Node root;
};

struct CatalogItem {
    std::string id;
    std::string content;
    std::map<std::string, std::string> values;
};

struct Catalog {
    std::vector<CatalogItem> items;
};

// Throws Error(SchemaError) when an item uses an unknown attribute or value
// or item ids repeat.
void validate_catalog(const Schema& schema, const Catalog& catalog);

struct PathValuation {
    std::string leaf;
    Assignment valuation;
    std::size_t length = 0;

    friend bool operator==(const PathValuation&, const PathValuation&) = default;
};

enum class ViolationCode {
    EmptyPageId,
    DuplicatePageId,
    DuplicateSiblingVariable,
    UnknownVariable,
    PathConflict,
    EmptyBranch,
    LeafWithEdges,
    LeafWithoutContent,
};

std::string_view to_string(ViolationCode code);

struct Violation {
    ViolationCode code;
    std::string page_id;
    std::string message;
};

using ValidationReport = std::vector<Violation>;

[[nodiscard]] ValidationReport validate_program(const InteractionProgram& p);

// One entry per leaf, left to right.
[[nodiscard]] std::vector<PathValuation> enumerate_paths(const InteractionProgram& p);

// Longest root-to-leaf edge count; a lone leaf has depth 0.
[[nodiscard]] std::size_t depth(const Node& root);
[[nodiscard]] std::size_t leaf_count(const Node& root);
[[nodiscard]] std::set<std::string> page_ids(const Node& root);
[[nodiscard]] std::vector<std::string> leaf_ids(const Node& root);
// Variables labelling at least one edge.
[[nodiscard]] std::set<Variable> variables_in_use(const Node& root);
[[nodiscard]] const Node* find_page(const Node& root, std::string_view page_id);

enum class EdgeOrder { Significant, Ignored };

[[nodiscard]] bool structurally_equal(const Node& a, const Node& b, EdgeOrder order = EdgeOrder::Significant);
[[nodiscard]] bool structurally_equal(const InteractionProgram& a, const InteractionProgram& b,
                                      EdgeOrder order = EdgeOrder::Significant);

// Indented outline, one page per line. Used for diagnostics and the CLI.
[[nodiscard]] std::string render_outline(const Node& root);

} // namespace personable
