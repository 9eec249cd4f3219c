#pragma once

// Site descriptions and program construction.
//
// A site description is a UTF-8 JSON document with these top-level keys:
//
//   site      string id (required)
//   title     free text
//   schema    [{ "name", "values": [...], "exclusive": bool = true }]
//   catalog   { "order": [attribute...], "items": [{ "id", "content", "values": {attr: value} }] }
//   pages     [{ "id", "content"?, "edges"?: [{ "var" | "vars", "anchor"?, "to" }] }]
//             the first page is the root; a page without "edges" is a leaf
//   lexicon   { term: ["attr=value", ...] }
//   implies   [{ "name", "if": ["attr=value", ...], "then": ["attr=value", ...] }]
//   content   { content-ref: { "title", "body" } }
//   slots     [slot-name]   form fields the site requires besides browsing
//
// Exactly one of `catalog` and `pages` must be present. Any other top-level
// key is rejected. Edges given with "vars" are coalesced links and are split
// into single-variable chains in schema attribute order on load. A page
// referenced by more than one edge is duplicated so the program stays a tree.

#include "personable/input_mapper.hpp"
#include "personable/program.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace personable {

struct ContentEntry {
    std::string title;
    std::string body;

    friend bool operator==(const ContentEntry&, const ContentEntry&) = default;
};

struct Site {
    std::string id;
    std::string title;
    InteractionProgram program;
    Lexicon lexicon;
    std::vector<ImplicationRule> rules;
    std::map<std::string, ContentEntry> content;
    std::vector<std::string> slots;
    // Findings on the description as written, before canonicalization.
    ValidationReport report;

    [[nodiscard]] InputMapper mapper() const { return InputMapper(program.schema, lexicon, rules); }
};

// Throws Error(ParseError) with "line:column" for malformed JSON and
// Error(SchemaError) for structural problems.
[[nodiscard]] Site parse_site(std::string_view text);
[[nodiscard]] Site parse_site_json(const nlohmann::json& doc);
[[nodiscard]] Site load_site(const std::filesystem::path& file);

// Writes the program back as an explicit page list.
[[nodiscard]] nlohmann::json site_to_json(const Site& site);
void save_site(const Site& site, const std::filesystem::path& file);

// An edge that may be labelled with several variables at once.
struct LabeledNode;

struct LabeledEdge {
    std::vector<Variable> label;
    std::string anchor;
    std::unique_ptr<LabeledNode> child;
};

struct LabeledNode {
    std::string page_id;
    std::optional<std::string> content;
    bool branch = false;
    std::vector<LabeledEdge> edges;
};

// Expands every multi-variable edge into a chain of single-variable edges in
// schema attribute order, sharing common prefixes between sibling links.
// Intermediate pages are named "<parent>/<attr=value>". Throws
// Error(DuplicateAttributeInLabel) when a label names one attribute twice.
[[nodiscard]] Node split_coalesced(const Schema& schema, const LabeledNode& root);

// Level i branches on order[i]; only values present among the surviving items
// get an edge, in schema value order. Leaves are the items. Throws
// Error(AmbiguousLeaf) if two items agree on every ordered attribute.
[[nodiscard]] InteractionProgram build_hierarchy(const Schema& schema, const Catalog& catalog,
                                                 std::span<const std::string> order);

inline constexpr std::uint64_t kSyntheticLeafLimit = 1'000'000;

// Complete tree with fanout^depth leaves. Level i branches on attribute
// "level<i>" whose pool holds 2*fanout values; the seed picks which values
// each branch offers and in which order.
[[nodiscard]] InteractionProgram generate_synthetic(std::size_t depth, std::size_t fanout, std::uint64_t seed);

// JSON forms shared by the service and the stores.
[[nodiscard]] nlohmann::json to_json(const Assignment& a);
[[nodiscard]] Assignment assignment_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json to_json(const Node& n);
[[nodiscard]] Node node_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json to_json(const Schema& s);
[[nodiscard]] Schema schema_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json to_json(const ValidationReport& r);

} // namespace personable
