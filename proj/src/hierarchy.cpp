#include "personable/site.hpp"

#include <algorithm>
#include <random>
#include <set>

namespace personable {

namespace {

std::vector<std::string> split_anchor(const std::string& anchor)
{
    std::vector<std::string> parts;
    std::string current;
    for (char c : anchor) {
        if (c == '/') {
            parts.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    parts.push_back(current);
    for (auto& p : parts) {
        const auto first = p.find_first_not_of(' ');
        const auto last = p.find_last_not_of(' ');
        p = first == std::string::npos ? std::string() : p.substr(first, last - first + 1);
    }
    return parts;
}

class CoalescedSplitter {
public:
    explicit CoalescedSplitter(const Schema& schema) : schema_(schema) {}

    Node convert(const LabeledNode& n)
    {
        if (!n.branch)
            return Node::leaf(n.page_id, n.content.value_or(n.page_id));

        Node out = Node::branch(n.page_id);
        out.content = n.content;
        for (const auto& e : n.edges) {
            if (e.label.empty())
                throw Error(ErrorCode::SchemaError, "edge under '" + n.page_id + "' has no variables");
            if (e.label.size() == 1) {
                out.edges.push_back(Edge{e.label.front(), e.anchor.empty() ? e.label.front().value : e.anchor, false,
                                         convert(*e.child)});
                continue;
            }
            insert_chain(out, e);
        }
        return out;
    }

private:
    std::size_t rank(const Variable& v) const
    {
        return schema_.index_of(v.attribute).value_or(schema_.attributes().size());
    }

    void insert_chain(Node& parent, const LabeledEdge& e)
    {
        std::set<std::string> attrs;
        for (const auto& v : e.label)
            if (!attrs.insert(v.attribute).second)
                throw Error(ErrorCode::DuplicateAttributeInLabel,
                            "link under '" + parent.page_id + "' names attribute '" + v.attribute + "' twice");

        // Anchor text "A/B/C" is split along with the label when the counts match.
        std::vector<std::string> parts = split_anchor(e.anchor);
        std::vector<std::pair<Variable, std::string>> chain;
        for (std::size_t i = 0; i < e.label.size(); ++i)
            chain.emplace_back(e.label[i], parts.size() == e.label.size() && !parts[i].empty() ? parts[i] : e.label[i].value);
        std::stable_sort(chain.begin(), chain.end(), [&](const auto& a, const auto& b) {
            const auto ra = rank(a.first), rb = rank(b.first);
            return ra != rb ? ra < rb : a.first.attribute < b.first.attribute;
        });

        Node* cursor = &parent;
        for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
            const auto& [var, anchor] = chain[i];
            auto it = std::find_if(cursor->edges.begin(), cursor->edges.end(), [&](const Edge& x) {
                return x.variable == var && intermediate_.contains(x.child.page_id);
            });
            if (it == cursor->edges.end()) {
                std::string id = cursor->page_id + "/" + var.str();
                intermediate_.insert(id);
                cursor->edges.push_back(Edge{var, anchor, false, Node::branch(std::move(id))});
                it = std::prev(cursor->edges.end());
            }
            cursor = &it->child;
        }
        const auto& [var, anchor] = chain.back();
        cursor->edges.push_back(Edge{var, anchor, false, convert(*e.child)});
    }

    const Schema& schema_;
    std::set<std::string> intermediate_;
};

class HierarchyBuilder {
public:
    HierarchyBuilder(const Schema& schema, std::span<const std::string> order) : schema_(schema), order_(order) {}

    Node build(const std::vector<const CatalogItem*>& items, std::size_t level, const std::string& path)
    {
        if (level == order_.size()) {
            if (items.size() > 1) {
                std::vector<std::string> ids;
                std::string joined;
                for (const auto* item : items) {
                    ids.push_back(item->id);
                    joined += (joined.empty() ? "" : ", ") + item->id;
                }
                throw Error(ErrorCode::AmbiguousLeaf, "items are indistinguishable under the order: " + joined, ids);
            }
            const CatalogItem& item = *items.front();
            return Node::leaf(item.id, item.content.empty() ? item.id : item.content);
        }

        const Attribute& attr = *schema_.find(order_[level]);
        Node branch = Node::branch(level == 0 ? "root" : path);
        for (const auto& value : attr.values) {
            std::vector<const CatalogItem*> subset;
            for (const auto* item : items)
                if (item->values.at(attr.name) == value)
                    subset.push_back(item);
            if (subset.empty())
                continue;
            std::string child_path = path.empty() ? value : path + "/" + value;
            branch.edges.push_back(Edge{Variable{attr.name, value}, value, false, build(subset, level + 1, child_path)});
        }
        return branch;
    }

private:
    const Schema& schema_;
    std::span<const std::string> order_;
};

} // namespace

Node split_coalesced(const Schema& schema, const LabeledNode& root)
{
    CoalescedSplitter splitter(schema);
    return splitter.convert(root);
}

InteractionProgram build_hierarchy(const Schema& schema, const Catalog& catalog, std::span<const std::string> order)
{
    validate_catalog(schema, catalog);
    if (catalog.items.empty())
        throw Error(ErrorCode::SchemaError, "catalog has no items");

    std::set<std::string> seen;
    for (const auto& name : order) {
        if (schema.find(name) == nullptr)
            throw Error(ErrorCode::SchemaError, "order names unknown attribute '" + name + "'");
        if (!seen.insert(name).second)
            throw Error(ErrorCode::SchemaError, "order names attribute '" + name + "' twice");
    }

    std::vector<const CatalogItem*> items;
    for (const auto& item : catalog.items) {
        for (const auto& name : order)
            if (!item.values.contains(name))
                throw Error(ErrorCode::SchemaError, "item '" + item.id + "' has no value for '" + name + "'");
        items.push_back(&item);
    }

    HierarchyBuilder builder(schema, order);
    return InteractionProgram{schema, builder.build(items, 0, "")};
}

InteractionProgram generate_synthetic(std::size_t depth, std::size_t fanout, std::uint64_t seed)
{
    if (depth < 1 || fanout < 1)
        throw Error(ErrorCode::SchemaError, "synthetic hierarchy needs depth >= 1 and fanout >= 1");
    std::uint64_t leaves = 1;
    for (std::size_t i = 0; i < depth; ++i) {
        if (leaves > kSyntheticLeafLimit / fanout + 1)
            throw Error(ErrorCode::SizeLimitExceeded, "synthetic hierarchy exceeds the leaf limit");
        leaves *= fanout;
    }
    if (leaves > kSyntheticLeafLimit)
        throw Error(ErrorCode::SizeLimitExceeded,
                    "synthetic hierarchy would have " + std::to_string(leaves) + " leaves; the limit is " +
                        std::to_string(kSyntheticLeafLimit));

    const std::size_t pool = 2 * fanout;
    std::vector<Attribute> attrs;
    for (std::size_t level = 0; level < depth; ++level) {
        Attribute a{"level" + std::to_string(level + 1), {}, true};
        for (std::size_t v = 0; v < pool; ++v)
            a.values.push_back("v" + std::to_string(v));
        attrs.push_back(std::move(a));
    }
    Schema schema(std::move(attrs));

    std::mt19937_64 rng(seed);
    std::size_t next_page = 0;
    std::size_t next_item = 0;
    std::vector<std::size_t> indices(pool);

    auto build = [&](auto&& self, std::size_t level) -> Node {
        if (level == depth) {
            std::string item = "item-" + std::to_string(next_item++);
            return Node::leaf(item, item);
        }
        Node branch = Node::branch(level == 0 ? "root" : "p" + std::to_string(next_page++));
        for (std::size_t i = 0; i < pool; ++i)
            indices[i] = i;
        // Fisher-Yates with raw engine output keeps the result independent of
        // the standard library's distribution implementations.
        for (std::size_t i = pool - 1; i > 0; --i)
            std::swap(indices[i], indices[rng() % (i + 1)]);
        std::vector<std::size_t> chosen(indices.begin(), indices.begin() + static_cast<std::ptrdiff_t>(fanout));
        const auto& attr = schema.attributes()[level];
        for (std::size_t idx : chosen)
            branch.edges.push_back(Edge{Variable{attr.name, attr.values[idx]}, attr.values[idx], false, self(self, level + 1)});
        return branch;
    };
    Node root = build(build, 0);
    return InteractionProgram{std::move(schema), std::move(root)};
}

} // namespace personable
