#include "personable/site.hpp"

#include "personable/specializer.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace personable {

using nlohmann::json;

namespace {

const std::set<std::string> kTopLevelKeys = {"site", "title", "schema", "catalog", "pages",
                                             "lexicon", "implies", "content", "slots"};

[[noreturn]] void schema_error(const std::string& where, const std::string& what)
{
    throw Error(ErrorCode::SchemaError, where + ": " + what, {where});
}

const json& require(const json& obj, const char* key, const std::string& where)
{
    auto it = obj.find(key);
    if (it == obj.end())
        schema_error(where, std::string("missing \"") + key + "\"");
    return *it;
}

std::string string_at(const json& j, const std::string& where)
{
    if (!j.is_string())
        schema_error(where, "expected a string");
    return j.get<std::string>();
}

std::vector<std::string> strings_at(const json& j, const std::string& where)
{
    if (!j.is_array())
        schema_error(where, "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(string_at(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

Variable variable_at(const json& j, const std::string& where)
{
    try {
        return Variable::parse(string_at(j, where));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::SchemaError)
            throw;
        schema_error(where, e.what());
    }
}

std::set<Variable> variables_at(const json& j, const std::string& where)
{
    if (!j.is_array())
        schema_error(where, "expected an array of attribute=value strings");
    std::set<Variable> out;
    for (std::size_t i = 0; i < j.size(); ++i)
        out.insert(variable_at(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

Schema parse_schema(const json& j)
{
    if (!j.is_array())
        schema_error("schema", "expected an array of attributes");
    std::vector<Attribute> attrs;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string where = "schema[" + std::to_string(i) + "]";
        if (!j[i].is_object())
            schema_error(where, "expected an object");
        Attribute a;
        a.name = string_at(require(j[i], "name", where), where + ".name");
        a.values = strings_at(require(j[i], "values", where), where + ".values");
        if (auto it = j[i].find("exclusive"); it != j[i].end()) {
            if (!it->is_boolean())
                schema_error(where + ".exclusive", "expected a boolean");
            a.exclusive = it->get<bool>();
        }
        attrs.push_back(std::move(a));
    }
    try {
        return Schema(std::move(attrs));
    } catch (const Error& e) {
        schema_error("schema", e.what());
    }
}

InteractionProgram parse_catalog(const Schema& schema, const json& j)
{
    if (!j.is_object())
        schema_error("catalog", "expected an object");
    const std::vector<std::string> order = strings_at(require(j, "order", "catalog"), "catalog.order");
    const json& items = require(j, "items", "catalog");
    if (!items.is_array())
        schema_error("catalog.items", "expected an array");
    Catalog catalog;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const std::string where = "catalog.items[" + std::to_string(i) + "]";
        const json& it = items[i];
        if (!it.is_object())
            schema_error(where, "expected an object");
        CatalogItem item;
        item.id = string_at(require(it, "id", where), where + ".id");
        if (auto c = it.find("content"); c != it.end())
            item.content = string_at(*c, where + ".content");
        const json& values = require(it, "values", where);
        if (!values.is_object())
            schema_error(where + ".values", "expected an object");
        for (const auto& [attr, value] : values.items())
            item.values.emplace(attr, string_at(value, where + ".values." + attr));
        catalog.items.push_back(std::move(item));
    }
    return build_hierarchy(schema, catalog, order);
}

struct PageSpec {
    std::string id;
    std::optional<std::string> content;
    bool branch = false;
    struct EdgeSpec {
        std::vector<Variable> label;
        std::string anchor;
        std::string to;
        bool resolved = false;
        std::string where;
    };
    std::vector<EdgeSpec> edges;
};

class PageTreeBuilder {
public:
    explicit PageTreeBuilder(std::map<std::string, PageSpec> pages) : pages_(std::move(pages)) {}

    LabeledNode build(const std::string& id, const std::string& where)
    {
        auto it = pages_.find(id);
        if (it == pages_.end())
            schema_error(where, "edge points to unknown page '" + id + "'");
        if (active_.contains(id))
            schema_error(where, "page '" + id + "' is reachable from itself");
        const PageSpec& spec = it->second;

        const std::size_t use = ++uses_[id];
        LabeledNode node;
        node.page_id = use == 1 ? id : id + "#" + std::to_string(use);
        node.content = spec.content;
        node.branch = spec.branch;

        active_.insert(id);
        for (const auto& e : spec.edges) {
            LabeledEdge edge;
            edge.label = e.label;
            edge.anchor = e.anchor;
            edge.child = std::make_unique<LabeledNode>(build(e.to, e.where));
            node.edges.push_back(std::move(edge));
            if (e.resolved)
                resolved_.insert({node.page_id, e.label.front()});
        }
        active_.erase(id);
        return node;
    }

    [[nodiscard]] const std::map<std::string, std::size_t>& uses() const { return uses_; }
    [[nodiscard]] const std::set<std::pair<std::string, Variable>>& resolved() const { return resolved_; }

private:
    std::map<std::string, PageSpec> pages_;
    std::map<std::string, std::size_t> uses_;
    std::set<std::string> active_;
    std::set<std::pair<std::string, Variable>> resolved_;
};

void mark_resolved(Node& n, const std::set<std::pair<std::string, Variable>>& resolved)
{
    for (auto& e : n.edges) {
        if (resolved.contains({n.page_id, e.variable}))
            e.resolved = true;
        mark_resolved(e.child, resolved);
    }
}

Node parse_pages(const Schema& schema, const json& j)
{
    if (!j.is_array())
        schema_error("pages", "expected an array of pages");
    if (j.empty())
        schema_error("pages", "page list is empty");

    std::map<std::string, PageSpec> pages;
    std::string root_id;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string where = "pages[" + std::to_string(i) + "]";
        const json& p = j[i];
        if (!p.is_object())
            schema_error(where, "expected an object");
        PageSpec spec;
        spec.id = string_at(require(p, "id", where), where + ".id");
        if (spec.id.empty())
            schema_error(where + ".id", "page id is empty");
        if (auto c = p.find("content"); c != p.end())
            spec.content = string_at(*c, where + ".content");
        if (auto es = p.find("edges"); es != p.end()) {
            if (!es->is_array())
                schema_error(where + ".edges", "expected an array");
            spec.branch = true;
            for (std::size_t k = 0; k < es->size(); ++k) {
                const std::string ew = where + ".edges[" + std::to_string(k) + "]";
                const json& e = (*es)[k];
                if (!e.is_object())
                    schema_error(ew, "expected an object");
                PageSpec::EdgeSpec edge;
                edge.where = ew;
                const bool single = e.contains("var");
                const bool multi = e.contains("vars");
                if (single == multi)
                    schema_error(ew, "edge needs exactly one of \"var\" and \"vars\"");
                if (single) {
                    edge.label.push_back(variable_at(e.at("var"), ew + ".var"));
                } else {
                    const json& vs = e.at("vars");
                    if (!vs.is_array() || vs.empty())
                        schema_error(ew + ".vars", "expected a non-empty array");
                    for (std::size_t v = 0; v < vs.size(); ++v)
                        edge.label.push_back(variable_at(vs[v], ew + ".vars[" + std::to_string(v) + "]"));
                }
                if (auto a = e.find("anchor"); a != e.end())
                    edge.anchor = string_at(*a, ew + ".anchor");
                if (auto r = e.find("resolved"); r != e.end())
                    edge.resolved = r->is_boolean() && r->get<bool>();
                edge.to = string_at(require(e, "to", ew), ew + ".to");
                spec.edges.push_back(std::move(edge));
            }
        }
        if (i == 0)
            root_id = spec.id;
        if (!pages.emplace(spec.id, std::move(spec)).second)
            schema_error(where + ".id", "page id '" + j[i]["id"].get<std::string>() + "' is declared twice");
    }

    PageTreeBuilder builder(pages);
    LabeledNode root = builder.build(root_id, "pages[0]");
    for (const auto& [id, _] : pages)
        if (!builder.uses().contains(id))
            schema_error("pages", "page '" + id + "' is not reachable from the root");
    Node tree = split_coalesced(schema, root);
    mark_resolved(tree, builder.resolved());
    return tree;
}

std::string location_of(std::string_view text, std::size_t byte)
{
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return std::to_string(line) + ":" + std::to_string(column);
}

void flatten_pages(const Node& n, json& out)
{
    json page = {{"id", n.page_id}};
    if (n.content)
        page["content"] = *n.content;
    if (!n.is_leaf()) {
        json edges = json::array();
        for (const auto& e : n.edges) {
            json edge = {{"var", e.variable.str()}, {"anchor", e.anchor}, {"to", e.child.page_id}};
            if (e.resolved)
                edge["resolved"] = true;
            edges.push_back(std::move(edge));
        }
        page["edges"] = std::move(edges);
    }
    out.push_back(std::move(page));
    for (const auto& e : n.edges)
        flatten_pages(e.child, out);
}

} // namespace

Site parse_site(std::string_view text)
{
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        const std::string where = location_of(text, e.byte);
        throw Error(ErrorCode::ParseError, "site description is not valid JSON at " + where, {where});
    }
    return parse_site_json(doc);
}

Site parse_site_json(const json& doc)
{
    if (!doc.is_object())
        schema_error("document", "expected a JSON object");
    for (const auto& [key, _] : doc.items())
        if (!kTopLevelKeys.contains(key))
            schema_error(key, "unknown top-level key");

    Site site;
    site.id = string_at(require(doc, "site", "document"), "site");
    if (site.id.empty())
        schema_error("site", "site id is empty");
    if (auto t = doc.find("title"); t != doc.end())
        site.title = string_at(*t, "title");
    Schema schema = parse_schema(require(doc, "schema", "document"));

    const bool has_catalog = doc.contains("catalog");
    const bool has_pages = doc.contains("pages");
    if (has_catalog == has_pages)
        schema_error("document", "exactly one of \"catalog\" and \"pages\" is required");

    InteractionProgram raw = has_catalog ? parse_catalog(schema, doc.at("catalog"))
                                         : InteractionProgram{schema, parse_pages(schema, doc.at("pages"))};
    site.report = validate_program(raw);

    // Canonical form: dead ends removed, content-only branches turned into leaves.
    SpecializationResult canonical = partial_evaluate(raw, Assignment{});
    if (canonical.empty())
        schema_error("pages", "no page in the site leads to a leaf");
    site.program = std::move(*canonical.program);

    if (auto lex = doc.find("lexicon"); lex != doc.end()) {
        if (!lex->is_object())
            schema_error("lexicon", "expected an object");
        for (const auto& [term, vars] : lex->items()) {
            try {
                site.lexicon.add(term, variables_at(vars, "lexicon." + term));
            } catch (const Error& e) {
                if (e.code() == ErrorCode::SchemaError)
                    throw;
                schema_error("lexicon." + term, e.what());
            }
        }
    }
    if (auto imp = doc.find("implies"); imp != doc.end()) {
        if (!imp->is_array())
            schema_error("implies", "expected an array of rules");
        for (std::size_t i = 0; i < imp->size(); ++i) {
            const std::string where = "implies[" + std::to_string(i) + "]";
            const json& r = (*imp)[i];
            if (!r.is_object())
                schema_error(where, "expected an object");
            ImplicationRule rule;
            rule.name = r.contains("name") ? string_at(r.at("name"), where + ".name") : "R" + std::to_string(i + 1);
            rule.antecedents = variables_at(require(r, "if", where), where + ".if");
            rule.consequents = variables_at(require(r, "then", where), where + ".then");
            site.rules.push_back(std::move(rule));
        }
    }
    try {
        site.lexicon.validate(site.program.schema);
    } catch (const Error& e) {
        schema_error("lexicon", e.what());
    }
    validate_rules(site.program.schema, site.rules);

    if (auto content = doc.find("content"); content != doc.end()) {
        if (!content->is_object())
            schema_error("content", "expected an object");
        for (const auto& [ref, entry] : content->items()) {
            const std::string where = "content." + ref;
            if (!entry.is_object())
                schema_error(where, "expected an object");
            ContentEntry c;
            if (entry.contains("title"))
                c.title = string_at(entry.at("title"), where + ".title");
            if (entry.contains("body"))
                c.body = string_at(entry.at("body"), where + ".body");
            site.content.emplace(ref, std::move(c));
        }
    }
    if (auto slots = doc.find("slots"); slots != doc.end())
        site.slots = strings_at(*slots, "slots");
    return site;
}

Site load_site(const std::filesystem::path& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::ParseError, "cannot open site description " + file.string(), {file.string()});
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_site(buf.str());
    } catch (const Error& e) {
        std::vector<std::string> details = e.details();
        details.insert(details.begin(), file.string());
        throw Error(e.code(), file.string() + ": " + e.what(), std::move(details));
    }
}

json site_to_json(const Site& site)
{
    json doc;
    doc["site"] = site.id;
    if (!site.title.empty())
        doc["title"] = site.title;
    doc["schema"] = to_json(site.program.schema);
    json pages = json::array();
    flatten_pages(site.program.root, pages);
    doc["pages"] = std::move(pages);
    if (!site.lexicon.empty()) {
        json lex = json::object();
        for (const auto& [term, vars] : site.lexicon.entries()) {
            json list = json::array();
            for (const auto& v : vars)
                list.push_back(v.str());
            lex[term] = std::move(list);
        }
        doc["lexicon"] = std::move(lex);
    }
    if (!site.rules.empty()) {
        json rules = json::array();
        for (const auto& r : site.rules) {
            json ifs = json::array(), thens = json::array();
            for (const auto& v : r.antecedents)
                ifs.push_back(v.str());
            for (const auto& v : r.consequents)
                thens.push_back(v.str());
            rules.push_back({{"name", r.name}, {"if", ifs}, {"then", thens}});
        }
        doc["implies"] = std::move(rules);
    }
    if (!site.content.empty()) {
        json content = json::object();
        for (const auto& [ref, c] : site.content)
            content[ref] = {{"title", c.title}, {"body", c.body}};
        doc["content"] = std::move(content);
    }
    if (!site.slots.empty())
        doc["slots"] = site.slots;
    return doc;
}

void save_site(const Site& site, const std::filesystem::path& file)
{
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::ParseError, "cannot write " + file.string());
    out << site_to_json(site).dump(2) << '\n';
}

json to_json(const Assignment& a)
{
    json out = json::object();
    for (const auto& [v, value] : a.entries())
        out[v.str()] = value;
    return out;
}

Assignment assignment_from_json(const json& j)
{
    if (!j.is_object())
        throw Error(ErrorCode::ParseError, "assignment must be an object of attr=value: bool");
    Assignment a;
    for (const auto& [key, value] : j.items()) {
        if (!value.is_boolean())
            throw Error(ErrorCode::ParseError, "assignment entry '" + key + "' is not a boolean");
        a.set(Variable::parse(key), value.get<bool>());
    }
    return a;
}

json to_json(const Node& n)
{
    json out = {{"id", n.page_id}, {"kind", n.is_leaf() ? "leaf" : "branch"}};
    if (n.content)
        out["content"] = *n.content;
    if (!n.is_leaf()) {
        json edges = json::array();
        for (const auto& e : n.edges)
            edges.push_back(
                {{"var", e.variable.str()}, {"anchor", e.anchor}, {"resolved", e.resolved}, {"child", to_json(e.child)}});
        out["edges"] = std::move(edges);
    }
    return out;
}

Node node_from_json(const json& j)
{
    try {
        Node n;
        n.page_id = j.at("id").get<std::string>();
        n.kind = j.at("kind").get<std::string>() == "leaf" ? NodeKind::Leaf : NodeKind::Branch;
        if (j.contains("content"))
            n.content = j.at("content").get<std::string>();
        if (j.contains("edges"))
            for (const auto& e : j.at("edges"))
                n.edges.push_back(Edge{Variable::parse(e.at("var").get<std::string>()), e.at("anchor").get<std::string>(),
                                       e.value("resolved", false), node_from_json(e.at("child"))});
        return n;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("malformed page tree: ") + e.what());
    }
}

json to_json(const Schema& s)
{
    json out = json::array();
    for (const auto& a : s.attributes())
        out.push_back({{"name", a.name}, {"values", a.values}, {"exclusive", a.exclusive}});
    return out;
}

Schema schema_from_json(const json& j)
{
    return parse_schema(j);
}

json to_json(const ValidationReport& r)
{
    json out = json::array();
    for (const auto& v : r)
        out.push_back({{"code", std::string(to_string(v.code))}, {"page", v.page_id}, {"message", v.message}});
    return out;
}

} // namespace personable
