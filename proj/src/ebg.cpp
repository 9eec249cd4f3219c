#include "personable/ebg.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

namespace personable {

using nlohmann::json;

namespace {

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

bool is_var(const std::string& arg)
{
    return !arg.empty() && arg.front() == '?';
}

using Bindings = std::map<std::string, std::string>;

std::string resolve(const std::string& arg, const Bindings& b)
{
    if (!is_var(arg))
        return arg;
    auto it = b.find(arg);
    return it == b.end() ? arg : it->second;
}

Literal substitute(const Literal& l, const Bindings& b)
{
    Literal out{l.predicate, {}};
    for (const auto& a : l.args)
        out.args.push_back(resolve(a, b));
    return out;
}

// Unifies two literals whose variables live in separate scopes.
bool unify(const Literal& a, Bindings& ba, const Literal& b, Bindings& bb)
{
    if (a.predicate != b.predicate || a.args.size() != b.args.size())
        return false;
    Bindings na = ba, nb = bb;
    for (std::size_t i = 0; i < a.args.size(); ++i) {
        const std::string x = resolve(a.args[i], na);
        const std::string y = resolve(b.args[i], nb);
        const bool vx = is_var(x), vy = is_var(y);
        if (vx && vy)
            continue;
        if (vx)
            na[x] = y;
        else if (vy)
            nb[y] = x;
        else if (x != y)
            return false;
    }
    ba = std::move(na);
    bb = std::move(nb);
    return true;
}

bool may_unify(const Literal& a, const Literal& b)
{
    Bindings x, y;
    return unify(a, x, b, y);
}

class Prover {
public:
    Prover(const Trace& trace, const DomainTheory& theory) : trace_(trace), theory_(theory)
    {
        for (const auto& e : trace.events)
            event_literals_.push_back(e.as_literal());
    }

    struct State {
        std::vector<ExplanationNode> nodes;
        std::vector<bool> used;
    };

    // Proves `goal` under the caller's bindings, appending nodes to the state.
    // Returns the new node id.
    std::optional<std::size_t> prove(const Literal& goal, Bindings& caller, State& st,
                                     std::optional<std::size_t> parent, std::vector<std::string>& missing,
                                     std::size_t depth = 0)
    {
        if (depth > 64)
            return std::nullopt;
        const Literal wanted = substitute(goal, caller);

        for (std::size_t r = 0; r < theory_.rules.size(); ++r) {
            const TheoryRule& rule = theory_.rules[r];
            Bindings local, outer = caller;
            if (!unify(rule.consequent, local, wanted, outer))
                continue;
            State trial = st;
            std::vector<std::string> trial_missing;
            const std::size_t id = trial.nodes.size();
            trial.nodes.push_back(ExplanationNode{id, {}, rule.name, std::nullopt, parent, {}, {}});
            bool ok = true;
            for (const auto& ante : rule.antecedents) {
                auto child = prove(ante, local, trial, id, trial_missing, depth + 1);
                if (!child) {
                    ok = false;
                    break;
                }
                trial.nodes[id].children.push_back(*child);
            }
            if (!ok) {
                missing.insert(missing.end(), trial_missing.begin(), trial_missing.end());
                continue;
            }
            Literal concluded = substitute(rule.consequent, local);
            Bindings scratch;
            unify(concluded, scratch, wanted, outer);
            trial.nodes[id].literal = substitute(wanted, outer);
            trial.nodes[id].alternatives = alternatives_after(r, wanted, st, parent, depth);
            caller = std::move(outer);
            st = std::move(trial);
            return id;
        }

        for (std::size_t i = 0; i < event_literals_.size(); ++i) {
            if (st.used[i])
                continue;
            Bindings outer = caller, ev;
            if (!unify(wanted, outer, event_literals_[i], ev))
                continue;
            st.used[i] = true;
            const std::size_t id = st.nodes.size();
            st.nodes.push_back(ExplanationNode{id, event_literals_[i], {}, i, parent, {}, {}});
            caller = std::move(outer);
            return id;
        }
        if (!has_rule_for(wanted))
            missing.push_back(wanted.str());
        return std::nullopt;
    }

    State initial() const { return State{{}, std::vector<bool>(trace_.events.size(), false)}; }

private:
    bool has_rule_for(const Literal& l) const
    {
        return std::any_of(theory_.rules.begin(), theory_.rules.end(),
                           [&](const TheoryRule& r) { return may_unify(r.consequent, l); });
    }

    std::vector<std::string> alternatives_after(std::size_t chosen, const Literal& wanted, const State& st,
                                                std::optional<std::size_t> parent, std::size_t depth)
    {
        std::vector<std::string> out;
        for (std::size_t r = chosen + 1; r < theory_.rules.size(); ++r) {
            const TheoryRule& rule = theory_.rules[r];
            Bindings local, outer;
            if (!unify(rule.consequent, local, wanted, outer))
                continue;
            State scratch = st;
            std::vector<std::string> ignored;
            const std::size_t id = scratch.nodes.size();
            scratch.nodes.push_back(ExplanationNode{id, {}, rule.name, std::nullopt, parent, {}, {}});
            bool ok = true;
            for (const auto& ante : rule.antecedents)
                if (!prove(ante, local, scratch, id, ignored, depth + 1)) {
                    ok = false;
                    break;
                }
            if (ok)
                out.push_back(rule.name);
        }
        return out;
    }

    const Trace& trace_;
    const DomainTheory& theory_;
    std::vector<Literal> event_literals_;
};

void renumber_preorder(ExplanationTree& t)
{
    // The prover allocates ids in preorder already; this only checks it.
    for (std::size_t i = 0; i < t.nodes.size(); ++i)
        if (t.nodes[i].id != i)
            throw Error(ErrorCode::InvariantViolation, "explanation node ids out of order");
}

} // namespace

std::string Literal::str() const
{
    if (args.empty())
        return predicate;
    std::string out = predicate + "(";
    for (std::size_t i = 0; i < args.size(); ++i)
        out += (i ? ", " : "") + args[i];
    return out + ")";
}

bool Literal::ground() const
{
    return std::none_of(args.begin(), args.end(), is_var);
}

Literal Literal::parse(std::string_view text)
{
    const std::string s = trim(text);
    const auto open = s.find('(');
    if (open == std::string::npos) {
        if (s.empty() || s.find(')') != std::string::npos)
            throw Error(ErrorCode::ParseError, "malformed literal '" + s + "'");
        return Literal{s, {}};
    }
    if (s.back() != ')' || open == 0)
        throw Error(ErrorCode::ParseError, "malformed literal '" + s + "'");
    Literal l{trim(s.substr(0, open)), {}};
    const std::string inner = s.substr(open + 1, s.size() - open - 2);
    std::string current;
    for (char c : inner) {
        if (c == ',') {
            l.args.push_back(trim(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    l.args.push_back(trim(current));
    for (const auto& a : l.args)
        if (a.empty())
            throw Error(ErrorCode::ParseError, "malformed literal '" + s + "'");
    return l;
}

void DomainTheory::validate() const
{
    bool concludes_top = false;
    for (const auto& r : rules) {
        if (may_unify(r.consequent, top))
            concludes_top = true;
        for (const auto& a : r.antecedents)
            if (may_unify(a, top))
                throw Error(ErrorCode::InvalidTheory, "rule '" + r.name + "' uses the top goal as an antecedent");
    }
    if (!concludes_top)
        throw Error(ErrorCode::InvalidTheory, "no rule concludes " + top.str());

    enum class Mark { Unseen, Active, Done };
    std::vector<Mark> marks(rules.size(), Mark::Unseen);
    std::function<void(std::size_t)> visit = [&](std::size_t i) {
        marks[i] = Mark::Active;
        for (const auto& a : rules[i].antecedents)
            for (std::size_t j = 0; j < rules.size(); ++j) {
                if (!may_unify(a, rules[j].consequent))
                    continue;
                if (marks[j] == Mark::Active)
                    throw Error(ErrorCode::InvalidTheory, "rules form a cycle through '" + rules[j].name + "'");
                if (marks[j] == Mark::Unseen)
                    visit(j);
            }
        marks[i] = Mark::Done;
    };
    for (std::size_t i = 0; i < rules.size(); ++i)
        if (marks[i] == Mark::Unseen)
            visit(i);
}

DomainTheory parse_theory(const json& doc)
{
    try {
        DomainTheory t;
        if (doc.contains("top"))
            t.top = Literal::parse(doc.at("top").get<std::string>());
        for (const auto& r : doc.at("rules")) {
            TheoryRule rule;
            rule.name = r.at("name").get<std::string>();
            rule.consequent = Literal::parse(r.at("then").get<std::string>());
            for (const auto& a : r.at("if"))
                rule.antecedents.push_back(Literal::parse(a.get<std::string>()));
            t.rules.push_back(std::move(rule));
        }
        for (const auto& s : doc.value("user_specific_slots", json::array()))
            t.user_specific_slots.insert(s.get<std::string>());
        for (const auto& s : doc.value("rememberable_slots", json::array()))
            t.rememberable_slots.insert(s.get<std::string>());
        t.validate();
        return t;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidTheory, std::string("malformed theory: ") + e.what());
    }
}

json to_json(const DomainTheory& t)
{
    json rules = json::array();
    for (const auto& r : t.rules) {
        json ifs = json::array();
        for (const auto& a : r.antecedents)
            ifs.push_back(a.str());
        rules.push_back(json{{"name", r.name}, {"then", r.consequent.str()}, {"if", ifs}});
    }
    return json{{"top", t.top.str()},
                {"rules", rules},
                {"user_specific_slots", t.user_specific_slots},
                {"rememberable_slots", t.rememberable_slots}};
}

DomainTheory load_theory(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in)
        throw Error(ErrorCode::ParseError, "cannot open theory " + file.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, file.string() + ": " + e.what());
    }
    return parse_theory(doc);
}

std::string_view to_string(EventKind kind)
{
    switch (kind) {
    case EventKind::Click: return "click";
    case EventKind::OutOfTurn: return "out-of-turn";
    case EventKind::FormFill: return "form-fill";
    case EventKind::Template: return "template";
    }
    return "unknown";
}

EventKind event_kind_from_string(std::string_view text)
{
    if (text == "click")
        return EventKind::Click;
    if (text == "out-of-turn")
        return EventKind::OutOfTurn;
    if (text == "form-fill")
        return EventKind::FormFill;
    if (text == "template")
        return EventKind::Template;
    throw Error(ErrorCode::ParseError, "unknown event kind '" + std::string(text) + "'");
}

Literal TraceEvent::as_literal() const
{
    switch (kind) {
    case EventKind::Click:
    case EventKind::OutOfTurn: return Literal{"selected", {name, value}};
    case EventKind::FormFill: return Literal{"provided", {name, value}};
    case EventKind::Template: return Literal{"template", {name}};
    }
    return {};
}

std::vector<std::size_t> ExplanationTree::leaves() const
{
    std::vector<std::size_t> out;
    for (const auto& n : nodes)
        if (n.children.empty())
            out.push_back(n.id);
    return out;
}

bool ExplanationTree::dominates(std::size_t ancestor, std::size_t descendant) const
{
    std::optional<std::size_t> cur = descendant;
    while (cur) {
        if (*cur == ancestor)
            return true;
        cur = nodes.at(*cur).parent;
    }
    return false;
}

ExplanationTree explain(const Trace& trace, const DomainTheory& theory)
{
    theory.validate();
    Prover prover(trace, theory);
    Prover::State st = prover.initial();
    Bindings top;
    std::vector<std::string> missing;
    if (!prover.prove(theory.top, top, st, std::nullopt, missing)) {
        std::sort(missing.begin(), missing.end());
        missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
        std::string list;
        for (const auto& m : missing)
            list += (list.empty() ? "" : ", ") + m;
        throw Error(ErrorCode::NoProof,
                    "trace of user '" + trace.user_id + "' does not prove " + theory.top.str() +
                        (list.empty() ? std::string() : "; unsatisfied: " + list),
                    missing);
    }
    ExplanationTree t;
    t.trace = trace;
    t.nodes = std::move(st.nodes);
    renumber_preorder(t);
    for (std::size_t i = 0; i < st.used.size(); ++i)
        if (!st.used[i])
            t.unexplained_events.push_back(i);
    return t;
}

bool is_valid_cut(const ExplanationTree& t, const OperationalityCut& cut)
{
    if (cut.frontier.empty())
        return false;
    for (std::size_t id : cut.frontier)
        if (id >= t.nodes.size())
            return false;
    for (std::size_t i = 0; i < cut.frontier.size(); ++i)
        for (std::size_t j = 0; j < cut.frontier.size(); ++j)
            if (i != j && t.dominates(cut.frontier[i], cut.frontier[j]))
                return false;
    for (std::size_t leaf : t.leaves()) {
        const auto covering = std::count_if(cut.frontier.begin(), cut.frontier.end(),
                                            [&](std::size_t f) { return t.dominates(f, leaf); });
        if (covering != 1)
            return false;
    }
    return true;
}

OperationalityCut root_cut(const ExplanationTree&)
{
    return OperationalityCut{{0}};
}

OperationalityCut leaf_cut(const ExplanationTree& t)
{
    return OperationalityCut{t.leaves()};
}

bool cut_at_or_below(const ExplanationTree& t, const OperationalityCut& lower, const OperationalityCut& upper)
{
    return std::all_of(lower.frontier.begin(), lower.frontier.end(), [&](std::size_t l) {
        return std::any_of(upper.frontier.begin(), upper.frontier.end(),
                           [&](std::size_t u) { return t.dominates(u, l); });
    });
}

std::vector<OperationalityCut> enumerate_cuts(const ExplanationTree& t, std::size_t max_frontier)
{
    const std::size_t limit = std::max<std::size_t>(max_frontier, 1);
    std::function<std::vector<std::vector<std::size_t>>(std::size_t)> cuts = [&](std::size_t id) {
        std::vector<std::vector<std::size_t>> out{{id}};
        const auto& node = t.node(id);
        if (node.children.empty())
            return out;
        std::vector<std::vector<std::size_t>> product{{}};
        for (std::size_t child : node.children) {
            const auto options = cuts(child);
            std::vector<std::vector<std::size_t>> next;
            for (const auto& prefix : product)
                for (const auto& opt : options) {
                    if (prefix.size() + opt.size() > limit)
                        continue;
                    auto combined = prefix;
                    combined.insert(combined.end(), opt.begin(), opt.end());
                    next.push_back(std::move(combined));
                }
            product = std::move(next);
            if (product.empty())
                break;
        }
        for (auto& p : product)
            out.push_back(std::move(p));
        return out;
    };

    std::vector<OperationalityCut> result;
    std::set<std::vector<std::size_t>> seen;
    auto add = [&](std::vector<std::size_t> frontier) {
        std::sort(frontier.begin(), frontier.end());
        if (seen.insert(frontier).second)
            result.push_back(OperationalityCut{std::move(frontier)});
    };
    for (auto& f : cuts(0))
        add(std::move(f));
    add(leaf_cut(t).frontier);
    return result;
}

std::size_t Template::baked_event_count() const
{
    return baked.true_variables().size() + baked_slots.size();
}

namespace {

std::string template_name(const TemplateScope& scope, const Assignment& baked,
                          const std::map<std::string, std::string>& slots)
{
    std::string out = scope.global() ? "global" : "user:" + scope.user_id;
    if (baked.true_variables().empty() && slots.empty())
        return out + "/vanilla";
    std::string parts;
    for (const auto& v : baked.true_variables())
        parts += (parts.empty() ? "" : ",") + v.str();
    for (const auto& [slot, value] : slots)
        parts += (parts.empty() ? "" : ",") + slot + "=" + value;
    return out + "/" + parts;
}

} // namespace

Template operationalize(const ExplanationTree& t, const OperationalityCut& cut, const TemplateScope& scope,
                        const DomainTheory& theory, const InteractionProgram& base)
{
    if (!is_valid_cut(t, cut))
        throw Error(ErrorCode::InvalidCut, "frontier is not an antichain covering every leaf");

    Template tpl;
    tpl.scope = scope;
    Assignment browse;
    for (std::size_t id : cut.frontier) {
        const ExplanationNode& n = t.node(id);
        if (!n.leaf()) {
            tpl.free.push_back(n.literal.str());
            continue;
        }
        const TraceEvent& ev = t.trace.events.at(*n.event);
        if (ev.browse())
            browse.set(Variable{ev.name, ev.value}, true);
        else if (ev.kind == EventKind::FormFill)
            tpl.baked_slots[ev.name] = ev.value;
    }

    if (scope.global()) {
        std::vector<std::string> offending;
        for (const auto& [slot, _] : tpl.baked_slots)
            if (theory.user_specific_slots.contains(slot))
                offending.push_back(slot);
        if (!offending.empty()) {
            std::string list;
            for (const auto& s : offending)
                list += (list.empty() ? "" : ", ") + s;
            throw Error(ErrorCode::ScopeViolation,
                        "a global template cannot bake user-specific slots: " + list, offending);
        }
    }

    tpl.baked = close_under_exclusivity(base.schema, browse);
    tpl.entry = partial_evaluate(base, tpl.baked);
    tpl.name = template_name(scope, tpl.baked, tpl.baked_slots);
    return tpl;
}

bool template_consistent_with(const Template& tpl, const Trace& trace)
{
    for (const auto& ev : trace.events) {
        if (ev.browse()) {
            if (tpl.baked.is_false(Variable{ev.name, ev.value}))
                return false;
        } else if (ev.kind == EventKind::FormFill) {
            auto it = tpl.baked_slots.find(ev.name);
            if (it != tpl.baked_slots.end() && it->second != ev.value)
                return false;
        }
    }
    return true;
}

std::size_t events_subsumed(const Template& tpl, const Trace& trace)
{
    std::size_t n = 0;
    for (const auto& ev : trace.events) {
        if (ev.browse() && tpl.baked.is_true(Variable{ev.name, ev.value}))
            ++n;
        else if (ev.kind == EventKind::FormFill) {
            auto it = tpl.baked_slots.find(ev.name);
            if (it != tpl.baked_slots.end() && it->second == ev.value)
                ++n;
        }
    }
    return n;
}

std::vector<TemplateScore> score_templates(std::span<const Template> templates, std::span<const Trace> corpus,
                                           std::size_t top_k)
{
    std::vector<TemplateScore> scores;
    for (std::size_t i = 0; i < templates.size(); ++i) {
        const Template& tpl = templates[i];
        TemplateScore s;
        s.index = i;
        s.name = tpl.name;
        std::size_t consistent = 0, subsumed = 0;
        for (const auto& trace : corpus) {
            if (!tpl.scope.global() && trace.user_id != tpl.scope.user_id)
                continue;
            ++s.applicable;
            if (template_consistent_with(tpl, trace))
                ++consistent;
            subsumed += events_subsumed(tpl, trace);
        }
        if (s.applicable > 0) {
            s.coverage = static_cast<double>(consistent) / static_cast<double>(s.applicable);
            s.savings = static_cast<double>(subsumed) / static_cast<double>(s.applicable);
        }
        scores.push_back(std::move(s));
    }
    std::stable_sort(scores.begin(), scores.end(), [](const TemplateScore& a, const TemplateScore& b) {
        if (a.utility() != b.utility())
            return a.utility() > b.utility();
        if (a.coverage != b.coverage)
            return a.coverage > b.coverage;
        return a.savings > b.savings;
    });

    std::vector<TemplateScore> kept;
    for (const auto& s : scores)
        if (kept.size() < top_k)
            kept.push_back(s);
    for (const auto& s : scores) {
        if (!templates[s.index].vanilla())
            continue;
        const bool present = std::any_of(kept.begin(), kept.end(), [&](const TemplateScore& k) { return k.index == s.index; });
        if (!present)
            kept.push_back(s);
    }
    return kept;
}

namespace {

std::optional<std::string> replay_browse(SpecializationResult current, const Trace& trace, const Assignment& skip)
{
    for (const auto& ev : trace.events) {
        if (current.empty())
            return std::nullopt;
        if (current.complete())
            break;
        if (!ev.browse())
            continue;
        const Variable v{ev.name, ev.value};
        if (skip.is_true(v))
            continue;
        const InteractionProgram& p = *current.program;
        if (!p.schema.contains(v))
            return std::nullopt;
        try {
            current = partial_evaluate(p, assert_true(p.schema, v));
        } catch (const Error&) {
            return std::nullopt;
        }
    }
    if (!current.complete())
        return std::nullopt;
    return current.program->root.page_id;
}

} // namespace

std::optional<std::string> complete_with_template(const Template& tpl, const Trace& trace)
{
    if (tpl.entry.empty())
        return std::nullopt;
    return replay_browse(tpl.entry, trace, tpl.baked);
}

std::optional<std::string> leaf_reached(const InteractionProgram& base, const Trace& trace)
{
    return replay_browse(partial_evaluate(base, Assignment{}), trace, Assignment{});
}

std::vector<Template> derive_templates(const Trace& trace, const DomainTheory& theory, const InteractionProgram& base,
                                       std::size_t max_frontier)
{
    const ExplanationTree tree = explain(trace, theory);
    std::vector<Template> out;
    std::set<std::string> names;
    for (const auto& cut : enumerate_cuts(tree, max_frontier)) {
        for (const auto& scope : {TemplateScope::user(trace.user_id), TemplateScope::everyone()}) {
            if (!scope.global() && scope.user_id.empty())
                continue;
            try {
                Template tpl = operationalize(tree, cut, scope, theory, base);
                if (names.insert(tpl.name).second)
                    out.push_back(std::move(tpl));
            } catch (const Error& e) {
                if (e.code() != ErrorCode::ScopeViolation)
                    throw;
            }
        }
    }
    return out;
}

Remembrance::Remembrance(DomainTheory theory, InteractionProgram base, std::size_t threshold)
    : theory_(std::move(theory)), base_(std::move(base)), threshold_(std::max<std::size_t>(threshold, 1))
{
    theory_.validate();
}

void Remembrance::observe(const Trace& trace)
{
    const ExplanationTree tree = explain(trace, theory_);
    Memory& m = users_[trace.user_id];
    ++m.traces;
    for (std::size_t leaf : tree.leaves()) {
        const TraceEvent& ev = trace.events.at(*tree.node(leaf).event);
        if (ev.kind != EventKind::FormFill || !theory_.rememberable_slots.contains(ev.name))
            continue;
        auto it = m.slots.find(ev.name);
        if (it == m.slots.end() || it->second.first <= ev.timestamp)
            m.slots[ev.name] = {ev.timestamp, ev.value};
    }
}

std::optional<Template> Remembrance::recall(const std::string& user_id) const
{
    auto it = users_.find(user_id);
    if (it == users_.end() || it->second.traces < threshold_)
        return std::nullopt;
    Template tpl;
    tpl.scope = TemplateScope::user(user_id);
    for (const auto& [slot, stamped] : it->second.slots)
        tpl.baked_slots[slot] = stamped.second;
    // Obligations whose subtree holds no remembered slot stay with the user.
    for (const auto& r : theory_.rules) {
        if (!may_unify(r.consequent, theory_.top))
            continue;
        for (const auto& a : r.antecedents) {
            bool remembered = false;
            for (const auto& sub : theory_.rules)
                if (may_unify(sub.consequent, a))
                    for (const auto& leaf : sub.antecedents)
                        if (leaf.predicate == "provided" && !leaf.args.empty() && tpl.baked_slots.contains(leaf.args[0]))
                            remembered = true;
            if (!remembered)
                tpl.free.push_back(a.str());
        }
        break;
    }
    tpl.entry = partial_evaluate(base_, Assignment{});
    tpl.name = "remember:" + user_id;
    return tpl;
}

std::size_t Remembrance::observed(const std::string& user_id) const
{
    auto it = users_.find(user_id);
    return it == users_.end() ? 0 : it->second.traces;
}

std::vector<std::string> Remembrance::users() const
{
    std::vector<std::string> out;
    for (const auto& [user, _] : users_)
        out.push_back(user);
    return out;
}

json to_json(const Template& t)
{
    json baked = json::array();
    for (const auto& v : t.baked.true_variables())
        baked.push_back(v.str());
    return json{{"name", t.name},
                {"site", t.site_id},
                {"scope", t.scope.global() ? json(nullptr) : json(t.scope.user_id)},
                {"baked", baked},
                {"slots", t.baked_slots},
                {"free", t.free},
                {"entry_kind", std::string(to_string(t.entry.kind))}};
}

Template template_from_json(const json& j, const InteractionProgram& base)
{
    try {
        Template t;
        t.name = j.value("name", std::string());
        t.site_id = j.value("site", std::string());
        if (j.contains("scope") && !j.at("scope").is_null())
            t.scope = TemplateScope::user(j.at("scope").get<std::string>());
        Assignment baked;
        for (const auto& v : j.value("baked", json::array()))
            baked.set(Variable::parse(v.get<std::string>()), true);
        t.baked = close_under_exclusivity(base.schema, baked);
        t.baked_slots = j.value("slots", std::map<std::string, std::string>{});
        t.free = j.value("free", std::vector<std::string>{});
        t.entry = partial_evaluate(base, t.baked);
        if (t.name.empty())
            t.name = template_name(t.scope, t.baked, t.baked_slots);
        return t;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("malformed template: ") + e.what());
    }
}

json to_json(const ExplanationTree& t)
{
    std::function<json(std::size_t)> emit = [&](std::size_t id) {
        const ExplanationNode& n = t.node(id);
        json j{{"id", n.id}, {"literal", n.literal.str()}};
        if (n.leaf()) {
            j["event"] = *n.event;
        } else {
            j["rule"] = n.rule;
            if (!n.alternatives.empty())
                j["alternatives"] = n.alternatives;
            json children = json::array();
            for (std::size_t c : n.children)
                children.push_back(emit(c));
            j["children"] = children;
        }
        return j;
    };
    return json{{"user", t.trace.user_id},
                {"session", t.trace.session_id},
                {"root", emit(0)},
                {"unexplained_events", t.unexplained_events}};
}

json to_json(const Trace& t)
{
    json events = json::array();
    for (const auto& e : t.events)
        events.push_back(json{{"kind", std::string(to_string(e.kind))},
                              {"name", e.name},
                              {"value", e.value},
                              {"timestamp", e.timestamp}});
    return json{{"user", t.user_id}, {"session", t.session_id}, {"events", events}};
}

Trace trace_from_json(const json& j)
{
    try {
        Trace t;
        t.user_id = j.at("user").get<std::string>();
        t.session_id = j.value("session", std::string());
        for (const auto& e : j.at("events")) {
            TraceEvent ev;
            ev.kind = event_kind_from_string(e.at("kind").get<std::string>());
            ev.name = e.at("name").get<std::string>();
            ev.value = e.value("value", std::string());
            ev.timestamp = e.value("timestamp", std::int64_t{0});
            t.events.push_back(std::move(ev));
        }
        return t;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("malformed trace: ") + e.what());
    }
}

} // namespace personable
