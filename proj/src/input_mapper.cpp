#include "personable/input_mapper.hpp"

#include <algorithm>
#include <cctype>
#include <functional>

namespace personable {

std::string_view to_string(ProvenanceSource source)
{
    switch (source) {
    case ProvenanceSource::Term: return "term";
    case ProvenanceSource::Rule: return "rule";
    case ProvenanceSource::Closure: return "closure";
    }
    return "unknown";
}

std::string Lexicon::normalize(std::string_view term)
{
    std::string out;
    bool pending_space = false;
    for (char raw : term) {
        const auto c = static_cast<unsigned char>(raw);
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space)
            out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

void Lexicon::add(std::string_view term, std::set<Variable> variables)
{
    std::string key = normalize(term);
    if (key.empty())
        throw Error(ErrorCode::LexiconError, "lexicon term is blank");
    if (variables.empty())
        throw Error(ErrorCode::LexiconError, "lexicon term '" + key + "' maps to no variables");
    if (!entries_.emplace(key, std::move(variables)).second)
        throw Error(ErrorCode::LexiconError, "lexicon term '" + key + "' is defined twice after normalization");
}

const std::set<Variable>* Lexicon::lookup(std::string_view term) const
{
    auto it = entries_.find(normalize(term));
    return it == entries_.end() ? nullptr : &it->second;
}

void Lexicon::validate(const Schema& schema) const
{
    for (const auto& [term, vars] : entries_) {
        std::set<std::string> attributes;
        for (const auto& v : vars) {
            if (!schema.contains(v))
                throw Error(ErrorCode::LexiconError, "term '" + term + "' refers to unknown variable " + v.str());
            attributes.insert(v.attribute);
        }
        if (attributes.size() > 1)
            throw Error(ErrorCode::LexiconError, "term '" + term + "' is polysemous across attributes");
        const Attribute* attr = schema.find(*attributes.begin());
        if (attr->exclusive && vars.size() > 1)
            throw Error(ErrorCode::LexiconError,
                        "term '" + term + "' names several values of exclusive attribute '" + attr->name + "'");
    }
}

void validate_rules(const Schema& schema, std::span<const ImplicationRule> rules)
{
    std::map<Variable, std::set<Variable>> graph;
    std::set<std::string> names;
    for (const auto& r : rules) {
        if (!r.name.empty() && !names.insert(r.name).second)
            throw Error(ErrorCode::LexiconError, "rule name '" + r.name + "' repeats");
        if (r.antecedents.empty() || r.consequents.empty())
            throw Error(ErrorCode::LexiconError, "rule '" + r.name + "' needs antecedents and consequents");
        for (const auto& v : r.antecedents)
            if (!schema.contains(v))
                throw Error(ErrorCode::LexiconError, "rule '" + r.name + "' refers to unknown variable " + v.str());
        for (const auto& v : r.consequents)
            if (!schema.contains(v))
                throw Error(ErrorCode::LexiconError, "rule '" + r.name + "' refers to unknown variable " + v.str());
        for (const auto& from : r.antecedents)
            for (const auto& to : r.consequents)
                graph[from].insert(to);
    }

    enum class Mark { Unseen, Active, Done };
    std::map<Variable, Mark> marks;
    std::function<void(const Variable&)> visit = [&](const Variable& v) {
        marks[v] = Mark::Active;
        if (auto it = graph.find(v); it != graph.end()) {
            for (const auto& next : it->second) {
                const Mark m = marks.contains(next) ? marks[next] : Mark::Unseen;
                if (m == Mark::Active)
                    throw Error(ErrorCode::RuleCycle, "implication rules form a cycle through " + next.str());
                if (m == Mark::Unseen)
                    visit(next);
            }
        }
        marks[v] = Mark::Done;
    };
    for (const auto& [v, _] : graph)
        if (!marks.contains(v))
            visit(v);
}

const Provenance* TermMapping::provenance_of(const Variable& v) const
{
    for (const auto& p : provenance)
        if (p.variable == v)
            return &p;
    return nullptr;
}

InputMapper::InputMapper(Schema schema, Lexicon lexicon, std::vector<ImplicationRule> rules)
    : schema_(std::move(schema)), lexicon_(std::move(lexicon)), rules_(std::move(rules))
{
    lexicon_.validate(schema_);
    validate_rules(schema_, rules_);
}

TermMapping InputMapper::map_terms(std::span<const std::string> terms) const
{
    TermMapping m;
    std::map<Variable, Provenance> truths;

    // Terms are applied in sorted order so provenance does not depend on the
    // order the user typed them in.
    std::vector<std::string> sorted(terms.begin(), terms.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const std::string& a, const std::string& b) { return Lexicon::normalize(a) < Lexicon::normalize(b); });
    std::size_t recognised = 0;
    for (const auto& term : sorted) {
        const std::set<Variable>* vars = lexicon_.lookup(term);
        if (vars == nullptr) {
            m.unrecognized.push_back(term);
            continue;
        }
        ++recognised;
        for (const auto& v : *vars)
            truths.try_emplace(v, Provenance{v, true, ProvenanceSource::Term, term});
    }
    // Report unrecognised terms in the caller's order.
    std::vector<std::string> ordered_unknown;
    for (const auto& t : terms)
        if (std::find(m.unrecognized.begin(), m.unrecognized.end(), t) != m.unrecognized.end())
            ordered_unknown.push_back(t);
    m.unrecognized = std::move(ordered_unknown);

    if (!terms.empty() && recognised == 0)
        throw Error(ErrorCode::AllTermsUnknown, "none of the supplied terms is recognised", m.unrecognized);

    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& r : rules_) {
            const bool fires = std::all_of(r.antecedents.begin(), r.antecedents.end(),
                                           [&](const Variable& v) { return truths.contains(v); });
            if (!fires)
                continue;
            for (const auto& v : r.consequents)
                if (truths.try_emplace(v, Provenance{v, true, ProvenanceSource::Rule, r.name}).second)
                    changed = true;
        }
    }

    for (const auto& [v, p] : truths) {
        m.assignment.set(v, true);
        m.provenance.push_back(p);
    }

    for (const auto& [v, _] : truths) {
        const Attribute* attr = schema_.find(v.attribute);
        if (attr == nullptr || !attr->exclusive)
            continue;
        for (const auto& other : attr->values) {
            if (other == v.value)
                continue;
            const Variable rival{v.attribute, other};
            if (truths.contains(rival)) {
                std::vector<std::string> chain = derivation_chain(m, v);
                chain.emplace_back("conflicts with");
                for (auto& line : derivation_chain(m, rival))
                    chain.push_back(std::move(line));
                throw Error(ErrorCode::Contradiction,
                            "input derives both " + v.str() + " and " + rival.str() + " for exclusive attribute '" +
                                v.attribute + "'",
                            std::move(chain));
            }
            if (!m.assignment.decides(rival)) {
                m.assignment.set(rival, false);
                m.provenance.push_back(Provenance{rival, false, ProvenanceSource::Closure, v.str()});
            }
        }
    }
    return m;
}

std::vector<std::string> InputMapper::explain_mapping(std::span<const std::string> terms) const
{
    const TermMapping m = map_terms(terms);
    std::vector<std::string> lines;
    for (const auto& p : m.provenance)
        lines.push_back(p.variable.str() + ":" + (p.value ? "true" : "false") + " <- " +
                        std::string(to_string(p.source)) + " " + p.origin);
    for (const auto& t : m.unrecognized)
        lines.push_back("unrecognized: " + t);
    return lines;
}

std::vector<std::string> InputMapper::derivation_chain(const TermMapping& m, const Variable& v) const
{
    std::vector<std::string> out;
    const Provenance* p = m.provenance_of(v);
    if (p == nullptr)
        return out;
    switch (p->source) {
    case ProvenanceSource::Term:
        out.push_back(v.str() + " from term '" + p->origin + "'");
        break;
    case ProvenanceSource::Closure:
        out.push_back(v.str() + ":false by exclusivity of " + p->origin);
        break;
    case ProvenanceSource::Rule: {
        auto rule = std::find_if(rules_.begin(), rules_.end(), [&](const ImplicationRule& r) { return r.name == p->origin; });
        if (rule != rules_.end())
            for (const auto& a : rule->antecedents)
                for (auto& line : derivation_chain(m, a))
                    out.push_back(std::move(line));
        out.push_back(v.str() + " by rule " + p->origin);
        break;
    }
    }
    return out;
}

} // namespace personable
