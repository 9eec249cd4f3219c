#pragma once

// Maps out-of-turn user terms to closed assignments.
//
// Each recognised term asserts a set of variables true. Implication rules then
// fire forward to a fixpoint, and exclusivity closure sets every competing
// value of an exclusive attribute false. Every entry of the resulting
// assignment carries exactly one provenance record.

#include "personable/program.hpp"

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace personable {

class Lexicon {
public:
    // Case-fold, trim, and collapse internal whitespace runs to one space.
    static std::string normalize(std::string_view term);

    // Throws Error(LexiconError) if the normalized term is already present or
    // normalizes to the empty string.
    void add(std::string_view term, std::set<Variable> variables);

    [[nodiscard]] const std::set<Variable>* lookup(std::string_view term) const;
    [[nodiscard]] const std::map<std::string, std::set<Variable>>& entries() const noexcept { return entries_; }
    [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }

    // Throws Error(LexiconError) for unknown variables, and for polysemous
    // terms whose variables span more than one attribute or name two values of
    // one exclusive attribute.
    void validate(const Schema& schema) const;

    friend bool operator==(const Lexicon&, const Lexicon&) = default;

private:
    std::map<std::string, std::set<Variable>> entries_;
};

struct ImplicationRule {
    std::string name;
    std::set<Variable> antecedents;
    std::set<Variable> consequents;

    friend bool operator==(const ImplicationRule&, const ImplicationRule&) = default;
};

// Throws Error(LexiconError) for unknown variables and Error(RuleCycle) when
// the variable dependency graph induced by the rules has a cycle.
void validate_rules(const Schema& schema, std::span<const ImplicationRule> rules);

enum class ProvenanceSource { Term, Rule, Closure };

std::string_view to_string(ProvenanceSource source);

struct Provenance {
    Variable variable;
    bool value = true;
    ProvenanceSource source = ProvenanceSource::Term;
    // The original term text, the rule name, or the variable whose closure
    // produced this entry.
    std::string origin;
};

struct TermMapping {
    Assignment assignment;
    std::vector<std::string> unrecognized;
    std::vector<Provenance> provenance;

    [[nodiscard]] const Provenance* provenance_of(const Variable& v) const;
};

class InputMapper {
public:
    // Validates the lexicon and the rules against the schema.
    InputMapper(Schema schema, Lexicon lexicon, std::vector<ImplicationRule> rules);

    // Throws Error(Contradiction) with the derivation chain when closure would
    // assign a variable both ways, and Error(AllTermsUnknown) when terms were
    // given but none was recognised.
    [[nodiscard]] TermMapping map_terms(std::span<const std::string> terms) const;

    // Same computation, rendered as one line per entry with its provenance.
    [[nodiscard]] std::vector<std::string> explain_mapping(std::span<const std::string> terms) const;

    // Human-readable derivation of one variable, outermost cause last.
    [[nodiscard]] std::vector<std::string> derivation_chain(const TermMapping& m, const Variable& v) const;

    [[nodiscard]] const Schema& schema() const noexcept { return schema_; }
    [[nodiscard]] const Lexicon& lexicon() const noexcept { return lexicon_; }
    [[nodiscard]] const std::vector<ImplicationRule>& rules() const noexcept { return rules_; }

private:
    Schema schema_;
    Lexicon lexicon_;
    std::vector<ImplicationRule> rules_;
};

} // namespace personable
