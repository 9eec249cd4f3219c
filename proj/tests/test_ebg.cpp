#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <sstream>

using namespace personable;
using nlohmann::json;

namespace {

const Site& bookstore()
{
    static const Site site = load_site(oracle::data_path("bookstore.site"));
    return site;
}

const DomainTheory& theory()
{
    static const DomainTheory t = load_theory(oracle::data_path("bookstore.theory"));
    return t;
}

Trace linus()
{
    return load_trace_log(oracle::data_path("linus.trace")).at(0);
}

Trace purchase(const std::string& user, const std::string& session, const std::string& category, const std::string& book,
               const std::string& card, const std::string& carrier, std::int64_t t0 = 0)
{
    return Trace{user,
                 session,
                 {{EventKind::Click, "category", category, t0 + 1},
                  {EventKind::Click, "book", book, t0 + 2},
                  {EventKind::FormFill, "payment", card, t0 + 3},
                  {EventKind::FormFill, "shipping", carrier, t0 + 4}}};
}

const Template* by_name(const std::vector<Template>& ts, const std::string& name)
{
    auto it = std::find_if(ts.begin(), ts.end(), [&](const Template& t) { return t.name == name; });
    return it == ts.end() ? nullptr : &*it;
}

} // namespace

TEST_CASE("literals parse with variables and print back")
{
    const Literal l = Literal::parse(" selected( category , ?c ) ");
    CHECK(l.predicate == "selected");
    CHECK(l.args == std::vector<std::string>{"category", "?c"});
    CHECK_FALSE(l.ground());
    CHECK(l.str() == "selected(category, ?c)");
    CHECK(Literal::parse("successful_interaction").args.empty());
    CHECK_THROWS_AS((void)Literal::parse("p(a,)"), Error);
    CHECK_THROWS_AS((void)Literal::parse("(a)"), Error);
    CHECK_THROWS_AS((void)Literal::parse("p(a"), Error);
}

TEST_CASE("the purchase trace explains into an eight-node tree")
{
    const ExplanationTree t = explain(linus(), theory());
    REQUIRE(t.nodes.size() == 8);
    CHECK(t.unexplained_events.empty());

    const auto& root = t.root();
    CHECK(root.literal.str() == "successful_interaction");
    CHECK(root.rule == "purchase");
    CHECK(root.children == std::vector<std::size_t>{1, 4, 6});

    CHECK(t.node(1).literal.str() == "achieved(book_selection)");
    CHECK(t.node(1).children == std::vector<std::size_t>{2, 3});
    CHECK(t.node(2).literal.str() == "selected(category, Science)");
    CHECK(t.node(2).event == 0u);
    CHECK(t.node(3).literal.str() == "selected(book, John Nash)");
    CHECK(t.node(4).literal.str() == "achieved(payment)");
    CHECK(t.node(5).literal.str() == "provided(payment, Discover)");
    CHECK(t.node(6).literal.str() == "achieved(shipping)");
    CHECK(t.node(7).literal.str() == "provided(shipping, Fedex)");
    CHECK(t.leaves() == std::vector<std::size_t>{2, 3, 5, 7});
    for (const auto& n : t.nodes)
        CHECK(n.alternatives.empty());

    const json j = to_json(t);
    CHECK(j["root"]["children"].size() == 3);
    CHECK(j["root"]["children"][1]["children"][0]["literal"] == "provided(payment, Discover)");
}

TEST_CASE("events outside the proof are listed, and event order does not matter")
{
    Trace t = linus();
    std::reverse(t.events.begin(), t.events.end());
    t.events.push_back({EventKind::Click, "category", "Mystery", 9});
    const ExplanationTree tree = explain(t, theory());
    CHECK(tree.nodes.size() == 8);
    CHECK(tree.unexplained_events == std::vector<std::size_t>{4});
}

TEST_CASE("alternative rules are recorded")
{
    DomainTheory th = theory();
    th.rules.push_back(TheoryRule{"pay-by-voucher", Literal::parse("achieved(payment)"),
                                  {Literal::parse("provided(payment, ?v)")}});
    const ExplanationTree t = explain(linus(), th);
    CHECK(t.node(4).rule == "pay");
    CHECK(t.node(4).alternatives == std::vector<std::string>{"pay-by-voucher"});
}

TEST_CASE("a trace that cannot be explained")
{
    try {
        (void)explain(Trace{"linus", "s0", {}}, theory());
        FAIL("expected NoProof");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NoProof);
        CHECK(std::find(e.details().begin(), e.details().end(), "selected(category, ?c)") != e.details().end());
    }
    Trace partial = linus();
    partial.events.pop_back();
    try {
        (void)explain(partial, theory());
        FAIL("expected NoProof");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NoProof);
        CHECK(e.details() == std::vector<std::string>{"provided(shipping, ?carrier)"});
    }
}

TEST_CASE("theory validation")
{
    DomainTheory no_top = theory();
    no_top.rules.erase(no_top.rules.begin());
    CHECK_THROWS_AS(no_top.validate(), Error);

    DomainTheory top_inside = theory();
    top_inside.rules.push_back(TheoryRule{"loop", Literal::parse("achieved(x)"), {Literal::parse("successful_interaction")}});
    try {
        top_inside.validate();
        FAIL("expected InvalidTheory");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidTheory);
    }

    DomainTheory cyclic = theory();
    cyclic.rules.push_back(TheoryRule{"a", Literal::parse("achieved(x)"), {Literal::parse("achieved(y)")}});
    cyclic.rules.push_back(TheoryRule{"b", Literal::parse("achieved(y)"), {Literal::parse("achieved(x)")}});
    CHECK_THROWS_AS(cyclic.validate(), Error);

    const DomainTheory again = parse_theory(to_json(theory()));
    CHECK(again.rules.size() == theory().rules.size());
    CHECK(again.user_specific_slots == theory().user_specific_slots);
    CHECK_THROWS_AS((void)parse_theory(json{{"rules", 3}}), Error);
}

TEST_CASE("nine cuts through the purchase tree")
{
    const ExplanationTree t = explain(linus(), theory());
    const auto cuts = enumerate_cuts(t);
    CHECK(cuts.size() == 9);
    CHECK(cuts.front() == root_cut(t));
    for (const auto& c : cuts)
        CHECK(is_valid_cut(t, c));
    auto has = [&](std::vector<std::size_t> f) {
        return std::find(cuts.begin(), cuts.end(), OperationalityCut{std::move(f)}) != cuts.end();
    };
    CHECK(has({0}));
    CHECK(has({2, 3, 4, 6}));
    CHECK(has({1, 5, 7}));
    CHECK(has({2, 3, 5, 7}));
    CHECK_FALSE(has({1, 2}));

    // Size-three cuts plus the root, and the leaf cut which is always kept.
    CHECK(enumerate_cuts(t, 3).size() == 6);
    CHECK(is_valid_cut(t, leaf_cut(t)));
    CHECK_FALSE(is_valid_cut(t, OperationalityCut{{1, 5}}));
    CHECK_FALSE(is_valid_cut(t, OperationalityCut{{0, 1}}));
    CHECK(cut_at_or_below(t, OperationalityCut{{1, 5, 7}}, root_cut(t)));
    CHECK_FALSE(cut_at_or_below(t, root_cut(t), OperationalityCut{{1, 5, 7}}));
}

TEST_CASE("the root cut is the vanilla template")
{
    const ExplanationTree t = explain(linus(), theory());
    const Template v = operationalize(t, root_cut(t), TemplateScope::everyone(), theory(), bookstore().program);
    CHECK(v.vanilla());
    CHECK(v.name == "global/vanilla");
    CHECK(v.free == std::vector<std::string>{"successful_interaction"});
    CHECK(structurally_equal(v.entry.specialized(), bookstore().program));
}

TEST_CASE("the lower cut remembers payment and shipping for Linus only")
{
    const ExplanationTree t = explain(linus(), theory());
    const OperationalityCut bottom{{1, 5, 7}};
    const Template tpl = operationalize(t, bottom, TemplateScope::user("linus"), theory(), bookstore().program);
    CHECK(tpl.name == "user:linus/payment=Discover,shipping=Fedex");
    CHECK(tpl.baked.empty());
    CHECK(tpl.baked_slots == std::map<std::string, std::string>{{"payment", "Discover"}, {"shipping", "Fedex"}});
    CHECK(tpl.free == std::vector<std::string>{"achieved(book_selection)"});
    // The entry program is the whole browsing program: only the form is pre-filled.
    REQUIRE(tpl.entry.kind == SpecializationKind::Partial);
    CHECK(structurally_equal(tpl.entry.specialized(), bookstore().program));
    CHECK(tpl.baked_event_count() == 2);

    try {
        (void)operationalize(t, bottom, TemplateScope::everyone(), theory(), bookstore().program);
        FAIL("expected ScopeViolation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ScopeViolation);
        CHECK(e.details() == std::vector<std::string>{"payment", "shipping"});
    }
    CHECK_THROWS_AS((void)operationalize(t, OperationalityCut{{1, 5}}, TemplateScope::user("linus"), theory(),
                                         bookstore().program),
                    Error);
}

TEST_CASE("the upper cut takes everyone straight to the book")
{
    const ExplanationTree t = explain(linus(), theory());
    const Template tpl =
        operationalize(t, OperationalityCut{{2, 3, 4, 6}}, TemplateScope::everyone(), theory(), bookstore().program);
    CHECK(tpl.name == "global/book=John Nash,category=Science");
    CHECK(tpl.baked.is_true(Variable{"book", "John Nash"}));
    CHECK(tpl.baked.is_false(Variable{"book", "Harry Potter"}));
    CHECK(tpl.baked_slots.empty());
    CHECK(tpl.free == std::vector<std::string>{"achieved(payment)", "achieved(shipping)"});
    REQUIRE(tpl.entry.complete());
    CHECK(tpl.entry.specialized().root.page_id == "john-nash");
}

TEST_CASE("derive_templates drops scope violations and duplicates")
{
    const auto ts = derive_templates(linus(), theory(), bookstore().program);
    // The root cut and the cut through the three obligations both bake nothing,
    // so they share a name. Global templates exist only for cuts that bake no slot.
    std::size_t global = 0, personal = 0;
    for (const auto& t : ts) {
        (t.scope.global() ? global : personal) += 1;
        if (t.scope.global())
            CHECK(t.baked_slots.empty());
    }
    CHECK(personal == 8);
    CHECK(global == 2);
    CHECK(by_name(ts, "global/vanilla") != nullptr);
    CHECK(by_name(ts, "user:linus/payment=Discover,shipping=Fedex") != nullptr);
    CHECK(by_name(ts, "global/book=John Nash,category=Science") != nullptr);
}

TEST_CASE("template JSON round trip")
{
    for (const auto& t : derive_templates(linus(), theory(), bookstore().program)) {
        const Template back = template_from_json(to_json(t), bookstore().program);
        CHECK(back.name == t.name);
        CHECK(back.scope == t.scope);
        CHECK(back.baked == t.baked);
        CHECK(back.baked_slots == t.baked_slots);
        CHECK(back.free == t.free);
        CHECK(back.entry.kind == t.entry.kind);
    }
    const Trace tr = linus();
    CHECK(trace_from_json(to_json(tr)) == tr);
    CHECK_THROWS_AS((void)trace_from_json(json{{"events", json::array()}}), Error);
}

TEST_CASE("ten identical purchases")
{
    std::vector<Trace> corpus;
    for (int i = 0; i < 10; ++i)
        corpus.push_back(purchase("linus", "s" + std::to_string(i), "Science", "John Nash", "Discover", "Fedex", i * 10));
    const auto ts = derive_templates(corpus[0], theory(), bookstore().program);
    const auto scores = score_templates(ts, corpus, ts.size());
    auto score_of = [&](const std::string& name) {
        auto it = std::find_if(scores.begin(), scores.end(), [&](const TemplateScore& s) { return s.name == name; });
        REQUIRE(it != scores.end());
        return *it;
    };
    const auto bottom = score_of("user:linus/payment=Discover,shipping=Fedex");
    CHECK(bottom.applicable == 10);
    CHECK(bottom.coverage == doctest::Approx(1.0));
    CHECK(bottom.savings == doctest::Approx(2.0));
    const auto vanilla = score_of("global/vanilla");
    CHECK(vanilla.coverage == doctest::Approx(1.0));
    CHECK(vanilla.savings == doctest::Approx(0.0));
    const auto leaf = score_of("user:linus/book=John Nash,category=Science,payment=Discover,shipping=Fedex");
    CHECK(leaf.savings == doctest::Approx(4.0));
    CHECK(scores.front().name == leaf.name);
    for (std::size_t i = 1; i < scores.size(); ++i)
        CHECK(scores[i - 1].utility() >= scores[i].utility());
}

TEST_CASE("scoring is per scope and keeps vanilla past the cap")
{
    std::vector<Trace> corpus{
        purchase("linus", "a", "Science", "John Nash", "Discover", "Fedex"),
        purchase("linus", "b", "Mystery", "Harry Potter", "Discover", "UPS"),
        purchase("ada", "c", "Science", "John Nash", "Visa", "Fedex"),
    };
    const auto ts = derive_templates(corpus[0], theory(), bookstore().program);
    const auto all = score_templates(ts, corpus, ts.size());
    for (const auto& s : all) {
        const Template& t = ts[s.index];
        CHECK(s.applicable == (t.scope.global() ? 3u : 2u));
    }
    const auto& book = *std::find_if(all.begin(), all.end(),
                                     [](const TemplateScore& s) { return s.name == "global/book=John Nash,category=Science"; });
    CHECK(book.coverage == doctest::Approx(2.0 / 3.0));
    CHECK(book.savings == doctest::Approx(4.0 / 3.0));

    const auto capped = score_templates(ts, corpus, 1);
    REQUIRE(capped.size() == 3);
    CHECK_FALSE(ts[capped[0].index].vanilla());
    CHECK(ts[capped[1].index].vanilla());
    CHECK(ts[capped[2].index].vanilla());
    CHECK(score_templates(ts, corpus, 0).size() == 2);
}

TEST_CASE("cut counts match brute force on random trees")
{
    std::mt19937_64 rng(77);
    for (int i = 0; i < 60; ++i) {
        const ExplanationTree t = oracle::random_tree(rng, 14);
        const auto cuts = enumerate_cuts(t);
        CHECK(cuts.size() == oracle::recursive_cut_count(t));
        CHECK(cuts.size() == oracle::brute_force_cut_count(t));
        for (const auto& c : cuts)
            CHECK(is_valid_cut(t, c));
        for (const auto& c : enumerate_cuts(t, 2))
            CHECK((c.frontier.size() <= 2 || c == leaf_cut(t)));
    }
}

TEST_CASE("templates from a random corpus are sound and monotone")
{
    std::mt19937_64 rng(4242);
    const std::vector<oracle::BookstoreUser> users{{"linus", {"Discover"}, {"Fedex"}},
                                                   {"ada", {"Visa", "Amex"}, {"UPS"}},
                                                   {"kim", {"Visa"}, {"Fedex", "DHL"}}};
    const auto corpus = oracle::bookstore_corpus(rng, bookstore().program, users, 60);
    for (const auto& trace : corpus) {
        const ExplanationTree tree = explain(trace, theory());
        const auto expected = leaf_reached(bookstore().program, trace);
        REQUIRE(expected);
        const auto cuts = enumerate_cuts(tree);
        std::vector<Template> personal;
        for (const auto& cut : cuts) {
            const Template tpl = operationalize(tree, cut, TemplateScope::user(trace.user_id), theory(), bookstore().program);
            // Sound: on the trace it came from, the template reaches the same page.
            CHECK(complete_with_template(tpl, trace) == expected);
            CHECK(template_consistent_with(tpl, trace));
            CHECK(events_subsumed(tpl, trace) == tpl.baked_event_count());
            personal.push_back(tpl);
        }
        // Monotone: a lower cut bakes at least as much as any cut above it.
        for (std::size_t a = 0; a < cuts.size(); ++a)
            for (std::size_t b = 0; b < cuts.size(); ++b)
                if (cut_at_or_below(tree, cuts[a], cuts[b])) {
                    CHECK(personal[a].baked_event_count() >= personal[b].baked_event_count());
                    CHECK(events_subsumed(personal[a], trace) >= events_subsumed(personal[b], trace));
                }
    }
}

TEST_CASE("remembrance keeps the latest slot values per user")
{
    Remembrance memory(theory(), bookstore().program, 2);
    memory.observe(purchase("linus", "a", "Science", "John Nash", "Discover", "Fedex", 0));
    CHECK(memory.observed("linus") == 1);
    CHECK_FALSE(memory.recall("linus"));

    memory.observe(purchase("linus", "b", "Mystery", "Harry Potter", "Visa", "Fedex", 100));
    // Older trace arriving late does not override.
    memory.observe(purchase("linus", "c", "Science", "John Nash", "Amex", "UPS", 50));
    const auto tpl = memory.recall("linus");
    REQUIRE(tpl);
    CHECK(tpl->name == "remember:linus");
    CHECK(tpl->scope == TemplateScope::user("linus"));
    CHECK(tpl->baked_slots == std::map<std::string, std::string>{{"payment", "Visa"}, {"shipping", "Fedex"}});
    CHECK(tpl->baked.empty());
    CHECK(tpl->free == std::vector<std::string>{"achieved(book_selection)"});
    CHECK(structurally_equal(tpl->entry.specialized(), bookstore().program));

    CHECK_FALSE(memory.recall("ada"));
    CHECK(memory.users() == std::vector<std::string>{"linus"});
    CHECK_THROWS_AS(memory.observe(Trace{"ada", "x", {}}), Error);
    CHECK(memory.observed("ada") == 0);
}

TEST_CASE("trace logs round-trip and report bad lines")
{
    const std::vector<Trace> traces{linus(), purchase("ada", "z", "Mystery", "Harry Potter", "Visa", "UPS", 7)};
    std::ostringstream out;
    write_trace_log(out, traces);
    std::istringstream in(out.str());
    CHECK(parse_trace_log(in) == traces);

    std::istringstream interleaved("a\t1\tclick\tx\ty\t1\nb\t1\tclick\tx\ty\t2\na\t1\tform-fill\tp\tq\t3\n");
    const auto grouped = parse_trace_log(interleaved);
    REQUIRE(grouped.size() == 2);
    CHECK(grouped[0].events.size() == 2);

    std::istringstream bad_fields("# header\nlinus\ts1\tclick\tcategory\n");
    try {
        (void)parse_trace_log(bad_fields);
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParseError);
        CHECK(std::string(e.what()).rfind("2:1:", 0) == 0);
    }
    std::istringstream bad_kind("linus\ts1\tscroll\tcategory\tScience\t1\n");
    CHECK_THROWS_AS((void)parse_trace_log(bad_kind), Error);
    std::istringstream bad_time("linus\ts1\tclick\tcategory\tScience\tnoon\n");
    CHECK_THROWS_AS((void)parse_trace_log(bad_time), Error);
}
