#include "oracles.hpp"

#include "personable/session.hpp"

#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

using namespace personable;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

Site fixture(const std::string& name)
{
    return load_site(oracle::data_path(name));
}

ErrorCode code_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return ErrorCode::InvariantViolation;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag)
    {
        path = fs::temp_directory_path() / ("personable-" + tag + "-" + std::to_string(std::random_device{}()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// Bookstore service with the purchase theory and the templates derived from
// the reference trace.
void load_bookstore(SessionService& svc)
{
    const Site site = fixture("bookstore.site");
    svc.add_site(site);
    const DomainTheory theory = load_theory(oracle::data_path("bookstore.theory"));
    svc.add_theory("bookstore", theory);
    const Trace linus = load_trace_log(oracle::data_path("linus.trace")).at(0);
    for (auto& t : derive_templates(linus, theory, site.program))
        svc.add_template("bookstore", std::move(t));
}

const std::string kLinusTemplate = "user:linus/payment=Discover,shipping=Fedex";

} // namespace

TEST_CASE("camera session with an out-of-turn request")
{
    SessionService svc(ServiceConfig{});
    svc.add_site(fixture("camera.site"));
    const Session s0 = svc.create_session("camera");
    CHECK(s0.id.size() == 16);
    CHECK(s0.status == SessionStatus::Active);
    CHECK(s0.current.kind == SpecializationKind::Partial);

    StepOutcome out;
    const Session s1 = svc.submit_out_of_turn(s0.id, {"single lens reflex"}, &out);
    CHECK(out.warnings.empty());
    CHECK(s1.history.size() == 1);
    CHECK(s1.history[0].seq == 1);
    CHECK(s1.applied.is_true(Variable{"type", "SLR"}));
    CHECK(svc.list_choices(s0.id, "maker") == std::vector<std::string>{"Nikon", "Minolta"});
    CHECK(svc.list_choices(s0.id, "type") == std::vector<std::string>{"SLR"});
    CHECK(s1.current.eliminated.contains("canon"));

    // An unknown term changes nothing and is not recorded.
    StepOutcome warn;
    const Session s2 = svc.submit_out_of_turn(s0.id, {"warranty"}, &warn);
    REQUIRE(warn.warnings.size() == 1);
    CHECK(warn.warnings[0].find("warranty") != std::string::npos);
    CHECK(sessions_equal(s1, s2));

    // Terms that match no remaining page leave the state alone.
    StepOutcome none;
    const Session s3 = svc.submit_out_of_turn(s0.id, {"Canon"}, &none);
    CHECK(none.no_match);
    CHECK(sessions_equal(s1, s3));

    // Contradicting what is known is an error, with details.
    try {
        (void)svc.submit_out_of_turn(s0.id, {"APS"});
        FAIL("expected Contradiction");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Contradiction);
        REQUIRE_FALSE(e.details().empty());
        CHECK(e.details()[0].find("type=") != std::string::npos);
    }
    CHECK(sessions_equal(svc.get(s0.id), s1));

    CHECK(code_of([&] { (void)svc.submit_click(s0.id, Variable{"maker", "Canon"}); }) == ErrorCode::NoSuchEdge);
    const Session done = svc.submit_click(s0.id, Variable{"maker", "Nikon"});
    CHECK(done.current.complete());
    CHECK(done.status == SessionStatus::Completed);
    CHECK(done.current.program->root.page_id == "nikon-slr");
    CHECK(code_of([&] { (void)svc.submit_click(s0.id, Variable{"maker", "Nikon"}); }) == ErrorCode::SessionNotActive);

    const ExportedTrace trace = svc.export_trace(s0.id);
    REQUIRE(trace.trace.events.size() == 2);
    CHECK(trace.trace.events[0].kind == EventKind::OutOfTurn);
    CHECK(trace.trace.events[0].name == "type");
    CHECK(trace.trace.events[1].kind == EventKind::Click);
    CHECK(trace.trace.events[1].timestamp == 2);
    CHECK_FALSE(trace.template_id);
}

TEST_CASE("page view of the current page")
{
    SessionService svc(ServiceConfig{});
    svc.add_site(fixture("camera.site"));
    const Session s = svc.create_session("camera");
    const auto site = svc.site("camera");
    json v = page_view(s, *site);
    CHECK(v["page"]["id"] == "cameras");
    CHECK(v["page"]["edges"].size() == 3);
    CHECK(v["kind"] == "partial");
    const Session after = svc.submit_out_of_turn(s.id, {"SLR"});
    v = page_view(after, *site);
    CHECK(v["page"]["edges"].size() == 2);
    CHECK(v["page"]["edges"][0]["variable"] == "maker=Nikon");
    CHECK(v["eliminated"].size() > 0);
}

TEST_CASE("errors for unknown things")
{
    SessionService svc(ServiceConfig{});
    load_bookstore(svc);
    CHECK(code_of([&] { (void)svc.create_session("nowhere"); }) == ErrorCode::UnknownSite);
    CHECK(code_of([&] { (void)svc.create_session("bookstore", "global/none"); }) == ErrorCode::UnknownTemplate);
    CHECK(code_of([&] { (void)svc.get("feedfacefeedface"); }) == ErrorCode::UnknownSession);
    CHECK(code_of([&] { (void)svc.create_session("bookstore", kLinusTemplate); }) == ErrorCode::ScopeMismatch);
    CHECK(code_of([&] { (void)svc.create_session("bookstore", kLinusTemplate, "ada"); }) == ErrorCode::ScopeMismatch);

    const Session s = svc.create_session("bookstore");
    CHECK(code_of([&] { (void)svc.fill_slot(s.id, "coupon", "x"); }) == ErrorCode::UnknownAttribute);
    CHECK(code_of([&] { (void)svc.list_choices(s.id, "author"); }) == ErrorCode::UnknownAttribute);
    CHECK(code_of([&] { (void)svc.export_trace(s.id); }) == ErrorCode::NotCompleted);
    CHECK(code_of([&] { (void)svc.resume_session(s.id); }) == ErrorCode::NotSaved);
    CHECK(code_of([&] { (void)svc.add_template("nowhere", Template{}); }) == ErrorCode::UnknownSite);
}

TEST_CASE("a per-user template pre-fills payment and shipping")
{
    SessionService svc(ServiceConfig{});
    load_bookstore(svc);
    const Session s = svc.create_session("bookstore", kLinusTemplate, "linus");
    CHECK(s.template_id == kLinusTemplate);
    CHECK(s.slots == std::map<std::string, std::string>{{"payment", "Discover"}, {"shipping", "Fedex"}});
    REQUIRE(s.history.size() == 1);
    CHECK(s.history[0].kind == StepKind::Template);
    CHECK(structurally_equal(s.current.specialized(), svc.site("bookstore")->program));
    CHECK(page_view(s, *svc.site("bookstore"))["pending_slots"].empty());

    (void)svc.submit_click(s.id, Variable{"category", "Science"});
    const Session done = svc.submit_click(s.id, Variable{"book", "John Nash"});
    CHECK(done.status == SessionStatus::Completed);
    CHECK(done.current.program->root.page_id == "john-nash");

    const ExportedTrace t = svc.export_trace(s.id);
    CHECK(t.template_id == kLinusTemplate);
    REQUIRE(t.trace.events.size() == 2);
    CHECK(t.trace.user_id == "linus");
}

TEST_CASE("the global book template lands on the book page")
{
    SessionService svc(ServiceConfig{});
    load_bookstore(svc);
    const Session s = svc.create_session("bookstore", "global/book=John Nash,category=Science");
    CHECK(s.current.complete());
    CHECK(s.status == SessionStatus::Active);
    CHECK(s.current.eliminated.contains("books"));
    (void)svc.fill_slot(s.id, "payment", "Visa");
    const Session done = svc.fill_slot(s.id, "shipping", "UPS");
    CHECK(done.status == SessionStatus::Completed);
}

TEST_CASE("exported purchases feed remembrance")
{
    SessionService svc(ServiceConfig{});
    load_bookstore(svc);
    auto names = [&] {
        std::set<std::string> out;
        for (const auto& t : svc.templates("bookstore"))
            out.insert(t.name);
        return out;
    };
    CHECK_FALSE(names().contains("remember:ada"));

    const Session s = svc.create_session("bookstore", std::nullopt, "ada");
    (void)svc.submit_out_of_turn(s.id, {"Mystery"});
    (void)svc.submit_click(s.id, Variable{"book", "Harry Potter"});
    (void)svc.fill_slot(s.id, "payment", "Visa");
    (void)svc.fill_slot(s.id, "shipping", "UPS");
    const ExportedTrace t = svc.export_trace(s.id);
    REQUIRE(t.trace.events.size() == 4);
    CHECK(t.trace.events[0].kind == EventKind::OutOfTurn);
    CHECK(names().contains("remember:ada"));

    const Session again = svc.create_session("bookstore", "remember:ada", "ada");
    CHECK(again.slots == std::map<std::string, std::string>{{"payment", "Visa"}, {"shipping", "UPS"}});
    CHECK(again.current.kind == SpecializationKind::Partial);
}

TEST_CASE("remembrance waits for the configured number of traces")
{
    ServiceConfig cfg;
    cfg.remember_threshold = 2;
    SessionService svc(cfg);
    load_bookstore(svc);
    auto purchase = [&](const std::string& card) {
        const Session s = svc.create_session("bookstore", std::nullopt, "kim");
        (void)svc.submit_click(s.id, Variable{"category", "Science"});
        (void)svc.submit_click(s.id, Variable{"book", "John Nash"});
        (void)svc.fill_slot(s.id, "payment", card);
        (void)svc.fill_slot(s.id, "shipping", "DHL");
        (void)svc.export_trace(s.id);
    };
    purchase("Amex");
    CHECK(code_of([&] { (void)svc.find_template("bookstore", "remember:kim"); }) == ErrorCode::UnknownTemplate);
    purchase("Visa");
    const Template t = svc.find_template("bookstore", "remember:kim");
    CHECK(t.baked_slots.at("payment") == "Visa");
}

TEST_CASE("save, restart and resume")
{
    TempDir dir("session");
    std::string id;
    Session saved;
    {
        SessionService svc(ServiceConfig{dir.path});
        svc.add_site(fixture("camera.site"));
        id = svc.create_session("camera", std::nullopt, "ann").id;
        (void)svc.submit_out_of_turn(id, {"SLR"});
        saved = svc.save_session(id);
        CHECK(saved.status == SessionStatus::Saved);
        CHECK(code_of([&] { (void)svc.submit_click(id, Variable{"maker", "Nikon"}); }) == ErrorCode::SessionNotActive);
        CHECK(code_of([&] { (void)svc.save_session(id); }) == ErrorCode::SessionNotActive);
    }
    CHECK(fs::exists(dir.path / "sessions" / (id + ".snapshot")));
    {
        SessionService svc(ServiceConfig{dir.path});
        CHECK(svc.site_ids() == std::vector<std::string>{"camera"});
        const Session back = svc.get(id);
        CHECK(sessions_equal(back, saved));
        CHECK(back.user_id == "ann");
        const Session resumed = svc.resume_session(id);
        CHECK(resumed.status == SessionStatus::Active);
        // Resuming an active session that was saved before is harmless.
        CHECK(sessions_equal(svc.resume_session(id), resumed));
        (void)svc.submit_click(id, Variable{"maker", "Minolta"});
    }
    {
        // Unsaved progress is in the log as well.
        SessionService svc(ServiceConfig{dir.path});
        const Session s = svc.get(id);
        CHECK(s.status == SessionStatus::Completed);
        CHECK(s.current.program->root.page_id == "minolta-slr");
        CHECK(s.history.size() == 2);
    }
}

TEST_CASE("a tampered snapshot is reported as corrupt")
{
    TempDir dir("corrupt");
    std::string id;
    {
        SessionService svc(ServiceConfig{dir.path});
        svc.add_site(fixture("camera.site"));
        id = svc.create_session("camera").id;
        (void)svc.submit_click(id, Variable{"maker", "Nikon"});
        (void)svc.save_session(id);
    }
    const fs::path snap = dir.path / "sessions" / (id + ".snapshot");
    json j;
    std::ifstream(snap) >> j;
    j["slots"]["note"] = "edited";
    std::ofstream(snap) << j.dump();
    SessionService svc(ServiceConfig{dir.path});
    CHECK(code_of([&] { (void)svc.get(id); }) == ErrorCode::CorruptRecord);
}

TEST_CASE("templates and theories persist")
{
    TempDir dir("templates");
    {
        SessionService svc(ServiceConfig{dir.path});
        load_bookstore(svc);
        const Session s = svc.create_session("bookstore", std::nullopt, "ada");
        (void)svc.submit_click(s.id, Variable{"category", "Mystery"});
        (void)svc.submit_click(s.id, Variable{"book", "Harry Potter"});
        (void)svc.fill_slot(s.id, "payment", "Visa");
        (void)svc.fill_slot(s.id, "shipping", "UPS");
        (void)svc.export_trace(s.id);
    }
    SessionService svc(ServiceConfig{dir.path});
    const auto ts = svc.templates("bookstore");
    CHECK(ts.size() == 11);
    CHECK(svc.find_template("bookstore", kLinusTemplate).baked_slots.size() == 2);
    CHECK(svc.find_template("bookstore", "remember:ada").baked_slots.at("payment") == "Visa");
}

TEST_CASE("replaying the history rebuilds random sessions")
{
    SessionService svc(ServiceConfig{});
    svc.add_site(fixture("congress.site"));
    const auto site = svc.site("congress");
    std::vector<std::string> vocab;
    for (const auto& [term, _] : site->lexicon.entries())
        vocab.push_back(term);
    std::mt19937_64 rng(7);
    for (int i = 0; i < 100; ++i) {
        const Session s = svc.create_session("congress", std::nullopt, "u" + std::to_string(i % 3));
        for (int k = 0; k < 4; ++k) {
            Session cur = svc.get(s.id);
            if (cur.status != SessionStatus::Active)
                break;
            try {
                if (rng() % 2) {
                    const auto& edges = cur.current.program->root.edges;
                    (void)svc.submit_click(s.id, edges[rng() % edges.size()].variable);
                } else {
                    (void)svc.submit_out_of_turn(s.id, {vocab[rng() % vocab.size()]});
                }
            } catch (const Error& e) {
                CHECK(e.code() == ErrorCode::Contradiction);
            }
        }
        const Session live = svc.get(s.id);
        const Session rebuilt = svc.replay("congress", live.id, live.user_id, live.history);
        CHECK(sessions_equal(live, rebuilt));
        for (std::size_t k = 0; k < live.history.size(); ++k) {
            CHECK(live.history[k].seq == static_cast<std::int64_t>(k + 1));
            CHECK(step_from_json(to_json(live.history[k])) == live.history[k]);
        }
    }
}

TEST_CASE("verify mode finds no drift under random use")
{
    ServiceConfig cfg;
    cfg.verify = true;
    SessionService svc(cfg);
    svc.add_site(fixture("congress.site"));
    svc.add_site(fixture("camera.site"));
    svc.add_site(Site{"synthetic", "", generate_synthetic(4, 4, 3), {}, {}, {}, {}, {}});
    std::mt19937_64 rng(11);
    std::size_t steps = 0;
    for (int i = 0; i < 150; ++i) {
        const std::string site = i % 3 == 0 ? "congress" : (i % 3 == 1 ? "camera" : "synthetic");
        const Session s = svc.create_session(site);
        while (true) {
            const Session cur = svc.get(s.id);
            if (cur.status != SessionStatus::Active)
                break;
            const auto& edges = cur.current.program->root.edges;
            const Variable v = edges[rng() % edges.size()].variable;
            try {
                if (rng() % 3 == 0)
                    (void)svc.submit_out_of_turn(s.id, {v.value});
                else
                    (void)svc.submit_click(s.id, v);
            } catch (const Error& e) {
                REQUIRE(e.code() != ErrorCode::InvariantViolation);
                (void)svc.submit_click(s.id, v);
            }
            ++steps;
        }
    }
    CHECK(steps > 300);
}

TEST_CASE("concurrent sessions and concurrent steps on one session")
{
    SessionService svc(ServiceConfig{});
    load_bookstore(svc);
    svc.add_site(fixture("camera.site"));

    std::atomic<int> failures{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < 8; ++t)
        pool.emplace_back([&, t] {
            try {
                for (int i = 0; i < 40; ++i) {
                    const Session s = svc.create_session("camera", std::nullopt, "t" + std::to_string(t));
                    (void)svc.submit_out_of_turn(s.id, {"SLR"});
                    const Session done = svc.submit_click(s.id, Variable{"maker", t % 2 ? "Nikon" : "Minolta"});
                    if (done.status != SessionStatus::Completed)
                        ++failures;
                    (void)svc.export_trace(s.id);
                }
            } catch (...) {
                ++failures;
            }
        });
    for (auto& th : pool)
        th.join();
    CHECK(failures == 0);

    const Session shared = svc.create_session("bookstore");
    pool.clear();
    for (int t = 0; t < 4; ++t)
        pool.emplace_back([&, t] {
            for (int i = 0; i < 50; ++i)
                (void)svc.fill_slot(shared.id, "payment", "card-" + std::to_string(t));
        });
    for (auto& th : pool)
        th.join();
    const Session after = svc.get(shared.id);
    REQUIRE(after.history.size() == 200);
    for (std::size_t k = 0; k < after.history.size(); ++k)
        CHECK(after.history[k].seq == static_cast<std::int64_t>(k + 1));
}

TEST_CASE("templates are ranked once purchases have been exported")
{
    ServiceConfig cfg;
    cfg.top_k = 3;
    SessionService svc(cfg);
    load_bookstore(svc);
    const auto before = svc.ranked_templates("bookstore");
    CHECK(before.size() == 10);
    for (const auto& r : before)
        CHECK_FALSE(r.score);

    const Session s = svc.create_session("bookstore", std::nullopt, "linus");
    (void)svc.submit_click(s.id, Variable{"category", "Science"});
    (void)svc.submit_click(s.id, Variable{"book", "John Nash"});
    (void)svc.fill_slot(s.id, "payment", "Discover");
    (void)svc.fill_slot(s.id, "shipping", "Fedex");
    (void)svc.export_trace(s.id);

    const auto after = svc.ranked_templates("bookstore");
    // Three best, then the two vanilla templates that missed the cut.
    REQUIRE(after.size() == 5);
    for (const auto& r : after)
        REQUIRE(r.score);
    CHECK(after[0].tpl.name == "user:linus/book=John Nash,category=Science,payment=Discover,shipping=Fedex");
    CHECK(after[0].score->savings == doctest::Approx(4.0));
    CHECK(after[3].tpl.vanilla());
    CHECK(after[4].tpl.vanilla());
}
