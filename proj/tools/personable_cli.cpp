#include "personable/ebg.hpp"
#include "personable/http_api.hpp"
#include "personable/personability.hpp"
#include "personable/session.hpp"
#include "personable/site.hpp"
#include "personable/specializer.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <csignal>
#include <cstdlib>
#include <iostream>

using namespace personable;
using nlohmann::json;

namespace {

std::optional<std::string> env(const char* name)
{
    const char* v = std::getenv(name);
    if (!v || !*v)
        return std::nullopt;
    return std::string(v);
}

std::size_t env_size(const char* name, std::size_t fallback)
{
    if (auto v = env(name)) {
        try {
            return static_cast<std::size_t>(std::stoull(*v));
        } catch (const std::exception&) {
            throw Error(ErrorCode::ParseError, std::string(name) + " is not a number: " + *v);
        }
    }
    return fallback;
}

httplib::Server* running_server = nullptr;

void stop_server(int)
{
    if (running_server)
        running_server->stop();
}

void print_result(const SpecializationResult& r, bool as_json)
{
    if (as_json) {
        std::cout << json{{"kind", std::string(to_string(r.kind))},
                          {"program", r.program ? to_json(r.program->root) : json(nullptr)},
                          {"eliminated", r.eliminated}}
                         .dump(2)
                  << '\n';
        return;
    }
    std::cout << "kind: " << to_string(r.kind) << '\n';
    std::cout << "eliminated:";
    for (const auto& p : r.eliminated)
        std::cout << ' ' << p;
    std::cout << '\n';
    if (r.program)
        std::cout << render_outline(r.program->root);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Personable interaction programs: sites, partial evaluation, templates and sessions"};
    app.require_subcommand(1);

    // serve
    auto* serve = app.add_subcommand("serve", "Run the HTTP session service");
    int port = 8080;
    std::string data_dir = "personable-data";
    std::string host = "127.0.0.1";
    std::size_t top_k = kDefaultTopK;
    std::size_t threshold = 1;
    std::vector<std::string> preload;
    bool verify = false;
    auto* port_opt = serve->add_option("--port", port, "Listening port (PERSONABLE_PORT)");
    auto* dir_opt = serve->add_option("--data-dir", data_dir, "Data directory (PERSONABLE_DATA_DIR)");
    serve->add_option("--host", host, "Listening address");
    auto* topk_opt = serve->add_option("--top-k", top_k, "Templates kept per site (PERSONABLE_TOP_K)");
    auto* thr_opt = serve->add_option("--remember-threshold", threshold,
                                      "Traces before remembrance applies (PERSONABLE_REMEMBER_THRESHOLD)");
    serve->add_option("--site", preload, "Site descriptions to load at start")->check(CLI::ExistingFile);
    serve->add_flag("--verify", verify, "Recompute every session after each mutation");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Load a site description and report on it");
    std::string ingest_file, ingest_out, ingest_dir;
    bool ingest_json = false;
    ingest->add_option("site", ingest_file, "Site description")->required()->check(CLI::ExistingFile);
    ingest->add_option("--out", ingest_out, "Write the canonical description here");
    ingest->add_option("--data-dir", ingest_dir, "Also store the site in this data directory");
    ingest->add_flag("--json", ingest_json, "JSON output");

    // specialize
    auto* specialize = app.add_subcommand("specialize", "Partially evaluate a site program");
    std::string spec_site;
    std::vector<std::string> assign_true, assign_false, terms;
    bool spec_json = false;
    specialize->add_option("--site", spec_site, "Site description")->required()->check(CLI::ExistingFile);
    specialize->add_option("--assign", assign_true, "attr=value pairs taken as true");
    specialize->add_option("--deny", assign_false, "attr=value pairs taken as false");
    specialize->add_option("--terms", terms, "Free-text terms mapped through the site lexicon");
    specialize->add_flag("--json", spec_json, "JSON output");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Personability and frozen-design report");
    std::string an_site, an_activities;
    bool an_json = false;
    analyze->add_option("--site", an_site, "Site description")->required()->check(CLI::ExistingFile);
    analyze->add_option("--activities", an_activities, "Activity file")->check(CLI::ExistingFile);
    analyze->add_flag("--json", an_json, "JSON output");

    // derive-templates
    auto* derive = app.add_subcommand("derive-templates", "Explain traces and rank the templates they yield");
    std::string dt_theory, dt_traces, dt_site;
    std::size_t max_frontier = SIZE_MAX;
    std::size_t dt_top_k = kDefaultTopK;
    bool dt_trees = false;
    derive->add_option("--theory", dt_theory, "Domain theory")->required()->check(CLI::ExistingFile);
    derive->add_option("--traces", dt_traces, "Trace log")->required()->check(CLI::ExistingFile);
    derive->add_option("--site", dt_site, "Site description")->required()->check(CLI::ExistingFile);
    derive->add_option("--max-frontier", max_frontier, "Largest cut considered");
    auto* dt_topk_opt = derive->add_option("--top-k", dt_top_k, "Templates kept (PERSONABLE_TOP_K)");
    derive->add_flag("--trees", dt_trees, "Also print explanation trees");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve) {
            if (!*port_opt)
                port = static_cast<int>(env_size("PERSONABLE_PORT", static_cast<std::size_t>(port)));
            if (!*dir_opt)
                data_dir = env("PERSONABLE_DATA_DIR").value_or(data_dir);
            if (!*topk_opt)
                top_k = env_size("PERSONABLE_TOP_K", top_k);
            if (!*thr_opt)
                threshold = env_size("PERSONABLE_REMEMBER_THRESHOLD", threshold);

            SessionService service(ServiceConfig{data_dir, top_k, threshold, verify});
            for (const auto& file : preload)
                service.add_site(load_site(file));
            httplib::Server server;
            install_routes(server, service);
            running_server = &server;
            std::signal(SIGINT, stop_server);
            std::signal(SIGTERM, stop_server);
            std::cerr << "listening on " << host << ':' << port << " (data in " << data_dir << ")\n";
            if (!server.listen(host, port)) {
                std::cerr << "cannot listen on " << host << ':' << port << '\n';
                return 1;
            }
            return 0;
        }

        if (*ingest) {
            const Site site = load_site(ingest_file);
            if (!ingest_out.empty())
                save_site(site, ingest_out);
            if (!ingest_dir.empty()) {
                SessionService service(ServiceConfig{ingest_dir});
                service.add_site(site);
            }
            if (ingest_json) {
                std::cout << json{{"site", site.id},
                                  {"depth", depth(site.program.root)},
                                  {"leaves", leaf_count(site.program.root)},
                                  {"report", to_json(site.report)}}
                                 .dump(2)
                          << '\n';
            } else {
                std::cout << "site " << site.id << ": depth " << depth(site.program.root) << ", "
                          << leaf_count(site.program.root) << " leaves\n";
                for (const auto& v : site.report)
                    std::cout << "  " << v.message << '\n';
                std::cout << render_outline(site.program.root);
            }
            return site.report.empty() ? 0 : 2;
        }

        if (*specialize) {
            const Site site = load_site(spec_site);
            Assignment a;
            for (const auto& t : assign_true)
                a.set(Variable::parse(t), true);
            for (const auto& f : assign_false)
                a.set(Variable::parse(f), false);
            if (!terms.empty()) {
                const TermMapping m = site.mapper().map_terms(terms);
                for (const auto& u : m.unrecognized)
                    std::cerr << "warning: unrecognized term '" << u << "'\n";
                if (!a.merge(m.assignment))
                    throw Error(ErrorCode::Contradiction, "terms contradict the --assign values");
            }
            print_result(partial_evaluate(site.program, a), spec_json);
            return 0;
        }

        if (*analyze) {
            const Site site = load_site(an_site);
            const FrozenDiagnosis frozen = detect_frozen(site.program);
            std::optional<AudienceReport> report;
            if (!an_activities.empty()) {
                const auto activities = load_activities(an_activities);
                report = audience(site.program, activities);
            }
            if (an_json) {
                json out{{"site", site.id}, {"frozen", to_json(frozen)}};
                if (report)
                    out["audience"] = to_json(*report);
                std::cout << out.dump(2) << '\n';
                return 0;
            }
            std::cout << "frozen: " << (frozen.frozen ? "yes" : "no") << " (depth " << frozen.depth << ")\n";
            if (report)
                for (const auto& row : report->rows) {
                    std::cout << row.activity << ": " << to_string(row.verdict.kind);
                    if (!row.verdict.note.empty())
                        std::cout << " - " << row.verdict.note;
                    std::cout << '\n';
                }
            return 0;
        }

        if (*derive) {
            if (!*dt_topk_opt)
                dt_top_k = env_size("PERSONABLE_TOP_K", dt_top_k);
            const Site site = load_site(dt_site);
            const DomainTheory theory = load_theory(dt_theory);
            const auto traces = load_trace_log(dt_traces);
            std::vector<Template> templates;
            json trees = json::array();
            json skipped = json::array();
            for (const auto& t : traces) {
                try {
                    if (dt_trees)
                        trees.push_back(to_json(explain(t, theory)));
                    for (auto& tpl : derive_templates(t, theory, site.program, max_frontier)) {
                        tpl.site_id = site.id;
                        if (std::none_of(templates.begin(), templates.end(),
                                         [&](const Template& x) { return x.name == tpl.name; }))
                            templates.push_back(std::move(tpl));
                    }
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::NoProof)
                        throw;
                    skipped.push_back(json{{"user", t.user_id}, {"session", t.session_id}, {"reason", e.what()}});
                }
            }
            json ranked = json::array();
            for (const auto& s : score_templates(templates, traces, dt_top_k)) {
                json j = to_json(templates[s.index]);
                j["coverage"] = s.coverage;
                j["savings"] = s.savings;
                j["utility"] = s.utility();
                j["applicable"] = s.applicable;
                ranked.push_back(std::move(j));
            }
            json out{{"templates", ranked}, {"skipped", skipped}};
            if (dt_trees)
                out["trees"] = trees;
            std::cout << out.dump(2) << '\n';
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        for (const auto& d : e.details())
            std::cerr << "  " << d << '\n';
        return 1;
    }
    return 0;
}
