#include "personable/http_api.hpp"

#include <httplib.h>

namespace personable {

using nlohmann::json;

int http_status(ErrorCode code)
{
    switch (code) {
    case ErrorCode::UnknownSite:
    case ErrorCode::UnknownTemplate:
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownAttribute:
        return 404;
    case ErrorCode::SessionNotActive:
    case ErrorCode::NotSaved:
    case ErrorCode::NotCompleted:
    case ErrorCode::Contradiction:
    case ErrorCode::ScopeMismatch:
    case ErrorCode::ScopeViolation:
        return 409;
    case ErrorCode::CorruptRecord:
    case ErrorCode::InvariantViolation:
        return 500;
    default:
        return 400;
    }
}

namespace {

void reply(httplib::Response& res, int status, const json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, const Error& e)
{
    reply(res, http_status(e.code()),
          json{{"error", std::string(to_string(e.code()))}, {"message", e.what()}, {"details", e.details()}});
}

json body_of(const httplib::Request& req)
{
    if (req.body.empty())
        return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, std::string("request body: ") + e.what());
    }
}

// Runs `f`, turning library and JSON errors into error responses.
template <class F>
httplib::Server::Handler guarded(F f)
{
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const Error& e) {
            fail(res, e);
        } catch (const json::exception& e) {
            fail(res, Error(ErrorCode::ParseError, std::string("request body: ") + e.what()));
        }
    };
}

json page_with(const Session& s, SessionService& service, const StepOutcome* outcome = nullptr)
{
    json view = page_view(s, *service.site(s.site_id));
    if (outcome) {
        view["warnings"] = outcome->warnings;
        view["no_match"] = outcome->no_match;
    }
    return view;
}

std::optional<std::string> optional_string(const json& j, const char* key)
{
    if (!j.contains(key) || j.at(key).is_null())
        return std::nullopt;
    return j.at(key).get<std::string>();
}

} // namespace

void install_routes(httplib::Server& server, SessionService& service)
{
    server.Post("/sites", guarded([&](const httplib::Request& req, httplib::Response& res) {
        Site site = parse_site(req.body);
        const json report = to_json(site.report);
        const std::string id = service.add_site(std::move(site));
        reply(res, 201, json{{"site", id}, {"report", report}});
    }));

    server.Get("/sites", guarded([&](const httplib::Request&, httplib::Response& res) {
        reply(res, 200, json{{"sites", service.site_ids()}});
    }));

    server.Get(R"(/sites/([^/]+)/analysis)", guarded([&](const httplib::Request& req, httplib::Response& res) {
        reply(res, 200, service.analysis(req.matches[1]));
    }));

    server.Post(R"(/sites/([^/]+)/analysis)", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const auto activities = parse_activities(body_of(req));
        reply(res, 200, service.analysis(req.matches[1], activities));
    }));

    server.Get(R"(/sites/([^/]+)/templates)", guarded([&](const httplib::Request& req, httplib::Response& res) {
        json list = json::array();
        for (const auto& [tpl, score] : service.ranked_templates(req.matches[1])) {
            json j = to_json(tpl);
            if (score) {
                j["coverage"] = score->coverage;
                j["savings"] = score->savings;
                j["utility"] = score->utility();
                j["applicable"] = score->applicable;
            }
            list.push_back(std::move(j));
        }
        reply(res, 200, json{{"templates", list}});
    }));

    server.Post(R"(/sites/([^/]+)/templates)", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const std::string site_id = req.matches[1];
        Template tpl = template_from_json(body_of(req), service.site(site_id)->program);
        const json out = to_json(tpl);
        service.add_template(site_id, std::move(tpl));
        reply(res, 201, out);
    }));

    server.Post(R"(/sites/([^/]+)/theory)", guarded([&](const httplib::Request& req, httplib::Response& res) {
        service.add_theory(req.matches[1], parse_theory(body_of(req)));
        reply(res, 201, json{{"site", std::string(req.matches[1])}});
    }));

    server.Post("/sessions", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const json body = body_of(req);
        const Session s = service.create_session(body.at("site").get<std::string>(), optional_string(body, "template"),
                                                 optional_string(body, "user"));
        reply(res, 201, page_with(s, service));
    }));

    server.Get(R"(/sessions/([^/]+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
        reply(res, 200, to_json(service.get(req.matches[1])));
    }));

    server.Get(R"(/sessions/([^/]+)/page)", guarded([&](const httplib::Request& req, httplib::Response& res) {
        reply(res, 200, page_with(service.get(req.matches[1]), service));
    }));

    server.Post(R"(/sessions/([^/]+)/click)", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const json body = body_of(req);
        StepOutcome outcome;
        const Session s = service.submit_click(req.matches[1], Variable::parse(body.at("variable").get<std::string>()),
                                               &outcome);
        reply(res, 200, page_with(s, service, &outcome));
    }));

    server.Post(R"(/sessions/([^/]+)/out-of-turn)", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const json body = body_of(req);
        StepOutcome outcome;
        const Session s =
            service.submit_out_of_turn(req.matches[1], body.at("terms").get<std::vector<std::string>>(), &outcome);
        reply(res, 200, page_with(s, service, &outcome));
    }));

    server.Post(R"(/sessions/([^/]+)/fill)", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const json body = body_of(req);
        const Session s =
            service.fill_slot(req.matches[1], body.at("slot").get<std::string>(), body.at("value").get<std::string>());
        reply(res, 200, page_with(s, service));
    }));

    server.Get(R"(/sessions/([^/]+)/choices)", guarded([&](const httplib::Request& req, httplib::Response& res) {
        if (!req.has_param("attribute"))
            throw Error(ErrorCode::UnknownAttribute, "missing attribute parameter");
        const std::string attribute = req.get_param_value("attribute");
        reply(res, 200, json{{"attribute", attribute}, {"values", service.list_choices(req.matches[1], attribute)}});
    }));

    server.Post(R"(/sessions/([^/]+)/save)", guarded([&](const httplib::Request& req, httplib::Response& res) {
        reply(res, 200, page_with(service.save_session(req.matches[1]), service));
    }));

    server.Post(R"(/sessions/([^/]+)/resume)", guarded([&](const httplib::Request& req, httplib::Response& res) {
        reply(res, 200, page_with(service.resume_session(req.matches[1]), service));
    }));

    server.Get(R"(/sessions/([^/]+)/trace)", guarded([&](const httplib::Request& req, httplib::Response& res) {
        reply(res, 200, to_json(service.export_trace(req.matches[1])));
    }));
}

} // namespace personable
