#pragma once

// JSON over HTTP for a SessionService.
//
//   POST /sites                          site description -> {site, report}
//   GET  /sites                          {sites: [...]}
//   GET  /sites/{id}/analysis            frozen diagnosis and validation report
//   POST /sites/{id}/analysis            same, plus the audience table for {activities}
//   GET  /sites/{id}/templates           {templates: [...]}
//   POST /sites/{id}/templates           add one template
//   POST /sites/{id}/theory              install a domain theory (enables remembrance)
//   POST /sessions                       {site, template?, user?} -> page view
//   GET  /sessions/{id}                  full session state
//   GET  /sessions/{id}/page             page view
//   POST /sessions/{id}/click            {variable}
//   POST /sessions/{id}/out-of-turn      {terms: [...]}
//   POST /sessions/{id}/fill             {slot, value}
//   GET  /sessions/{id}/choices?attribute=
//   POST /sessions/{id}/save
//   POST /sessions/{id}/resume
//   GET  /sessions/{id}/trace
//
// Failures answer {error, message, details} with 404 for unknown ids, 409
// for requests the session state forbids and 400 for malformed input.

#include "personable/error.hpp"
#include "personable/session.hpp"

namespace httplib {
class Server;
}

namespace personable {

[[nodiscard]] int http_status(ErrorCode code);

void install_routes(httplib::Server& server, SessionService& service);

} // namespace personable
