#pragma once

// Browsing sessions over loaded sites.
//
// A session accumulates the assignment the user has supplied (by clicking,
// by out-of-turn terms, or through a template at start) and keeps the current
// specialized program. Every mutation is appended to the session's history,
// and replaying the history rebuilds the session.

#include "personable/ebg.hpp"
#include "personable/personability.hpp"
#include "personable/site.hpp"
#include "personable/specializer.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace personable {

enum class StepKind { Template, Click, OutOfTurn, Fill };

std::string_view to_string(StepKind kind);
StepKind step_kind_from_string(std::string_view text);

struct SessionStep {
    StepKind kind = StepKind::Click;
    std::int64_t seq = 0;
    std::string template_id;           // Template
    std::optional<Variable> variable;  // Click
    std::vector<std::string> terms;    // OutOfTurn
    std::string slot, value;           // Fill
    std::map<std::string, std::string> slots;  // Template
    // Variables this step contributed to the applied assignment.
    Assignment added;
    std::vector<std::string> warnings;

    friend bool operator==(const SessionStep&, const SessionStep&) = default;
};

enum class SessionStatus { Active, Saved, Completed };

std::string_view to_string(SessionStatus status);
SessionStatus session_status_from_string(std::string_view text);

struct Session {
    std::string id;
    std::string site_id;
    std::optional<std::string> user_id;
    std::optional<std::string> template_id;
    Assignment applied;
    SpecializationResult current;
    std::map<std::string, std::string> slots;
    std::vector<SessionStep> history;
    SessionStatus status = SessionStatus::Active;
    bool ever_saved = false;
};

// Same applied assignment, slots, history, status and an equal current
// program with the same eliminated pages.
[[nodiscard]] bool sessions_equal(const Session& a, const Session& b);

// Outcome of one submission.
struct StepOutcome {
    std::vector<std::string> warnings;
    // The submission would have admitted no leaf; the state was kept.
    bool no_match = false;
};

struct ExportedTrace {
    Trace trace;
    // Template the session started from; kept out of the events.
    std::optional<std::string> template_id;
};

// The current page as served to clients.
[[nodiscard]] nlohmann::json page_view(const Session& s, const Site& site);
[[nodiscard]] nlohmann::json to_json(const SessionStep& step);
[[nodiscard]] SessionStep step_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json to_json(const ExportedTrace& t);
// Complete durable form, including the current program.
[[nodiscard]] nlohmann::json to_json(const Session& s);

class SessionStore;

struct RankedTemplate {
    Template tpl;
    // Absent while the site has no exported traces to score against.
    std::optional<TemplateScore> score;
};

struct ServiceConfig {
    std::filesystem::path data_dir;
    std::size_t top_k = kDefaultTopK;
    std::size_t remember_threshold = 1;
    // Recompute the current program from the base after every mutation and
    // fail with InvariantViolation on any difference.
    bool verify = false;
};

class SessionService {
public:
    // With an empty data_dir nothing is persisted.
    explicit SessionService(ServiceConfig config);
    ~SessionService();

    SessionService(const SessionService&) = delete;
    SessionService& operator=(const SessionService&) = delete;

    // Sites and templates.
    std::string add_site(Site site);
    [[nodiscard]] std::shared_ptr<const Site> site(const std::string& id) const;
    [[nodiscard]] std::vector<std::string> site_ids() const;
    void add_template(const std::string& site_id, Template tpl);
    void add_theory(const std::string& site_id, DomainTheory theory);
    // Stored templates plus remembrance templates for users with enough traces.
    [[nodiscard]] std::vector<Template> templates(const std::string& site_id) const;
    // Templates scored against the site's exported traces and capped at
    // top_k, vanilla kept. Unscored, in storage order, before any export.
    [[nodiscard]] std::vector<RankedTemplate> ranked_templates(const std::string& site_id) const;
    [[nodiscard]] Template find_template(const std::string& site_id, const std::string& template_id) const;
    // Frozen diagnosis, validation report and, given activities, the audience table.
    [[nodiscard]] nlohmann::json analysis(const std::string& site_id, std::span<const ActivitySpec> activities = {}) const;

    // Sessions.
    Session create_session(const std::string& site_id, const std::optional<std::string>& template_id = std::nullopt,
                           const std::optional<std::string>& user_id = std::nullopt);
    [[nodiscard]] Session get(const std::string& session_id) const;
    Session submit_click(const std::string& session_id, const Variable& v, StepOutcome* outcome = nullptr);
    Session submit_out_of_turn(const std::string& session_id, const std::vector<std::string>& terms,
                               StepOutcome* outcome = nullptr);
    Session fill_slot(const std::string& session_id, const std::string& slot, const std::string& value);
    [[nodiscard]] std::vector<std::string> list_choices(const std::string& session_id, const std::string& attribute) const;
    Session save_session(const std::string& session_id);
    Session resume_session(const std::string& session_id);
    ExportedTrace export_trace(const std::string& session_id);

    // Rebuilds a session of this service's sites from its history alone.
    [[nodiscard]] Session replay(const std::string& site_id, const std::string& session_id,
                                 const std::optional<std::string>& user_id,
                                 const std::vector<SessionStep>& history) const;

    [[nodiscard]] const ServiceConfig& config() const noexcept { return config_; }

private:
    struct Slot {
        std::mutex mutex;
        Session session;
    };

    std::shared_ptr<Slot> slot_for(const std::string& session_id) const;
    void apply_step(Session& s, const Site& site, SessionStep step, StepOutcome* outcome) const;
    void update_status(Session& s, const Site& site) const;
    void check_invariant(const Session& s, const Site& site) const;
    void persist(const Session& s, const SessionStep* step, std::string_view event);
    std::vector<Template> templates_locked(const std::string& site_id) const;

    ServiceConfig config_;
    std::unique_ptr<SessionStore> store_;

    mutable std::shared_mutex catalog_mutex_;
    std::map<std::string, std::shared_ptr<const Site>> sites_;
    std::map<std::string, std::vector<Template>> templates_;
    std::map<std::string, std::unique_ptr<Remembrance>> remembrance_;
    std::map<std::string, std::vector<Trace>> observed_;

    mutable std::mutex sessions_mutex_;
    mutable std::map<std::string, std::shared_ptr<Slot>> sessions_;
    std::uint64_t next_session_ = 0;
};

} // namespace personable
