#include "personable/session.hpp"

#include "personable/personability.hpp"
#include "personable/store.hpp"

#include <algorithm>
#include <random>

namespace personable {

using nlohmann::json;

std::string_view to_string(StepKind kind)
{
    switch (kind) {
    case StepKind::Template: return "template";
    case StepKind::Click: return "click";
    case StepKind::OutOfTurn: return "out-of-turn";
    case StepKind::Fill: return "fill";
    }
    return "unknown";
}

StepKind step_kind_from_string(std::string_view text)
{
    if (text == "template")
        return StepKind::Template;
    if (text == "click")
        return StepKind::Click;
    if (text == "out-of-turn")
        return StepKind::OutOfTurn;
    if (text == "fill")
        return StepKind::Fill;
    throw Error(ErrorCode::CorruptRecord, "unknown step kind '" + std::string(text) + "'");
}

std::string_view to_string(SessionStatus status)
{
    switch (status) {
    case SessionStatus::Active: return "active";
    case SessionStatus::Saved: return "saved";
    case SessionStatus::Completed: return "completed";
    }
    return "unknown";
}

SessionStatus session_status_from_string(std::string_view text)
{
    if (text == "active")
        return SessionStatus::Active;
    if (text == "saved")
        return SessionStatus::Saved;
    if (text == "completed")
        return SessionStatus::Completed;
    throw Error(ErrorCode::CorruptRecord, "unknown session status '" + std::string(text) + "'");
}

namespace {

bool results_equal(const SpecializationResult& a, const SpecializationResult& b)
{
    if (a.kind != b.kind || a.eliminated != b.eliminated || a.program.has_value() != b.program.has_value())
        return false;
    return !a.program || structurally_equal(*a.program, *b.program);
}

json result_json(const SpecializationResult& r)
{
    return json{{"kind", std::string(to_string(r.kind))},
                {"program", r.program ? to_json(r.program->root) : json(nullptr)},
                {"eliminated", r.eliminated}};
}

std::string new_session_id()
{
    static std::mutex m;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(m);
    static const char* hex = "0123456789abcdef";
    std::string id;
    for (int i = 0; i < 4; ++i) {
        const std::uint64_t x = rng();
        for (int k = 0; k < 4; ++k)
            id.push_back(hex[(x >> (4 * k)) & 15]);
    }
    return id;
}

} // namespace

bool sessions_equal(const Session& a, const Session& b)
{
    return a.id == b.id && a.site_id == b.site_id && a.user_id == b.user_id && a.template_id == b.template_id &&
           a.applied == b.applied && a.slots == b.slots && a.history == b.history && a.status == b.status &&
           a.ever_saved == b.ever_saved && results_equal(a.current, b.current);
}

json to_json(const SessionStep& step)
{
    json j{{"kind", std::string(to_string(step.kind))}, {"seq", step.seq}, {"added", to_json(step.added)}};
    switch (step.kind) {
    case StepKind::Template:
        j["template"] = step.template_id;
        j["slots"] = step.slots;
        break;
    case StepKind::Click: j["variable"] = step.variable ? step.variable->str() : std::string(); break;
    case StepKind::OutOfTurn: j["terms"] = step.terms; break;
    case StepKind::Fill:
        j["slot"] = step.slot;
        j["value"] = step.value;
        break;
    }
    if (!step.warnings.empty())
        j["warnings"] = step.warnings;
    return j;
}

SessionStep step_from_json(const json& j)
{
    try {
        SessionStep s;
        s.kind = step_kind_from_string(j.at("kind").get<std::string>());
        s.seq = j.value("seq", std::int64_t{0});
        if (j.contains("added"))
            s.added = assignment_from_json(j.at("added"));
        s.template_id = j.value("template", std::string());
        s.slots = j.value("slots", std::map<std::string, std::string>{});
        if (j.contains("variable"))
            s.variable = Variable::parse(j.at("variable").get<std::string>());
        s.terms = j.value("terms", std::vector<std::string>{});
        s.slot = j.value("slot", std::string());
        s.value = j.value("value", std::string());
        s.warnings = j.value("warnings", std::vector<std::string>{});
        return s;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptRecord, std::string("malformed step: ") + e.what());
    }
}

json to_json(const ExportedTrace& t)
{
    json j = to_json(t.trace);
    j["template"] = t.template_id ? json(*t.template_id) : json(nullptr);
    return j;
}

json to_json(const Session& s)
{
    json history = json::array();
    for (const auto& step : s.history)
        history.push_back(to_json(step));
    return json{{"id", s.id},
                {"site", s.site_id},
                {"user", s.user_id ? json(*s.user_id) : json(nullptr)},
                {"template", s.template_id ? json(*s.template_id) : json(nullptr)},
                {"status", std::string(to_string(s.status))},
                {"ever_saved", s.ever_saved},
                {"applied", to_json(s.applied)},
                {"slots", s.slots},
                {"history", history},
                {"current", result_json(s.current)}};
}

json page_view(const Session& s, const Site& site)
{
    json view{{"session", s.id},
              {"site", s.site_id},
              {"status", std::string(to_string(s.status))},
              {"kind", std::string(to_string(s.current.kind))},
              {"user", s.user_id ? json(*s.user_id) : json(nullptr)},
              {"template", s.template_id ? json(*s.template_id) : json(nullptr)},
              {"applied", to_json(s.applied)},
              {"eliminated", s.current.eliminated},
              {"slots", s.slots}};
    json pending = json::array();
    for (const auto& slot : site.slots)
        if (!s.slots.contains(slot))
            pending.push_back(slot);
    view["pending_slots"] = pending;

    if (!s.current.program) {
        view["page"] = nullptr;
        return view;
    }
    const Node& root = s.current.program->root;
    if (!root.is_leaf() && root.edges.empty())
        throw Error(ErrorCode::InvariantViolation, "refusing to serve an empty branch page '" + root.page_id + "'");
    json page{{"id", root.page_id}, {"leaf", root.is_leaf()}};
    if (root.content) {
        page["content"] = *root.content;
        if (auto it = site.content.find(*root.content); it != site.content.end()) {
            page["title"] = it->second.title;
            page["body"] = it->second.body;
        }
    }
    json edges = json::array();
    for (const auto& e : root.edges)
        edges.push_back(json{{"variable", e.variable.str()},
                             {"attribute", e.variable.attribute},
                             {"value", e.variable.value},
                             {"anchor", e.anchor.empty() ? e.variable.value : e.anchor},
                             {"resolved", e.resolved}});
    page["edges"] = edges;
    view["page"] = page;
    return view;
}

SessionService::SessionService(ServiceConfig config) : config_(std::move(config))
{
    if (config_.data_dir.empty())
        return;
    store_ = std::make_unique<SessionStore>(config_.data_dir);
    for (const auto& id : store_->site_ids()) {
        auto site = std::make_shared<const Site>(store_->get_site(id));
        templates_[id] = store_->get_templates(id, site->program);
        observed_[id] = store_->get_observed(id);
        if (auto theory = store_->get_theory(id)) {
            auto memory = std::make_unique<Remembrance>(*theory, site->program, config_.remember_threshold);
            for (const auto& t : observed_[id]) {
                if (t.user_id.empty())
                    continue;
                try {
                    memory->observe(t);
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::NoProof)
                        throw;
                }
            }
            remembrance_[id] = std::move(memory);
        }
        sites_[id] = std::move(site);
    }
}

SessionService::~SessionService() = default;

std::string SessionService::add_site(Site site)
{
    if (site.id.empty())
        throw Error(ErrorCode::SchemaError, "site id must not be empty");
    auto shared = std::make_shared<const Site>(std::move(site));
    std::unique_lock lock(catalog_mutex_);
    if (store_)
        store_->put_site(*shared);
    const std::string id = shared->id;
    sites_[id] = std::move(shared);
    templates_[id].clear();
    observed_[id].clear();
    if (store_) {
        store_->put_templates(id, {});
        store_->clear_observed(id);
    }
    remembrance_.erase(id);
    return id;
}

std::shared_ptr<const Site> SessionService::site(const std::string& id) const
{
    std::shared_lock lock(catalog_mutex_);
    auto it = sites_.find(id);
    if (it == sites_.end())
        throw Error(ErrorCode::UnknownSite, "unknown site '" + id + "'");
    return it->second;
}

std::vector<std::string> SessionService::site_ids() const
{
    std::shared_lock lock(catalog_mutex_);
    std::vector<std::string> ids;
    for (const auto& [id, _] : sites_)
        ids.push_back(id);
    return ids;
}

void SessionService::add_template(const std::string& site_id, Template tpl)
{
    std::unique_lock lock(catalog_mutex_);
    if (!sites_.contains(site_id))
        throw Error(ErrorCode::UnknownSite, "unknown site '" + site_id + "'");
    tpl.site_id = site_id;
    auto& list = templates_[site_id];
    std::erase_if(list, [&](const Template& t) { return t.name == tpl.name; });
    list.push_back(std::move(tpl));
    if (store_)
        store_->put_templates(site_id, list);
}

void SessionService::add_theory(const std::string& site_id, DomainTheory theory)
{
    theory.validate();
    std::unique_lock lock(catalog_mutex_);
    auto it = sites_.find(site_id);
    if (it == sites_.end())
        throw Error(ErrorCode::UnknownSite, "unknown site '" + site_id + "'");
    if (store_)
        store_->put_theory(site_id, theory);
    remembrance_[site_id] = std::make_unique<Remembrance>(std::move(theory), it->second->program, config_.remember_threshold);
}

std::vector<Template> SessionService::templates_locked(const std::string& site_id) const
{
    if (!sites_.contains(site_id))
        throw Error(ErrorCode::UnknownSite, "unknown site '" + site_id + "'");
    std::vector<Template> out;
    if (auto it = templates_.find(site_id); it != templates_.end())
        out = it->second;
    if (auto it = remembrance_.find(site_id); it != remembrance_.end())
        for (const auto& user : it->second->users())
            if (auto tpl = it->second->recall(user)) {
                tpl->site_id = site_id;
                out.push_back(std::move(*tpl));
            }
    return out;
}

std::vector<Template> SessionService::templates(const std::string& site_id) const
{
    std::shared_lock lock(catalog_mutex_);
    return templates_locked(site_id);
}

std::vector<RankedTemplate> SessionService::ranked_templates(const std::string& site_id) const
{
    std::shared_lock lock(catalog_mutex_);
    const std::vector<Template> all = templates_locked(site_id);
    std::vector<RankedTemplate> out;
    auto it = observed_.find(site_id);
    if (it == observed_.end() || it->second.empty()) {
        for (const auto& t : all)
            out.push_back(RankedTemplate{t, std::nullopt});
        return out;
    }
    for (const auto& score : score_templates(all, it->second, config_.top_k))
        out.push_back(RankedTemplate{all[score.index], score});
    return out;
}

Template SessionService::find_template(const std::string& site_id, const std::string& template_id) const
{
    for (auto& t : templates(site_id))
        if (t.name == template_id)
            return std::move(t);
    throw Error(ErrorCode::UnknownTemplate, "site '" + site_id + "' has no template '" + template_id + "'");
}

json SessionService::analysis(const std::string& site_id, std::span<const ActivitySpec> activities) const
{
    const auto s = site(site_id);
    const InteractionProgram& p = s->program;
    json out{{"site", s->id},
             {"depth", depth(p.root)},
             {"leaves", leaf_count(p.root)},
             {"frozen", to_json(detect_frozen(p))},
             {"report", to_json(s->report)}};
    if (!activities.empty())
        out["audience"] = to_json(audience(p, activities));
    return out;
}

namespace {

void require_active(const Session& s)
{
    if (s.status != SessionStatus::Active)
        throw Error(ErrorCode::SessionNotActive,
                    "session '" + s.id + "' is " + std::string(to_string(s.status)) + ", not active");
}

} // namespace

void SessionService::apply_step(Session& s, const Site& site, SessionStep step, StepOutcome* outcome) const
{
    StepOutcome local;
    StepOutcome& out = outcome ? *outcome : local;
    const InteractionProgram& base = site.program;

    switch (step.kind) {
    case StepKind::Template: {
        const Assignment baked = close_under_exclusivity(base.schema, step.added);
        s.applied = baked;
        s.slots = step.slots;
        s.current = partial_evaluate(base, baked);
        s.template_id = step.template_id;
        step.added = baked;
        break;
    }
    case StepKind::Click: {
        require_active(s);
        if (!step.variable)
            throw Error(ErrorCode::NoSuchEdge, "click without a variable");
        if (!s.current.program || s.current.complete())
            throw Error(ErrorCode::NoSuchEdge, "the current page has no links");
        const InteractionProgram& cur = *s.current.program;
        SpecializationResult r = click(cur, cur.root.page_id, *step.variable);
        const Assignment delta = assert_true(base.schema, *step.variable);
        Assignment merged = s.applied;
        if (!merged.merge(delta))
            throw Error(ErrorCode::InvariantViolation, "clicked edge contradicts the session assignment");
        step.added = delta.without(s.applied);
        r.eliminated.insert(s.current.eliminated.begin(), s.current.eliminated.end());
        s.applied = std::move(merged);
        s.current = std::move(r);
        break;
    }
    case StepKind::OutOfTurn: {
        require_active(s);
        const InputMapper mapper = site.mapper();
        TermMapping m;
        try {
            m = mapper.map_terms(step.terms);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::AllTermsUnknown)
                throw;
            for (const auto& t : step.terms)
                out.warnings.push_back("unrecognized term '" + t + "'");
            return;
        }
        for (const auto& t : m.unrecognized)
            out.warnings.push_back("unrecognized term '" + t + "'");
        Assignment merged = s.applied;
        if (!merged.merge(m.assignment)) {
            std::vector<std::string> details;
            for (const auto& [v, value] : m.assignment.entries()) {
                const auto prior = s.applied.get(v);
                if (!prior || *prior == value)
                    continue;
                details.push_back(v.str() + " is " + (*prior ? "true" : "false") + " in the session but the terms make it " +
                                  (value ? "true" : "false"));
                for (auto& line : mapper.derivation_chain(m, v))
                    details.push_back("  " + line);
            }
            throw Error(ErrorCode::Contradiction, "the terms contradict what the session already knows", details);
        }
        SpecializationResult r = partial_evaluate(*s.current.program, m.assignment);
        if (r.empty()) {
            out.no_match = true;
            out.warnings.push_back("no page matches the supplied terms; nothing changed");
            return;
        }
        step.added = m.assignment.without(s.applied);
        step.warnings = out.warnings;
        r.eliminated.insert(s.current.eliminated.begin(), s.current.eliminated.end());
        s.applied = std::move(merged);
        s.current = std::move(r);
        break;
    }
    case StepKind::Fill: {
        require_active(s);
        if (std::find(site.slots.begin(), site.slots.end(), step.slot) == site.slots.end())
            throw Error(ErrorCode::UnknownAttribute, "site '" + site.id + "' has no slot '" + step.slot + "'");
        s.slots[step.slot] = step.value;
        step.added = Assignment{};
        break;
    }
    }
    step.seq = static_cast<std::int64_t>(s.history.size()) + 1;
    s.history.push_back(std::move(step));
    update_status(s, site);
    if (config_.verify)
        check_invariant(s, site);
}

void SessionService::update_status(Session& s, const Site& site) const
{
    if (s.status == SessionStatus::Saved)
        return;
    const bool slots_done = std::all_of(site.slots.begin(), site.slots.end(),
                                        [&](const std::string& slot) { return s.slots.contains(slot); });
    s.status = s.current.complete() && slots_done ? SessionStatus::Completed : SessionStatus::Active;
}

void SessionService::check_invariant(const Session& s, const Site& site) const
{
    const SpecializationResult expected = partial_evaluate(site.program, s.applied);
    if (!results_equal(expected, s.current))
        throw Error(ErrorCode::InvariantViolation, "session '" + s.id + "' drifted from the base program",
                    {"expected:\n" + (expected.program ? render_outline(expected.program->root) : std::string("(empty)")),
                     "current:\n" + (s.current.program ? render_outline(s.current.program->root) : std::string("(empty)"))});
}

void SessionService::persist(const Session& s, const SessionStep* step, std::string_view event)
{
    if (!store_)
        return;
    json rec{{"event", std::string(event)}};
    if (event == "create") {
        rec["session"] = s.id;
        rec["site"] = s.site_id;
        rec["user"] = s.user_id ? json(*s.user_id) : json(nullptr);
    }
    if (step)
        rec["step"] = to_json(*step);
    store_->append_session_event(s.id, rec);
    if (event == "save")
        store_->put_snapshot(s.id, to_json(s));
}

std::shared_ptr<SessionService::Slot> SessionService::slot_for(const std::string& session_id) const
{
    std::lock_guard lock(sessions_mutex_);
    if (auto it = sessions_.find(session_id); it != sessions_.end())
        return it->second;
    if (!store_ || !store_->has_session(session_id))
        throw Error(ErrorCode::UnknownSession, "unknown session '" + session_id + "'");

    // Recovery: replay the event log.
    const auto records = store_->session_log(session_id);
    const json& head = records.front();
    Session s;
    std::shared_ptr<const Site> site_ptr;
    try {
        s.id = head.at("session").get<std::string>();
        s.site_id = head.at("site").get<std::string>();
        if (!head.at("user").is_null())
            s.user_id = head.at("user").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptRecord, "session '" + session_id + "': " + e.what());
    }
    site_ptr = site(s.site_id);
    s.current = partial_evaluate(site_ptr->program, Assignment{});
    update_status(s, *site_ptr);
    for (std::size_t i = 1; i < records.size(); ++i) {
        const std::string event = records[i].value("event", std::string());
        if (event == "step") {
            if (s.status == SessionStatus::Saved)
                throw Error(ErrorCode::CorruptRecord, "session '" + session_id + "' mutated while saved");
            apply_step(s, *site_ptr, step_from_json(records[i].at("step")), nullptr);
        } else if (event == "save") {
            s.status = SessionStatus::Saved;
            s.ever_saved = true;
        } else if (event == "resume") {
            s.status = SessionStatus::Active;
            update_status(s, *site_ptr);
        } else if (event != "export") {
            throw Error(ErrorCode::CorruptRecord, "session '" + session_id + "': unknown event '" + event + "'");
        }
    }
    if (s.status == SessionStatus::Saved) {
        const auto snapshot = store_->get_snapshot(session_id);
        if (!snapshot || *snapshot != to_json(s))
            throw Error(ErrorCode::CorruptRecord, "session '" + session_id + "' log and snapshot disagree");
    }
    auto slot = std::make_shared<Slot>();
    slot->session = std::move(s);
    sessions_[session_id] = slot;
    return slot;
}

Session SessionService::create_session(const std::string& site_id, const std::optional<std::string>& template_id,
                                       const std::optional<std::string>& user_id)
{
    const auto site_ptr = site(site_id);
    std::optional<Template> tpl;
    if (template_id) {
        tpl = find_template(site_id, *template_id);
        if (!tpl->scope.global() && (!user_id || *user_id != tpl->scope.user_id))
            throw Error(ErrorCode::ScopeMismatch, "template '" + *template_id + "' belongs to user '" +
                                                      tpl->scope.user_id + "'");
    }

    Session s;
    s.site_id = site_id;
    s.user_id = user_id;
    s.current = partial_evaluate(site_ptr->program, Assignment{});
    {
        std::lock_guard lock(sessions_mutex_);
        do
            s.id = new_session_id();
        while (sessions_.contains(s.id) || (store_ && store_->has_session(s.id)));
    }
    update_status(s, *site_ptr);
    persist(s, nullptr, "create");
    if (tpl) {
        SessionStep step;
        step.kind = StepKind::Template;
        step.template_id = tpl->name;
        step.added = tpl->baked;
        step.slots = tpl->baked_slots;
        apply_step(s, *site_ptr, step, nullptr);
        persist(s, &s.history.back(), "step");
    }
    if (config_.verify)
        check_invariant(s, *site_ptr);

    auto slot = std::make_shared<Slot>();
    slot->session = s;
    std::lock_guard lock(sessions_mutex_);
    sessions_[s.id] = std::move(slot);
    return s;
}

Session SessionService::get(const std::string& session_id) const
{
    auto slot = slot_for(session_id);
    std::lock_guard lock(slot->mutex);
    return slot->session;
}

namespace {

template <class F>
Session mutate_slot(std::mutex& m, Session& stored, F&& f)
{
    std::lock_guard lock(m);
    Session copy = stored;
    f(copy);
    stored = copy;
    return copy;
}

} // namespace

Session SessionService::submit_click(const std::string& session_id, const Variable& v, StepOutcome* outcome)
{
    auto slot = slot_for(session_id);
    const auto site_ptr = site(slot->session.site_id);
    return mutate_slot(slot->mutex, slot->session, [&](Session& s) {
        SessionStep step;
        step.kind = StepKind::Click;
        step.variable = v;
        apply_step(s, *site_ptr, step, outcome);
        persist(s, &s.history.back(), "step");
    });
}

Session SessionService::submit_out_of_turn(const std::string& session_id, const std::vector<std::string>& terms,
                                           StepOutcome* outcome)
{
    auto slot = slot_for(session_id);
    const auto site_ptr = site(slot->session.site_id);
    return mutate_slot(slot->mutex, slot->session, [&](Session& s) {
        SessionStep step;
        step.kind = StepKind::OutOfTurn;
        step.terms = terms;
        const std::size_t before = s.history.size();
        apply_step(s, *site_ptr, step, outcome);
        if (s.history.size() > before)
            persist(s, &s.history.back(), "step");
    });
}

Session SessionService::fill_slot(const std::string& session_id, const std::string& slot_name, const std::string& value)
{
    auto slot = slot_for(session_id);
    const auto site_ptr = site(slot->session.site_id);
    return mutate_slot(slot->mutex, slot->session, [&](Session& s) {
        SessionStep step;
        step.kind = StepKind::Fill;
        step.slot = slot_name;
        step.value = value;
        apply_step(s, *site_ptr, step, nullptr);
        persist(s, &s.history.back(), "step");
    });
}

std::vector<std::string> SessionService::list_choices(const std::string& session_id, const std::string& attribute) const
{
    const Session s = get(session_id);
    const auto site_ptr = site(s.site_id);
    const Attribute* attr = site_ptr->program.schema.find(attribute);
    if (!attr)
        throw Error(ErrorCode::UnknownAttribute, "site '" + s.site_id + "' has no attribute '" + attribute + "'");
    if (auto decided = s.applied.true_value_of(attribute))
        return {*decided};
    std::set<std::string> seen;
    if (s.current.program)
        for (const auto& v : variables_in_use(s.current.program->root))
            if (v.attribute == attribute && !s.applied.is_false(v))
                seen.insert(v.value);
    std::vector<std::string> out;
    for (const auto& value : attr->values)
        if (seen.contains(value))
            out.push_back(value);
    return out;
}

Session SessionService::save_session(const std::string& session_id)
{
    auto slot = slot_for(session_id);
    return mutate_slot(slot->mutex, slot->session, [&](Session& s) {
        require_active(s);
        s.status = SessionStatus::Saved;
        s.ever_saved = true;
        persist(s, nullptr, "save");
    });
}

Session SessionService::resume_session(const std::string& session_id)
{
    auto slot = slot_for(session_id);
    const auto site_ptr = site(slot->session.site_id);
    return mutate_slot(slot->mutex, slot->session, [&](Session& s) {
        if (!s.ever_saved)
            throw Error(ErrorCode::NotSaved, "session '" + s.id + "' was never saved");
        if (s.status != SessionStatus::Saved)
            return;
        const Session rebuilt = replay(s.site_id, s.id, s.user_id, s.history);
        if (!results_equal(rebuilt.current, s.current) || rebuilt.applied != s.applied || rebuilt.slots != s.slots)
            throw Error(ErrorCode::CorruptRecord, "session '" + s.id + "' does not replay to its saved state");
        if (store_) {
            const auto snapshot = store_->get_snapshot(s.id);
            if (!snapshot || *snapshot != to_json(s))
                throw Error(ErrorCode::CorruptRecord, "session '" + s.id + "' differs from its saved snapshot");
        }
        s.status = SessionStatus::Active;
        update_status(s, *site_ptr);
        persist(s, nullptr, "resume");
    });
}

ExportedTrace SessionService::export_trace(const std::string& session_id)
{
    const Session s = get(session_id);
    if (s.status != SessionStatus::Completed)
        throw Error(ErrorCode::NotCompleted, "session '" + s.id + "' is not completed");
    ExportedTrace out;
    out.template_id = s.template_id;
    out.trace.user_id = s.user_id.value_or("");
    out.trace.session_id = s.id;
    for (const auto& step : s.history) {
        switch (step.kind) {
        case StepKind::Template: break;
        case StepKind::Click:
            out.trace.events.push_back({EventKind::Click, step.variable->attribute, step.variable->value, step.seq});
            break;
        case StepKind::OutOfTurn:
            for (const auto& v : step.added.true_variables())
                out.trace.events.push_back({EventKind::OutOfTurn, v.attribute, v.value, step.seq});
            break;
        case StepKind::Fill:
            out.trace.events.push_back({EventKind::FormFill, step.slot, step.value, step.seq});
            break;
        }
    }
    {
        auto slot = slot_for(session_id);
        std::lock_guard lock(slot->mutex);
        persist(slot->session, nullptr, "export");
    }
    std::unique_lock lock(catalog_mutex_);
    observed_[s.site_id].push_back(out.trace);
    if (store_)
        store_->append_observed(s.site_id, out.trace);
    if (s.user_id) {
        if (auto it = remembrance_.find(s.site_id); it != remembrance_.end()) {
            try {
                it->second->observe(out.trace);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NoProof)
                    throw;
            }
        }
    }
    return out;
}

Session SessionService::replay(const std::string& site_id, const std::string& session_id,
                               const std::optional<std::string>& user_id, const std::vector<SessionStep>& history) const
{
    const auto site_ptr = site(site_id);
    Session s;
    s.id = session_id;
    s.site_id = site_id;
    s.user_id = user_id;
    s.current = partial_evaluate(site_ptr->program, Assignment{});
    update_status(s, *site_ptr);
    for (const auto& step : history)
        apply_step(s, *site_ptr, step, nullptr);
    return s;
}

} // namespace personable
